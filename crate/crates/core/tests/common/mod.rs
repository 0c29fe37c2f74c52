#![allow(dead_code)]

use elastobeam::{ConvexDomain, IsotropicMedium, WaveMode};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A smooth admissible medium on a neighbourhood of the unit ball, with
/// coefficients drawn from `rng`.
pub fn random_medium(rng: &mut ChaCha8Rng) -> IsotropicMedium {
    let mut lin = |base: f64, amp: f64| -> String {
        let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-amp..amp)).collect();
        let b = rng.gen_range(-amp..amp);
        let k: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
        format!(
            "{base} + {} * x1 + {} * x2 + {} * x3 + {} * sin({} * x1 + {} * x2 + {} * x3)",
            a[0], a[1], a[2], b, k[0], k[1], k[2]
        )
    };
    let lambda = lin(2.0, 0.2);
    let mu = format!("pow({}, 2)", lin(1.0, 0.12));
    let rho = lin(1.0, 0.1);
    let a = lin(0.3, 0.1);
    let b = lin(0.2, 0.1);
    let c = lin(0.1, 0.1);
    IsotropicMedium::from_expressions([&lambda, &mu, &rho, &a, &b, &c]).unwrap()
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_mode(rng: &mut ChaCha8Rng) -> WaveMode {
    if rng.gen_bool(0.5) {
        WaveMode::P
    } else {
        WaveMode::S
    }
}

/// S-wave speed `1 + |x|²/4` with unit density.
pub fn radial_medium() -> IsotropicMedium {
    IsotropicMedium::from_expressions(["0", "pow(1 + (x1^2 + x2^2 + x3^2) / 4, 2)", "1", "0", "0", "0"]).unwrap()
}

pub fn unit_ball() -> ConvexDomain {
    ConvexDomain::unit_ball()
}
