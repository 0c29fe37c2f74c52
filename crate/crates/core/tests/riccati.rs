mod common;

use common::*;
use elastobeam::geodesics::{trace_geodesic, FermiChart, TraceOptions};
use elastobeam::ode::OdeOptions;
use elastobeam::riccati::{c_matrix, default_h0, evolve_along_ray, evolve_yz, identity_y0, CMat3, DFn, C64};
use elastobeam::WaveMode;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::Arc;

fn random_sym(rng: &mut ChaCha8Rng, amp: f64) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.gen_range(-amp..amp));
    (a + a.transpose()) * 0.5
}

#[test]
fn conservation_along_random_rays() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let m = random_medium(&mut rng);
        let mode = random_mode(&mut rng);
        let x0 = random_unit(&mut rng) * rng.gen_range(0.0..0.5);
        let path = trace_geodesic(
            &m,
            mode,
            &x0,
            &random_unit(&mut rng),
            &unit_ball(),
            0.0,
            &TraceOptions::default(),
        )
        .unwrap();
        let chart = FermiChart::new(path).unwrap();
        let ev = evolve_along_ray(&chart, identity_y0(), default_h0()).unwrap();
        assert!(ev.max_conservation_drift().unwrap() < 1e-8);
        assert!(ev.max_asymmetry().unwrap() < 1e-8);
        assert!(ev.min_imag_eigenvalue().unwrap() > 0.0);
        assert!((ev.c0 - 1.0).abs() < 1e-14);
    }
}

#[test]
fn riccati_residual_with_random_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d0 = random_sym(&mut rng, 0.3);
    let d1 = random_sym(&mut rng, 0.2);
    let d: DFn = Arc::new(move |t| Ok(d0 + d1 * t));
    let h0 = CMat3::from_fn(|i, j| {
        let re = [[0.2, 0.1, 0.0], [0.1, -0.3, 0.05], [0.0, 0.05, 0.1]][i][j];
        let im = [[1.0, 0.1, 0.0], [0.1, 0.8, 0.0], [0.0, 0.0, 1.5]][i][j];
        C64::new(re, im)
    });
    let y0 = CMat3::identity() + CMat3::from_fn(|i, j| C64::new(0.1 * (i as f64 - j as f64), 0.0));
    let ev = evolve_yz(d.clone(), y0, h0, (-1.0, 1.5), 0.2, &OdeOptions::default()).unwrap();
    assert!(ev.max_conservation_drift().unwrap() < 1e-8);
    let c = c_matrix().map(|v| C64::new(v, 0.0));
    for tau in [-0.7, 0.0, 0.6, 1.2] {
        let h = 1e-4;
        let hp = ev.at(tau + h).unwrap().h().unwrap();
        let hm = ev.at(tau - h).unwrap().h().unwrap();
        let hh = ev.at(tau).unwrap().h().unwrap();
        let dh = (hp - hm) / C64::new(2.0 * h, 0.0);
        let res = dh + hh * c * hh + d(tau).unwrap().map(|v| C64::new(v, 0.0));
        assert!(res.norm() < 1e-6, "residual {} at {tau}", res.norm());
    }
    let h_start = ev.at(0.2).unwrap().h().unwrap();
    assert!((h_start - h0).norm() < 1e-14);
}

/// `c²|∇φ|² − φ_t²` at Fermi coordinates `(τ, r, y2, y3)` for the
/// quadratic phase `φ = r + z·Hz`.
fn eikonal_residual(chart: &FermiChart, ev: &elastobeam::riccati::RiccatiEvolution, tau: f64, z: [f64; 3]) -> f64 {
    let q = ev.at(tau).unwrap();
    let hm = q.h().unwrap();
    let c = c_matrix().map(|v| C64::new(v, 0.0));
    let dh = -(hm * c * hm) - ev.d_at(tau).unwrap().map(|v| C64::new(v, 0.0));
    let zv = Vector3::new(z[0], z[1], z[2]).map(|v| C64::new(v, 0.0));
    let hz = hm * zv;
    let phi_tau = (zv.transpose() * dh * zv)[0];
    let phi_r = C64::new(1.0, 0.0) + hz[0] * 2.0;
    let phi_y = [hz[1] * 2.0, hz[2] * 2.0];
    let phi_t = (phi_tau - phi_r) * FRAC_1_SQRT_2;
    let phi_s = (phi_tau + phi_r) * FRAC_1_SQRT_2;
    let s = (tau + z[0]) * FRAC_1_SQRT_2;
    let f = |ds: f64, a: f64, b: f64| chart.forward_spatial(s + ds, z[1] + a, z[2] + b).unwrap();
    let h = 1e-5;
    let jac = Matrix3::from_columns(&[
        (f(h, 0.0, 0.0) - f(-h, 0.0, 0.0)) / (2.0 * h),
        (f(0.0, h, 0.0) - f(0.0, -h, 0.0)) / (2.0 * h),
        (f(0.0, 0.0, h) - f(0.0, 0.0, -h)) / (2.0 * h),
    ]);
    let jit = jac.try_inverse().unwrap().transpose().map(|v| C64::new(v, 0.0));
    let grad = jit * Vector3::new(phi_s, phi_y[0], phi_y[1]);
    let x = f(0.0, 0.0, 0.0);
    let cv = chart.path.medium().wavespeed(&x, chart.mode()).unwrap();
    let g2: C64 = grad.iter().map(|g| g * g).sum();
    (g2 * cv * cv - phi_t * phi_t).norm()
}

#[test]
fn quadratic_phase_solves_eikonal_to_second_order() {
    let m = radial_medium();
    let path = trace_geodesic(
        &m,
        WaveMode::S,
        &Vector3::new(0.2, -0.1, 0.3),
        &Vector3::new(0.3, 1.0, -0.4),
        &unit_ball(),
        0.0,
        &TraceOptions::default(),
    )
    .unwrap();
    let chart = FermiChart::new(path).unwrap();
    let ev = evolve_along_ray(&chart, identity_y0(), default_h0()).unwrap();
    let tau = 0.3 * SQRT_2;
    for dir in [[0.0, 0.8, 0.6], [0.5, 0.5, -0.7071067811865476], [0.0, -0.28, 0.96]] {
        let eps = [0.08, 0.04, 0.02];
        let r: Vec<f64> = eps
            .iter()
            .map(|e| eikonal_residual(&chart, &ev, tau, [e * dir[0], e * dir[1], e * dir[2]]))
            .collect();
        for k in 0..2 {
            // third-order decay; a wrong D leaves an ε² term (ratio 4)
            assert!(r[k] / r[k + 1] > 6.0, "residuals {r:?}");
        }
    }
}
