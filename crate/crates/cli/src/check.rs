use crate::commands::{interior_points, reference_moduli};
use crate::output::Output;
use crate::{Failure, Global};
use elastobeam::geodesics::{trace_geodesic, FermiChart, TraceOptions};
use elastobeam::interaction::{
    amplitude_a, divergence_identity_check, interaction_density, max_inplane_angle, quadratic_source_g,
    BeamNormalizers, InteractionConfig,
};
use elastobeam::recovery::recover_points;
use elastobeam::reflection::*;
use elastobeam::riccati::{default_h0, evolve_along_ray, identity_y0, C64};
use elastobeam::{ConvexDomain, IsotropicMedium, PointModuli, WaveMode};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Serialize)]
struct Row {
    name: &'static str,
    samples: usize,
    value: f64,
    threshold: f64,
    passed: bool,
}

#[derive(Serialize)]
struct Report {
    seed: u64,
    passed: bool,
    checks: Vec<Row>,
}

fn rng_for(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r.set_word_pos(index as u128 * 1024);
    r
}

fn random_medium(rng: &mut ChaCha8Rng) -> elastobeam::Result<IsotropicMedium> {
    let mut lin = |base: f64, amp: f64| -> String {
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-amp..amp)).collect();
        let k: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
        format!(
            "{base} + {} * x1 + {} * x2 + {} * x3 + {} * sin({} * x1 + {} * x2 + {} * x3)",
            a[0], a[1], a[2], a[3], k[0], k[1], k[2]
        )
    };
    let lambda = lin(2.0, 0.2);
    let mu = format!("pow({}, 2)", lin(1.0, 0.12));
    let rho = lin(1.0, 0.1);
    IsotropicMedium::from_expressions([&lambda, &mu, &rho, "0.3", "0.2", "0.1"])
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

fn admissible(rng: &mut ChaCha8Rng) -> PointModuli {
    let mu = rng.gen_range(0.2..3.0);
    PointModuli::new(
        rng.gen_range(-0.6..3.0) * mu,
        mu,
        rng.gen_range(0.3..4.0),
        0.0,
        0.0,
        0.0,
    )
}

fn incidence(th: f64, az: f64, c: f64) -> Vector3<f64> {
    Vector3::new(th.sin() * az.cos(), th.sin() * az.sin(), th.cos()) / c
}

fn max_of(v: impl ParallelIterator<Item = elastobeam::Result<f64>>) -> elastobeam::Result<f64> {
    v.try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

fn riccati_conservation(seed: u64, rays: usize) -> elastobeam::Result<f64> {
    let dom = ConvexDomain::unit_ball();
    max_of((0..rays).into_par_iter().map(|i| {
        let mut rng = rng_for(seed, 1, i);
        let m = random_medium(&mut rng)?;
        let mode = if rng.gen_bool(0.5) { WaveMode::P } else { WaveMode::S };
        let x0 = unit(&mut rng) * rng.gen_range(0.0..0.5);
        let path = trace_geodesic(&m, mode, &x0, &unit(&mut rng), &dom, 0.0, &TraceOptions::default())?;
        let chart = FermiChart::new(path)?;
        evolve_along_ray(&chart, identity_y0(), default_h0())?.max_conservation_drift()
    }))
}

/// Largest `floor / |det M_P|` (below 1 means invertible) and the largest
/// relative error of the reduced determinant.
fn boundary_matrix_sampling(seed: u64, draws: usize) -> elastobeam::Result<(f64, f64)> {
    let inv = max_of((0..draws).into_par_iter().map(|i| {
        let mut rng = rng_for(seed, 2, i);
        let p = admissible(&mut rng);
        let mode = if rng.gen_bool(0.5) { WaveMode::P } else { WaveMode::S };
        let xi = incidence(rng.gen_range(0.0..1.5), rng.gen_range(0.0..6.3), p.wavespeed(mode));
        let sn = snell_reflect(&xi, mode, p.c_p(), p.c_s())?;
        let m = assemble_mp(sn.xi1, sn.xi2, sn.xi_p3, sn.xi_s3, &p);
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let floor = 1e-8 * scale.powi(4);
        Ok(floor / m.determinant().norm())
    }))?;
    let red = max_of((0..draws).into_par_iter().map(|i| {
        let mut rng = rng_for(seed, 3, i);
        let p = admissible(&mut rng);
        let xi = incidence(rng.gen_range(0.0..1.5), 0.0, p.c_p());
        let sn = snell_reflect(&xi, WaveMode::P, p.c_p(), p.c_s())?;
        let num = reduced_sv_determinant(sn.xi1, xi[2], sn.xi_s3, &p);
        let cf = reduced_sv_determinant_closed_form(sn.xi1, xi[2], sn.xi_s3, p.mu);
        Ok((num - cf).abs() / cf.abs())
    }))?;
    Ok((inv, red))
}

fn traction(seed: u64, draws: usize) -> elastobeam::Result<f64> {
    max_of((0..draws).into_par_iter().map(|i| {
        let mut rng = rng_for(seed, 4, i);
        let p = admissible(&mut rng);
        let (th, az) = (rng.gen_range(0.0..1.5), rng.gen_range(0.0..6.3));
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rc = if rng.gen_bool(0.5) {
            let xi = incidence(th, az, p.c_s());
            let (sv, sh) = s_polarizations(&(xi * p.c_s()));
            let pol = sv.map(|v| C64::new(v, 0.0)) * C64::new(a[0], a[1])
                + sh.map(|v| C64::new(v, 0.0)) * C64::new(a[2], a[3]);
            solve_s_incidence(&pol, &xi, &p)?
        } else {
            solve_p_incidence(C64::new(a[0], a[1]), &incidence(th, az, p.c_p()), &p)?
        };
        Ok(rc.traction_residual(&p))
    }))
}

fn normal_incidence() -> elastobeam::Result<f64> {
    let p = reference_moduli();
    let ap = C64::new(0.7, -0.3);
    let rc = solve_p_incidence(ap, &Vector3::new(0.0, 0.0, 1.0 / p.c_p()), &p)?;
    Ok(((rc.a_p_minus + ap).norm()).max(rc.a_s_minus.norm()))
}

fn contraction(seed: u64, draws: usize) -> f64 {
    (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, 5, i);
            let mut g = || Matrix3::from_fn(|_, _| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
            let (g1, g2, g0) = (g(), g(), g());
            let p = PointModuli::new(2.0, 1.0, 1.0, 0.3, 0.2, 0.1);
            let lhs = interaction_density(&g1, &g2, &g0, &p);
            let big = quadratic_source_g(&g1, &g2, &p);
            (lhs - big.component_mul(&g0).sum()).norm() / (big.norm() * g0.norm() + 1.0)
        })
        .reduce(|| 0.0, f64::max)
}

fn divergence() -> elastobeam::Result<f64> {
    let field = |a: [f64; 3], c: [f64; 3]| {
        move |x: &Vector3<f64>| -> elastobeam::Result<Vector3<f64>> {
            Ok(Vector3::from_fn(|i, _| {
                a[i] * x[(i + 1) % 3] + c[i] * x[i] * x[(i + 2) % 3] + 0.2 * x[i] * x[i]
            }))
        }
    };
    let m = IsotropicMedium::constant(PointModuli::new(2.0, 1.0, 1.0, 0.3, 0.2, 0.1));
    let doms = [
        ConvexDomain::unit_ball(),
        ConvexDomain::ellipsoid(Vector3::new(0.1, 0.0, -0.1), Vector3::new(1.0, 0.7, 0.5)),
    ];
    let mut worst: f64 = 0.0;
    for dom in &doms {
        let r = divergence_identity_check(
            field([0.5, -0.3, 0.2], [0.4, 0.1, -0.6]),
            field([-0.2, 0.6, 0.3], [0.2, -0.5, 0.3]),
            field([0.3, 0.1, -0.4], [-0.1, 0.7, 0.2]),
            &m,
            dom,
            8,
        )?;
        worst = worst.max(r.residual);
    }
    Ok(worst)
}

fn closed_forms(seed: u64, draws: usize) -> elastobeam::Result<f64> {
    max_of((0..draws).into_par_iter().map(|i| {
        let mut rng = rng_for(seed, 6, i);
        let mu = rng.gen_range(0.3..3.0);
        let p = PointModuli::new(
            rng.gen_range(0.2..3.0) * mu,
            mu,
            rng.gen_range(0.3..4.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        let (cp, cs) = (p.c_p(), p.c_s());
        let cfg = if rng.gen_bool(0.5) {
            InteractionConfig::perp_from_psi(rng.gen_range(0.0..3.1), cp, cs)?
        } else {
            let (amax, _) = max_inplane_angle(cp, cs);
            InteractionConfig::inplane_from_alpha(rng.gen_range(0.0..amax), cp, cs)?
        };
        let r = amplitude_a(&cfg, &p, &BeamNormalizers::default())?;
        Ok((r.scaled.re - r.closed_form).abs() / r.closed_form.abs().max(1.0))
    }))
}

fn recovery(seed: u64) -> elastobeam::Result<f64> {
    let m = IsotropicMedium::from_expressions([
        "2 + 0.3 * sin(x1 + 2 * x2)",
        "1 + 0.2 * x3^2",
        "1.1 + 0.1 * cos(x1 * x3)",
        "0.3 - 0.4 * x2",
        "0.2 + 0.5 * x1 * x2",
        "0.1",
    ])?;
    let mut rng = rng_for(seed, 7, 0);
    let pts = interior_points(&ConvexDomain::unit_ball(), 5, &mut rng);
    Ok(recover_points(&m, &pts, None)?
        .iter()
        .map(|r| r.max_relative_error)
        .fold(0.0, f64::max))
}

pub fn run(g: &Global, out: &Output, draws: usize, rays: usize) -> Result<(), Failure> {
    let t = g.tol;
    let s = g.seed;
    let small = (draws / 10).max(1);
    let (inv, red) = boundary_matrix_sampling(s, draws)?;
    let checks: Vec<(&'static str, usize, f64, f64)> = vec![
        ("riccati conservation", rays, riccati_conservation(s, rays)?, 1e-8),
        ("reflection matrix invertible", draws, inv, 1.0),
        ("reduced determinant", draws, red, 1e-10),
        ("traction cancellation", small, traction(s, small)?, 1e-10),
        ("normal incidence", 1, normal_incidence()?, 1e-12),
        ("contraction identity", small, contraction(s, small), 1e-12),
        ("divergence identity", 2, divergence()?, 1e-6),
        ("closed-form amplitude", small, closed_forms(s, small)?, 1e-10),
        ("recovery round trip", 5, recovery(s)?, 1e-9),
    ];
    let rows: Vec<Row> = checks
        .into_iter()
        .map(|(name, samples, value, thr)| Row {
            name,
            samples,
            value,
            threshold: thr * t,
            passed: value < thr * t,
        })
        .collect();
    let passed = rows.iter().all(|r| r.passed);
    let mut table = String::new();
    for r in &rows {
        table += &format!(
            "{:<30} {:>6} {:>12.3e} < {:<9.1e} {}\n",
            r.name,
            r.samples,
            r.value,
            r.threshold,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    if out.has_dir() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    out.json(
        "check.json",
        &Report {
            seed: s,
            passed,
            checks: rows,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Check("some invariants failed".into()))
    }
}
