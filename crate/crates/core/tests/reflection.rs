use elastobeam::geodesics::TraceOptions;
use elastobeam::medium::PointModuli;
use elastobeam::reflection::*;
use elastobeam::riccati::C64;
use elastobeam::{ConvexDomain, IsotropicMedium, WaveMode};
use nalgebra::{Matrix4, Vector3};
use proptest::prelude::*;

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn moduli() -> PointModuli {
    PointModuli::new(2.0, 1.0, 1.0, 0.0, 0.0, 0.0)
}

fn incidence(angle: f64, azimuth: f64, c: f64) -> Vector3<f64> {
    Vector3::new(angle.sin() * azimuth.cos(), angle.sin() * azimuth.sin(), angle.cos()) / c
}

prop_compose! {
    fn admissible()(mu in 0.2f64..3.0, lf in -0.6f64..3.0, rho in 0.3f64..4.0) -> PointModuli {
        PointModuli::new(lf * mu, mu, rho, 0.0, 0.0, 0.0)
    }
}

#[test]
fn snell_examples() {
    let p = moduli();
    let sn = snell_reflect(&Vector3::new(0.0, 0.0, 0.5), WaveMode::P, 2.0, 1.0).unwrap();
    assert_eq!(sn.xi_p_minus(), Vector3::new(re(0.0), re(0.0), re(-0.5)));
    assert_eq!(sn.xi_s_minus(), Vector3::new(0.0, 0.0, -1.0));

    let xi = incidence(20f64.to_radians(), 0.0, p.c_s());
    let sn = snell_reflect(&xi, WaveMode::S, 2.0, 1.0).unwrap();
    assert!(!sn.evanescent);
    assert!((sn.xi_p_minus()[2].re + 0.36471).abs() < 1e-4);
    assert!((sn.xi_p_minus()[2].re + 0.364722).abs() < 1e-6);

    let xi = incidence(45f64.to_radians(), 0.0, p.c_s());
    let sn = snell_reflect(&xi, WaveMode::S, 2.0, 1.0).unwrap();
    assert!(sn.evanescent);
    assert!((sn.xi_p3 - C64::new(0.0, 0.5)).norm() < 1e-12);
    assert!((C64::new(0.0, -1.0) * sn.xi_p3).re > 0.0);

    assert!(snell_reflect(&Vector3::new(0.0, 0.0, -0.5), WaveMode::P, 2.0, 1.0).is_err());
    assert!(snell_reflect(&Vector3::new(0.0, 0.0, 0.7), WaveMode::P, 2.0, 1.0).is_err());
}

#[test]
fn normal_incidence_matrix_row() {
    let p = moduli();
    let m = assemble_mp(0.0, 0.0, re(0.5), 1.0, &p);
    assert_eq!(m[(2, 0)], re(p.rho));
    assert_eq!(m[(2, 1)], re(0.0));
    assert_eq!(m[(2, 2)], re(0.0));
    assert_eq!(m[(2, 3)], re(-(p.lambda + 2.0 * p.mu)));
}

#[test]
fn normal_incidence_closed_forms() {
    let p = moduli();
    let ap = C64::new(0.7, -0.3);
    let rc = solve_p_incidence(ap, &Vector3::new(0.0, 0.0, 0.5), &p).unwrap();
    assert!((rc.a_p_minus + ap).norm() < 1e-12);
    assert!(rc.a_s_minus.norm() < 1e-12);

    let rc = solve_p_incidence(re(0.0), &Vector3::new(0.0, 0.0, 0.5), &p).unwrap();
    assert_eq!(rc.a_p_minus.norm() + rc.a_s_minus.norm(), 0.0);

    let a = Vector3::new(re(0.6), C64::new(0.0, 0.8), re(0.0));
    let rc = solve_s_incidence(&a, &Vector3::new(0.0, 0.0, 1.0), &p).unwrap();
    assert!(rc.a_p_minus.norm() < 1e-12);
    assert!((rc.a_s_minus.norm() - a.norm()).abs() < 1e-12);
}

#[test]
fn sh_decouples() {
    let p = moduli();
    for deg in [10.0f64, 25.0, 40.0, 70.0] {
        let xi = incidence(deg.to_radians(), 0.0, p.c_s());
        let rc = solve_s_incidence(&Vector3::new(re(0.0), re(1.0), re(0.0)), &xi, &p).unwrap();
        assert!(rc.a_p_minus.norm() < 1e-14);
        assert!(rc.a_s_minus[0].norm() < 1e-14 && rc.a_s_minus[2].norm() < 1e-14);
    }
}

#[test]
fn input_validation() {
    let p = moduli();
    let xi = incidence(0.3, 0.2, p.c_s());
    let bad = xi.map(re);
    assert!(matches!(
        solve_s_incidence(&bad, &xi, &p),
        Err(elastobeam::Error::NotTransversal(_))
    ));
}

#[test]
fn reflection_tree_in_ball() {
    let m = IsotropicMedium::constant(moduli());
    let dom = ConvexDomain::unit_ball();
    let dir = Vector3::new(1.0, 0.4, 0.2);
    let (sv, _) = s_polarizations(&dir.normalize());
    let tree = reflection_tree(
        &m,
        &dom,
        &Vector3::new(0.1, 0.0, 0.0),
        &dir,
        BranchAmplitude::S(sv.map(re)),
        2,
        &TraceOptions::default(),
    )
    .unwrap();
    assert!(tree.count() >= 5 && tree.count() <= 7);
    assert!(tree.max_traction_residual().unwrap() < 1e-10);
    let exit = Vector3::from(tree.path.exit.x);
    for c in &tree.children {
        let entry = Vector3::from(c.path.entry.x);
        assert!((entry - exit).norm() < 1e-7);
        assert!((c.path.t0 - tree.path.exit.t).abs() < 1e-12);
        assert_eq!(c.depth, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn boundary_matrix_invertible(p in admissible(), th in 0.0f64..1.5, az in 0.0f64..6.3, s_in in any::<bool>()) {
        let mode = if s_in { WaveMode::S } else { WaveMode::P };
        let xi = incidence(th, az, p.wavespeed(mode));
        let sn = snell_reflect(&xi, mode, p.c_p(), p.c_s()).unwrap();
        let m = assemble_mp(sn.xi1, sn.xi2, sn.xi_p3, sn.xi_s3, &p);
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(m.determinant().norm() > 1e-8 * scale.powi(4));
    }

    #[test]
    fn reduced_determinant_closed_form(p in admissible(), th in 0.0f64..1.5) {
        let xi = incidence(th, 0.0, p.c_p());
        let sn = snell_reflect(&xi, WaveMode::P, p.c_p(), p.c_s()).unwrap();
        let num = reduced_sv_determinant(sn.xi1, xi[2], sn.xi_s3, &p);
        let cf = reduced_sv_determinant_closed_form(sn.xi1, xi[2], sn.xi_s3, p.mu);
        prop_assert!(cf > 0.0);
        prop_assert!((num - cf).abs() <= 1e-10 * cf.abs());
    }

    #[test]
    fn matrix_matches_traction_columns(p in admissible(), th in 0.0f64..1.5, az in 0.0f64..6.3) {
        let xi = incidence(th, az, p.c_s());
        let sn = snell_reflect(&xi, WaveMode::S, p.c_p(), p.c_s()).unwrap();
        let m = assemble_mp(sn.xi1, sn.xi2, sn.xi_p3, sn.xi_s3, &p);
        let xp = sn.xi_p_minus();
        let xs = sn.xi_s_minus().map(re);
        let col0 = traction_matrix(&xp, &p) * xp;
        let bs = traction_matrix(&xs, &p);
        let mut want = Matrix4::<C64>::zeros();
        for i in 0..3 {
            want[(i, 0)] = col0[i];
            for j in 0..3 {
                want[(i, j + 1)] = bs[(i, j)];
            }
            want[(3, i + 1)] = xs[i];
        }
        let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!((m - want).iter().all(|d| d.norm() < 1e-12 * scale));
    }

    #[test]
    fn traction_cancels(p in admissible(), th in 0.0f64..1.5, az in 0.0f64..6.3, s_in in any::<bool>(),
                        a in prop::array::uniform4(-1.0f64..1.0)) {
        let (rc, xi) = if s_in {
            let xi = incidence(th, az, p.c_s());
            let (sv, sh) = s_polarizations(&(xi * p.c_s()));
            let pol = sv.map(re) * C64::new(a[0], a[1]) + sh.map(re) * C64::new(a[2], a[3]);
            (solve_s_incidence(&pol, &xi, &p).unwrap(), xi)
        } else {
            let xi = incidence(th, az, p.c_p());
            (solve_p_incidence(C64::new(a[0], a[1]), &xi, &p).unwrap(), xi)
        };
        prop_assert!(rc.traction_residual(&p) < 1e-10);
        prop_assert_eq!(rc.snell.xi1, xi[0]);
        prop_assert_eq!(rc.snell.xi2, xi[1]);
        let xs = rc.snell.xi_s_minus().map(re);
        prop_assert!(rc.a_s_minus.dot(&xs).norm() < 1e-12 * (1.0 + rc.a_s_minus.norm()) * xs.norm());
        if rc.evanescent() {
            prop_assert!((C64::new(0.0, -1.0) * rc.snell.xi_p3).re > 0.0);
        }
    }
}
