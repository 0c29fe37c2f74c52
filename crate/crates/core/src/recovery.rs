//! Least-squares fits over angle sweeps of the normalized interaction
//! amplitude, and the algebra that turns the fitted coefficients and the
//! two wavespeeds into `(λ, μ, ρ, 𝒜, ℬ)`.

use crate::error::{Error, Result};
use crate::interaction::{
    amplitude_a, max_inplane_angle, ssp_coefficient, BeamNormalizers, ConfigKind, InteractionConfig,
};
use crate::medium::{IsotropicMedium, PointModuli};
use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::Serialize;

/// One normalized amplitude `det(Y)^{1/2} c_P^{5/2} c_S⁵ 𝒜`. This is the
/// `ρ^{3/2}`-free part of the scaled amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepSample {
    pub angle: f64,
    pub value: f64,
    pub kind: ConfigKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiFit {
    /// `ρ^{-3/2}(λ+ℬ)`
    pub k1: f64,
    /// `ρ^{-3/2}(4μ+𝒜)`
    pub k2: f64,
    pub residual: f64,
    pub condition: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaFit {
    /// `ρ^{-3/2}(2μ+2ℬ+𝒜)`
    pub k3: f64,
    pub residual: f64,
    /// `k_sum` and `k3` refitted without pinning `k_sum`, when at least two
    /// distinct angles are present.
    pub free: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveredModuli {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    /// Always `None`: `𝒞` is not determined by this pipeline.
    pub c: Option<f64>,
    pub psi_residual: f64,
    pub alpha_residual: f64,
    pub condition: f64,
}

const MAX_CONDITION: f64 = 1e8;

fn check_samples(samples: &[SweepSample], kind: ConfigKind) -> Result<()> {
    for s in samples {
        if s.kind != kind {
            return Err(Error::ConfigMismatch(format!(
                "expected {kind:?} samples, found {:?}",
                s.kind
            )));
        }
        if !(0.0..=std::f64::consts::PI).contains(&s.angle) || !s.value.is_finite() {
            return Err(Error::InvalidInput(format!("sample angle {} outside [0, π]", s.angle)));
        }
    }
    Ok(())
}

/// Least squares by QR, returning the coefficients, the largest absolute
/// residual and the design condition number.
fn lstsq(a: DMatrix<f64>, b: DVector<f64>) -> Result<(DVector<f64>, f64, f64)> {
    let sv = a.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond < MAX_CONDITION) {
        return Err(Error::RankDeficient { condition: cond });
    }
    let qr = a.clone().qr();
    let rhs = qr.q().transpose() * &b;
    let x = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient { condition: cond })?;
    let res = (&a * &x - b).amax();
    Ok((x, res, cond))
}

/// Fits PERP samples to `k₁ (a + cos ψ) + (k₂/2)(1 + a cos ψ) cos ψ`.
pub fn fit_psi_sweep(samples: &[SweepSample], c_p: f64, c_s: f64) -> Result<PsiFit> {
    check_samples(samples, ConfigKind::Perp)?;
    if samples.len() < 2 {
        return Err(Error::InvalidInput("need at least two ψ samples".into()));
    }
    let n = samples.len();
    let a = DMatrix::from_fn(n, 2, |i, j| {
        let psi = samples[i].angle;
        let (a, c) = (ssp_coefficient(psi, c_p, c_s), psi.cos());
        if j == 0 {
            a + c
        } else {
            (1.0 + a * c) * c
        }
    });
    let b = DVector::from_iterator(n, samples.iter().map(|s| s.value));
    let (x, residual, condition) = lstsq(a, b)?;
    Ok(PsiFit {
        k1: x[0],
        k2: 2.0 * x[1],
        residual,
        condition,
    })
}

/// Fits INPLANE samples to `k_sum cos²α − (k₃/2) sin²α` with `k_sum` fixed.
pub fn fit_alpha_sweep(samples: &[SweepSample], k_sum: f64) -> Result<AlphaFit> {
    check_samples(samples, ConfigKind::InPlane)?;
    let s2: Vec<f64> = samples.iter().map(|s| s.angle.sin().powi(2)).collect();
    if s2.iter().all(|&v| v < 1e-14) || samples.is_empty() {
        return Err(Error::Unidentifiable("all α samples have sin α = 0".into()));
    }
    let n = samples.len();
    let a = DMatrix::from_iterator(n, 1, s2.iter().map(|v| -0.5 * v));
    let b = DVector::from_iterator(n, samples.iter().map(|s| s.value - k_sum * s.angle.cos().powi(2)));
    let (x, residual, _) = lstsq(a, b)?;
    let distinct = samples.iter().any(|s| (s.angle - samples[0].angle).abs() > 1e-6);
    let free = if distinct {
        let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 - s2[i] } else { -0.5 * s2[i] });
        let b = DVector::from_iterator(n, samples.iter().map(|s| s.value));
        lstsq(a, b).ok().map(|(x, _, _)| (x[0], x[1]))
    } else {
        None
    };
    Ok(AlphaFit {
        k3: x[0],
        residual,
        free,
    })
}

pub fn assemble_parameters(k1: f64, k2: f64, k3: f64, c_p: f64, c_s: f64) -> Result<RecoveredModuli> {
    if !(c_p > c_s && c_s > 0.0) {
        return Err(Error::InvalidInput(format!("need c_P > c_S > 0, got {c_p}, {c_s}")));
    }
    let kk = k1 + 0.5 * (k2 - k3);
    if !(kk > 0.0) {
        return Err(Error::Inconsistent(format!("ρ^(-3/2)(λ+μ) = {kk} is not positive")));
    }
    let rho = ((c_p * c_p - c_s * c_s) / kk).powi(2);
    let mu = rho * c_s * c_s;
    let lambda = rho * (c_p * c_p - 2.0 * c_s * c_s);
    let r32 = rho.powf(1.5);
    Ok(RecoveredModuli {
        k1,
        k2,
        k3,
        lambda,
        mu,
        rho,
        a: k2 * r32 - 4.0 * mu,
        b: k1 * r32 - lambda,
        c: None,
        psi_residual: 0.0,
        alpha_residual: 0.0,
        condition: 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AngleGrids {
    pub psi: Vec<f64>,
    /// In-plane angles; must not exceed the largest attainable angle.
    pub alpha: Vec<f64>,
}

impl AngleGrids {
    /// Four spread ψ values and two in-plane angles at 45% and 90% of the
    /// largest attainable angle.
    pub fn default_for(c_p: f64, c_s: f64) -> Self {
        let (amax, _) = max_inplane_angle(c_p, c_s);
        AngleGrids {
            psi: vec![0.3, 0.9, 1.5, 2.1],
            alpha: vec![0.45 * amax, 0.9 * amax],
        }
    }
}

/// Normalized amplitudes for both sweeps from the true moduli.
pub fn synthesize_samples(p: &PointModuli, grids: &AngleGrids) -> Result<(Vec<SweepSample>, Vec<SweepSample>)> {
    let (cp, cs) = (p.c_p(), p.c_s());
    let norms = BeamNormalizers::default();
    let perp = grids
        .psi
        .iter()
        .map(|&psi| {
            let cfg = InteractionConfig::perp_from_psi(psi, cp, cs)?;
            Ok(SweepSample {
                angle: psi,
                value: amplitude_a(&cfg, p, &norms)?.observable,
                kind: ConfigKind::Perp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let inplane = grids
        .alpha
        .iter()
        .map(|&alpha| {
            let cfg = InteractionConfig::inplane_from_alpha(alpha, cp, cs)?;
            Ok(SweepSample {
                angle: alpha,
                value: amplitude_a(&cfg, p, &norms)?.observable,
                kind: ConfigKind::InPlane,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((perp, inplane))
}

pub fn recover_from_samples(
    perp: &[SweepSample],
    inplane: &[SweepSample],
    c_p: f64,
    c_s: f64,
) -> Result<RecoveredModuli> {
    let pf = fit_psi_sweep(perp, c_p, c_s)?;
    let af = fit_alpha_sweep(inplane, pf.k1 + 0.5 * pf.k2)?;
    let mut r = assemble_parameters(pf.k1, pf.k2, af.k3, c_p, c_s)?;
    r.psi_residual = pf.residual;
    r.alpha_residual = af.residual;
    r.condition = pf.condition;
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct PointRecovery {
    pub x0: [f64; 3],
    pub truth: PointModuli,
    pub recovered: RecoveredModuli,
    /// Largest relative error over `λ, μ, ρ, 𝒜, ℬ`.
    pub max_relative_error: f64,
    pub perp: Vec<SweepSample>,
    pub inplane: Vec<SweepSample>,
}

pub fn relative_errors(truth: &PointModuli, r: &RecoveredModuli) -> [f64; 5] {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    [
        rel(r.lambda, truth.lambda),
        rel(r.mu, truth.mu),
        rel(r.rho, truth.rho),
        rel(r.a, truth.a),
        rel(r.b, truth.b),
    ]
}

/// Synthesizes both sweeps from the true moduli at `x0`, fits, assembles
/// and compares. `grids` defaults per point to `AngleGrids::default_for`.
pub fn end_to_end_recover(m: &IsotropicMedium, x0: &Vector3<f64>, grids: Option<&AngleGrids>) -> Result<PointRecovery> {
    let p = m.moduli_at(x0)?;
    let (cp, cs) = (p.c_p(), p.c_s());
    let g = match grids {
        Some(g) => g.clone(),
        None => AngleGrids::default_for(cp, cs),
    };
    let (perp, inplane) = synthesize_samples(&p, &g)?;
    let recovered = recover_from_samples(&perp, &inplane, cp, cs)?;
    let max_relative_error = relative_errors(&p, &recovered).into_iter().fold(0.0, f64::max);
    Ok(PointRecovery {
        x0: (*x0).into(),
        truth: p,
        recovered,
        max_relative_error,
        perp,
        inplane,
    })
}

pub fn recover_points(
    m: &IsotropicMedium,
    points: &[Vector3<f64>],
    grids: Option<&AngleGrids>,
) -> Result<Vec<PointRecovery>> {
    points.par_iter().map(|x| end_to_end_recover(m, x, grids)).collect()
}
