//! The three-beam interaction integral in a homogeneous medium, evaluated
//! by tensor Gauss–Legendre quadrature in coordinates that whiten the
//! imaginary part of the phase Hessian at the stationary point.

use super::{interaction_density, rank_one, InteractionConfig};
use crate::beams::{cutoff, BeamAmplitude, CVec3};
use crate::error::{Error, Result};
use crate::geodesics::orthonormal_complement;
use crate::medium::{PointModuli, WaveMode};
use crate::riccati::C64;
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen, Vector3, Vector4};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::num::NonZeroUsize;

/// Gaussian beam along a straight ray in a homogeneous medium, anchored at
/// `x0` at time 0 with `Y₀ = I`, `H₀ = iI`.
#[derive(Clone, Copy, Debug)]
pub struct StraightBeam {
    pub c: f64,
    pub rho: f64,
    pub x0: Vector3<f64>,
    pub dir: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub e3: Vector3<f64>,
    pub amplitude: BeamAmplitude,
    pub delta: f64,
}

/// Phase, Cartesian phase gradient, amplitude vector and cutoff value.
#[derive(Clone, Copy, Debug)]
pub struct BeamPoint {
    pub phase: C64,
    pub grad: CVec3,
    pub amp: CVec3,
    pub chi: f64,
}

impl StraightBeam {
    pub fn new(
        p: &PointModuli,
        x0: Vector3<f64>,
        dir: &Vector3<f64>,
        amplitude: BeamAmplitude,
        delta: f64,
    ) -> Result<Self> {
        if dir.norm() == 0.0 || !(delta > 0.0) {
            return Err(Error::InvalidInput(
                "need a nonzero direction and a positive tube radius".into(),
            ));
        }
        let mode = match amplitude {
            BeamAmplitude::S { .. } => WaveMode::S,
            BeamAmplitude::P { .. } => WaveMode::P,
        };
        let dir = dir.normalize();
        let (e2, e3) = orthonormal_complement(&dir);
        Ok(StraightBeam {
            c: p.wavespeed(mode),
            rho: p.rho,
            x0,
            dir,
            e2,
            e3,
            amplitude,
            delta,
        })
    }

    pub fn at(&self, t: f64, x: &Vector3<f64>) -> BeamPoint {
        let c = self.c;
        let y = x - self.x0;
        let (s, y2, y3) = (y.dot(&self.dir) / c, y.dot(&self.e2) / c, y.dot(&self.e3) / c);
        let tau = (t + s) * FRAC_1_SQRT_2;
        let r = (s - t) * FRAC_1_SQRT_2;
        let q = C64::new(1.0, 2.0 * tau);
        let i = C64::i();
        let yy = y2 * y2 + y3 * y3;
        let phase = r + i * (r * r) + i * yy / q;
        let phi_r = C64::new(1.0, 2.0 * r);
        let phi_tau = 2.0 * yy / (q * q);
        let phi_s = (phi_tau + phi_r) * FRAC_1_SQRT_2;
        let cv = |v: &Vector3<f64>| v.map(|a| C64::new(a, 0.0));
        let grad = (cv(&self.dir) * phi_s + cv(&self.e2) * (2.0 * i * y2 / q) + cv(&self.e3) * (2.0 * i * y3 / q))
            / C64::new(c, 0.0);
        let n = q.inv() / (c * self.rho).sqrt();
        let amp = match self.amplitude {
            BeamAmplitude::S { c2, c3 } => {
                let a = (cv(&self.e2) * c2 + cv(&self.e3) * c3) * (n / c);
                a - grad * (a.dot(&grad) / grad.dot(&grad))
            }
            BeamAmplitude::P { c: k } => grad * (k * n),
        };
        let z = (r * r + yy).sqrt();
        BeamPoint {
            phase,
            grad,
            amp,
            chi: cutoff(z / self.delta),
        }
    }

    pub fn evaluate(&self, t: f64, x: &Vector3<f64>, varrho: f64) -> CVec3 {
        let b = self.at(t, x);
        if b.chi == 0.0 {
            return CVec3::zeros();
        }
        b.amp * ((C64::i() * varrho * b.phase).exp() * b.chi)
    }
}

/// Two S beams and one time-reversed P beam whose covectors cancel at
/// `(0, x0)`: beam 1 runs along `−ξ⁽¹⁾` with frequency weight `√2 a c_S`,
/// beam 2 along `ξ⁽²⁾` with `√2 (c_P − a c_S)`, and the P beam is the
/// complex conjugate of a beam along `ξ⁽⁰⁾` with weight `√2 c_P`.
#[derive(Clone, Debug)]
pub struct SspBeams {
    pub beams: [StraightBeam; 3],
    pub weights: [f64; 3],
    pub moduli: PointModuli,
    pub x0: Vector3<f64>,
}

impl SspBeams {
    pub fn new(cfg: &InteractionConfig, p: &PointModuli, x0: Vector3<f64>, delta: f64) -> Result<Self> {
        cfg.validate()?;
        let (cp, cs) = (p.c_p(), p.c_s());
        if (cp - cfg.c_p).abs() > 1e-10 * cp || (cs - cfg.c_s).abs() > 1e-10 * cs {
            return Err(Error::ConfigMismatch(
                "moduli do not reproduce the configuration wavespeeds".into(),
            ));
        }
        let d = &cfg.dirs;
        let s_amp = |dir: &Vector3<f64>, alpha: &Vector3<f64>| -> Result<StraightBeam> {
            let (e2, e3) = orthonormal_complement(&dir.normalize());
            let amp = BeamAmplitude::S {
                c2: C64::new(alpha.dot(&e2), 0.0),
                c3: C64::new(alpha.dot(&e3), 0.0),
            };
            StraightBeam::new(p, x0, dir, amp, delta)
        };
        let b1 = s_amp(&-d.xi1, &cfg.alpha1)?;
        let b2 = s_amp(&d.xi2_unit, &cfg.alpha2)?;
        let b0 = StraightBeam::new(p, x0, &d.xi0, BeamAmplitude::P { c: C64::new(1.0, 0.0) }, delta)?;
        Ok(SspBeams {
            beams: [b1, b2, b0],
            weights: [SQRT_2 * d.a * cs, SQRT_2 * (cp - d.a * cs), SQRT_2 * cp],
            moduli: *p,
            x0,
        })
    }

    /// Total phase `Θ` and integrand factor `χ₁χ₂χ₀ 𝒢(...)` at `(t, x)`,
    /// using leading-order gradients `a ⊗ ∇θ`.
    fn integrand_parts(&self, t: f64, x: &Vector3<f64>) -> (C64, C64) {
        let [b1, b2, b0] = self.beams.map(|b| b.at(t, x));
        let [w1, w2, w0] = self.weights;
        let theta = b1.phase * w1 + b2.phase * w2 - b0.phase.conj() * w0;
        let chi = b1.chi * b2.chi * b0.chi;
        if chi == 0.0 {
            return (theta, C64::new(0.0, 0.0));
        }
        let g1 = rank_one(&b1.amp, &(b1.grad * C64::new(w1, 0.0)));
        let g2 = rank_one(&b2.amp, &(b2.grad * C64::new(w2, 0.0)));
        let g0 = rank_one(
            &b0.amp.map(|v| v.conj()),
            &(b0.grad.map(|v| -v.conj()) * C64::new(w0, 0.0)),
        );
        (theta, interaction_density(&g1, &g2, &g0, &self.moduli) * chi)
    }

    pub fn total_phase(&self, t: f64, x: &Vector3<f64>) -> C64 {
        self.integrand_parts(t, x).0
    }

    /// Leading integrand factor at the stationary point.
    pub fn density_at_center(&self) -> C64 {
        self.integrand_parts(0.0, &self.x0).1
    }

    /// Hessian of `Θ` in `(t, x)` at the stationary point.
    pub fn phase_hessian(&self) -> Matrix4<C64> {
        let h = 1e-3;
        let f = |v: Vector4<f64>| self.total_phase(v[0], &(self.x0 + Vector3::new(v[1], v[2], v[3])));
        let e = |i: usize| Vector4::from_fn(|k, _| if k == i { h } else { 0.0 });
        Matrix4::from_fn(|i, j| {
            let (a, b) = (e(i), e(j));
            (f(a + b) - f(a - b) - f(b - a) + f(-a - b)) / (4.0 * h * h)
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureOptions {
    pub nodes: usize,
    /// Half-width of the box in whitened coordinates.
    pub half_width: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            nodes: 32,
            half_width: 6.5,
        }
    }
}

/// `J(ϱ) = ϱ² ∫∫ e^{iϱΘ} χ₁χ₂χ₀ 𝒢 dx dt`.
pub fn interaction_integral(beams: &SspBeams, varrho: f64, opts: &QuadratureOptions) -> Result<C64> {
    if !(varrho > 0.0) {
        return Err(Error::InvalidInput("frequency must be positive".into()));
    }
    if opts.nodes == 0 || opts.nodes > 128 {
        return Err(Error::QuadratureBudget(format!("{} nodes per dimension", opts.nodes)));
    }
    let hess = beams.phase_hessian();
    let im = hess.map(|v| v.im);
    let eig = SymmetricEigen::new((im + im.transpose()) * 0.5);
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Singular("phase Hessian has no positive imaginary part".into()));
    }
    // X = V Λ^{-1/2} Y whitens Im Θ''; (t, x) = X / √ϱ.
    let map = eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(|l| l.powf(-0.5)));
    let jac = map.determinant().abs();
    let l = opts.half_width;
    let rule: Vec<(f64, f64)> = GaussLegendre::new(NonZeroUsize::new(opts.nodes).unwrap())
        .as_node_weight_pairs()
        .iter()
        .map(|&(u, w)| (u * l, w * l))
        .collect();
    let scale = 1.0 / varrho.sqrt();
    let total: C64 = rule
        .par_iter()
        .map(|&(y0, w0)| {
            let mut acc = C64::new(0.0, 0.0);
            for &(y1, w1) in &rule {
                for &(y2, w2) in &rule {
                    for &(y3, w3) in &rule {
                        let p = map * Vector4::new(y0, y1, y2, y3) * scale;
                        let (theta, g) = beams.integrand_parts(p[0], &(beams.x0 + Vector3::new(p[1], p[2], p[3])));
                        if g.norm() != 0.0 {
                            acc += (C64::i() * varrho * theta).exp() * g * (w0 * w1 * w2 * w3);
                        }
                    }
                }
            }
            acc
        })
        .sum();
    Ok(total * jac)
}

/// Least-squares fit `J(ϱ) ≈ L + c₁/ϱ`.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyFit {
    pub varrho: Vec<f64>,
    pub values: Vec<C64>,
    pub limit: C64,
    pub c1: C64,
    /// Largest fit residual.
    pub residual: f64,
}

pub fn fit_inverse_frequency(varrho: &[f64], values: &[C64]) -> Result<FrequencyFit> {
    if varrho.len() != values.len() || varrho.len() < 2 {
        return Err(Error::InvalidInput("need at least two frequencies".into()));
    }
    let n = varrho.len();
    let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { 1.0 / varrho[i] });
    let svd = a.clone().svd(true, true);
    let solve =
        |b: DVector<f64>| -> Result<DVector<f64>> { svd.solve(&b, 1e-14).map_err(|e| Error::Singular(e.into())) };
    let re = solve(DVector::from_iterator(n, values.iter().map(|v| v.re)))?;
    let im = solve(DVector::from_iterator(n, values.iter().map(|v| v.im)))?;
    let limit = C64::new(re[0], im[0]);
    let c1 = C64::new(re[1], im[1]);
    let residual = varrho
        .iter()
        .zip(values)
        .map(|(r, v)| (v - limit - c1 / r).norm())
        .fold(0.0, f64::max);
    Ok(FrequencyFit {
        varrho: varrho.to_vec(),
        values: values.to_vec(),
        limit,
        c1,
        residual,
    })
}

/// Evaluates `J(ϱ)` over a frequency sweep and fits `L + c₁/ϱ`.
pub fn oscillatory_interaction_integral(
    beams: &SspBeams,
    varrho: &[f64],
    opts: &QuadratureOptions,
) -> Result<FrequencyFit> {
    let values = varrho
        .iter()
        .map(|&r| interaction_integral(beams, r, opts))
        .collect::<Result<Vec<_>>>()?;
    fit_inverse_frequency(varrho, &values)
}
