//! Leading-order Gaussian beams `u = χ(|z′|/δ) a e^{iϱφ}` with
//! `φ = r + z′·H z′`.

use crate::error::{Error, Result};
use crate::geodesics::{trace_geodesic, FermiChart, TraceOptions};
use crate::medium::{IsotropicMedium, WaveMode};
use crate::riccati::{default_h0, evolve_along_ray, identity_y0, RiccatiEvolution, C64};
use crate::ConvexDomain;
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

pub type CVec3 = Vector3<C64>;

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Smooth cutoff: 1 for `|t| ≤ 1/4`, 0 for `|t| ≥ 1/2`, built from
/// `e^{-1/x}`.
pub fn cutoff(t: f64) -> f64 {
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let u = 4.0 * (0.5 - t.abs());
    if u >= 1.0 {
        return 1.0;
    }
    if u <= 0.0 {
        return 0.0;
    }
    psi(u) / (psi(u) + psi(1.0 - u))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BeamAmplitude {
    /// Constants `(c₂, c₃)` for the transverse components.
    S { c2: C64, c3: C64 },
    /// Constant `c` multiplying the longitudinal amplitude.
    P { c: C64 },
}

/// `det(Y)^{-1/2} c^{-1/2} ρ^{-1/2}` at `τ` on the axis.
fn scalar_factor(chart: &FermiChart, ric: &RiccatiEvolution, tau: f64) -> Result<C64> {
    let q = ric.at(tau)?;
    if q.y.determinant().norm() < 1e-300 {
        return Err(Error::Singular(format!("det Y vanishes at tau = {tau}")));
    }
    let x = chart.path.point_at(tau / SQRT_2)?;
    let m = chart.path.medium();
    let c = m.wavespeed(&x, chart.mode())?;
    let rho = m.rho.value(&x)?;
    Ok(crate::riccati::det_inv_sqrt_of(&q) / (c * rho).sqrt())
}

/// On-axis transverse amplitudes `(a₀₂, a₀₃)` of an S beam.
pub fn s_amplitude(chart: &FermiChart, ric: &RiccatiEvolution, c2: C64, c3: C64, tau: f64) -> Result<(C64, C64)> {
    if chart.mode() != WaveMode::S {
        return Err(Error::InvalidInput("s_amplitude needs an S-wave chart".into()));
    }
    let f = scalar_factor(chart, ric, tau)?;
    Ok((c2 * f, c3 * f))
}

/// On-axis longitudinal amplitude `A_P` of a P beam.
pub fn p_amplitude(chart: &FermiChart, ric: &RiccatiEvolution, c: C64, tau: f64) -> Result<C64> {
    if chart.mode() != WaveMode::P {
        return Err(Error::InvalidInput("p_amplitude needs a P-wave chart".into()));
    }
    Ok(c * scalar_factor(chart, ric, tau)?)
}

#[derive(Clone, Debug)]
pub struct GaussianBeam {
    pub chart: FermiChart,
    pub riccati: RiccatiEvolution,
    pub amplitude: BeamAmplitude,
    c_max: f64,
    spacing: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct AxisAmplitude {
    pub tau: f64,
    /// `(a₀₂, a₀₃)` for S beams, `(A_P, 0)` for P beams.
    pub scalars: [C64; 2],
    /// Cartesian amplitude vector on the axis.
    pub vector: CVec3,
}

impl GaussianBeam {
    pub fn new(chart: FermiChart, riccati: RiccatiEvolution, amplitude: BeamAmplitude) -> Result<Self> {
        let ok = matches!(
            (chart.mode(), amplitude),
            (WaveMode::S, BeamAmplitude::S { .. }) | (WaveMode::P, BeamAmplitude::P { .. })
        );
        if !ok {
            return Err(Error::InvalidInput(
                "amplitude kind does not match the wave mode".into(),
            ));
        }
        let path = &chart.path;
        let mut c_max: f64 = 0.0;
        let mut spacing: f64 = 0.0;
        for w in path.samples.windows(2) {
            spacing = spacing.max((w[1].position() - w[0].position()).norm());
        }
        for q in &path.samples {
            c_max = c_max.max(path.medium().wavespeed(&q.position(), path.mode)?);
        }
        Ok(GaussianBeam {
            chart,
            riccati,
            amplitude,
            c_max,
            spacing,
        })
    }

    /// Traces the ray, builds the default chart and the Riccati data with
    /// `Y₀ = I`, `H₀ = iI`, anchored at `x0` (τ = 0).
    pub fn build(
        m: &IsotropicMedium,
        x0: &Vector3<f64>,
        dir: &Vector3<f64>,
        dom: &ConvexDomain,
        t0: f64,
        amplitude: BeamAmplitude,
        delta: Option<f64>,
    ) -> Result<Self> {
        let mode = match amplitude {
            BeamAmplitude::S { .. } => WaveMode::S,
            BeamAmplitude::P { .. } => WaveMode::P,
        };
        let path = trace_geodesic(m, mode, x0, dir, dom, t0, &TraceOptions::default())?;
        let e0 = crate::geodesics::default_frame(&path)?;
        let chart = FermiChart::with_frame(path, e0, delta)?;
        let ric = evolve_along_ray(&chart, identity_y0(), default_h0())?;
        Self::new(chart, ric, amplitude)
    }

    pub fn mode(&self) -> WaveMode {
        self.chart.mode()
    }

    pub fn delta(&self) -> f64 {
        self.chart.delta
    }

    pub fn axis_amplitude(&self, tau: f64) -> Result<AxisAmplitude> {
        let s = tau / SQRT_2;
        let a = self.chart.axis_at(s)?;
        let c = self.chart.path.medium().wavespeed(&a.x, self.mode())?;
        let (scalars, vector) = match self.amplitude {
            BeamAmplitude::S { c2, c3 } => {
                let (a2, a3) = s_amplitude(&self.chart, &self.riccati, c2, c3, tau)?;
                let v = (a.e2.map(re) * a2 + a.e3.map(re) * a3) / re(c * c);
                ([a2, a3], v)
            }
            BeamAmplitude::P { c: k } => {
                let ap = p_amplitude(&self.chart, &self.riccati, k, tau)?;
                ([ap, re(0.0)], a.v.map(re) * ap / re(c * c))
            }
        };
        Ok(AxisAmplitude { tau, scalars, vector })
    }

    /// Phase `φ` and its Cartesian gradient at chart coordinates.
    fn phase_and_gradient(&self, z: [f64; 4]) -> Result<(C64, CVec3)> {
        let (tau, r, y2, y3) = (z[0], z[1], z[2], z[3]);
        let q = self.riccati.at(tau)?;
        let h = q.h()?;
        let cm = crate::riccati::c_matrix().map(re);
        let dh = -(h * cm * h) - self.riccati.d_at(tau)?.map(re);
        let zv = Vector3::new(r, y2, y3).map(re);
        let hz = h * zv;
        let phi = re(r) + zv.dot(&hz);
        let phi_tau = zv.dot(&(dh * zv));
        let phi_r = re(1.0) + hz[0] * 2.0;
        let phi_s = (phi_tau + phi_r) * FRAC_1_SQRT_2;
        let s = (tau + r) * FRAC_1_SQRT_2;
        let f = |ds: f64, a: f64, b: f64| self.chart.forward_spatial(s + ds, y2 + a, y3 + b);
        let e = 1e-6;
        let jac = Matrix3::from_columns(&[
            (f(e, 0.0, 0.0)? - f(-e, 0.0, 0.0)?) / (2.0 * e),
            (f(0.0, e, 0.0)? - f(0.0, -e, 0.0)?) / (2.0 * e),
            (f(0.0, 0.0, e)? - f(0.0, 0.0, -e)?) / (2.0 * e),
        ]);
        let jit = jac
            .try_inverse()
            .ok_or_else(|| Error::ChartInversion("degenerate chart Jacobian".into()))?
            .transpose()
            .map(re);
        Ok((phi, jit * Vector3::new(phi_s, hz[1] * 2.0, hz[2] * 2.0)))
    }

    /// Amplitude vector at a point with chart coordinates `z`: the axis
    /// amplitude, with the polarization held transverse (S) or parallel (P)
    /// to the local complex phase gradient.
    pub fn amplitude_vector(&self, z: [f64; 4]) -> Result<(C64, CVec3)> {
        let ax = self.axis_amplitude(z[0])?;
        let (phi, g) = self.phase_and_gradient(z)?;
        let vec = match self.amplitude {
            BeamAmplitude::S { .. } => {
                let gg = g.dot(&g);
                ax.vector - g * (ax.vector.dot(&g) / gg)
            }
            BeamAmplitude::P { .. } => g * ax.scalars[0],
        };
        Ok((phi, vec))
    }

    /// Beam displacement at `(t, x)`. Zero outside the tube `|z′| < δ/2`
    /// and outside the traced parameter range.
    pub fn evaluate(&self, t: f64, x: &Vector3<f64>, varrho: f64) -> Result<CVec3> {
        let zero = CVec3::zeros();
        let dmin = self
            .chart
            .path
            .samples
            .iter()
            .map(|q| (q.position() - x).norm())
            .fold(f64::INFINITY, f64::min);
        if dmin > self.delta() * self.c_max + self.spacing {
            return Ok(zero);
        }
        let (s, y2, y3) = self.chart.inverse_spatial(x)?;
        let z = self.chart.rotate(t, s, y2, y3);
        let n = (z[1] * z[1] + z[2] * z[2] + z[3] * z[3]).sqrt();
        if n >= 0.5 * self.delta() {
            return Ok(zero);
        }
        let (lo, hi) = self.riccati.tau_range();
        let (plo, phi_) = self.chart.path.s_range();
        if z[0] < lo || z[0] > hi || s < plo || s > phi_ || z[0] / SQRT_2 < plo || z[0] / SQRT_2 > phi_ {
            return Ok(zero);
        }
        let (phase, a) = self.amplitude_vector(z)?;
        let w = (C64::new(0.0, varrho) * phase).exp() * cutoff(n / self.delta());
        Ok(a * w)
    }

    /// Finite-difference residual of `𝒯a = 0` at `τ`, relative to `|a|`,
    /// with `𝒯 = 2∂_τ + [κ′/κ − c′/c + det′Y/det Y]` and `κ = μ` (S) or
    /// `λ + 2μ` (P).
    pub fn transport_residual(&self, tau: f64, h: f64) -> Result<f64> {
        let m = self.chart.path.medium();
        let mode = self.mode();
        let eval = |t: f64| -> Result<(C64, f64, f64, C64)> {
            let x = self.chart.path.point_at(t / SQRT_2)?;
            let p = m.moduli_at(&x)?;
            let kappa = match mode {
                WaveMode::S => p.mu,
                WaveMode::P => p.lambda + 2.0 * p.mu,
            };
            let c = m.wavespeed(&x, mode)?;
            let det = self.riccati.at(t)?.y.determinant();
            let ax = self.axis_amplitude(t)?;
            let a = match self.amplitude {
                BeamAmplitude::S { c2, .. } if c2 != re(0.0) => ax.scalars[0],
                BeamAmplitude::S { .. } => ax.scalars[1],
                BeamAmplitude::P { .. } => ax.scalars[0],
            };
            Ok((a, kappa, c, det))
        };
        let pts: Vec<(C64, f64, f64, C64)> = [-2.0, -1.0, 1.0, 2.0]
            .iter()
            .map(|k| eval(tau + k * h))
            .collect::<Result<_>>()?;
        let d = |f: &dyn Fn(&(C64, f64, f64, C64)) -> C64| -> C64 {
            (f(&pts[0]) - f(&pts[1]) * 8.0 + f(&pts[2]) * 8.0 - f(&pts[3])) / (12.0 * h)
        };
        let (a, kappa, c, det) = eval(tau)?;
        let da = d(&|p| p.0);
        let dk = d(&|p| re(p.1)).re;
        let dc = d(&|p| re(p.2)).re;
        let ddet = d(&|p| p.3);
        let res = da * 2.0 + a * (re(dk / kappa - dc / c) + ddet / det);
        Ok(if a.norm() > 0.0 {
            res.norm() / a.norm()
        } else {
            res.norm()
        })
    }
}

/// `ρ ∂²_t u − ∇·S^L(u)` at `(t, x)` by fourth-order central differences
/// with step `h`, where `S^L(u) = λ (∇·u) I + μ (∇u + ∇uᵀ)`.
pub fn elastic_operator_fd<F>(u: F, m: &IsotropicMedium, t: f64, x: &Vector3<f64>, h: f64) -> Result<CVec3>
where
    F: Fn(f64, &Vector3<f64>) -> Result<CVec3>,
{
    let w1 = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let at = |dt: f64, dx: Vector3<f64>| u(t + dt, &(x + dx));
    let e = |i: usize| {
        let mut v = Vector3::zeros();
        v[i] = h;
        v
    };
    let u0 = at(0.0, Vector3::zeros())?;
    // grad[i][j] = ∂_j u_i, hess[j][k] = ∂_j ∂_k u
    let mut grad = [[re(0.0); 3]; 3];
    let mut hess = [[CVec3::zeros(); 3]; 3];
    for j in 0..3 {
        let f = [
            at(0.0, e(j) * -2.0)?,
            at(0.0, e(j) * -1.0)?,
            at(0.0, e(j))?,
            at(0.0, e(j) * 2.0)?,
        ];
        let d1 = (f[0] - f[1] * re(8.0) + f[2] * re(8.0) - f[3]) / re(12.0 * h);
        let d2 = (-f[0] + f[1] * re(16.0) - u0 * re(30.0) + f[2] * re(16.0) - f[3]) / re(12.0 * h * h);
        for i in 0..3 {
            grad[i][j] = d1[i];
        }
        hess[j][j] = d2;
        for k in 0..j {
            let mut acc = CVec3::zeros();
            for (a, wa) in w1 {
                for (b, wb) in w1 {
                    acc += at(0.0, e(j) * a + e(k) * b)? * re(wa * wb);
                }
            }
            let v = acc / re(144.0 * h * h);
            hess[j][k] = v;
            hess[k][j] = v;
        }
    }
    let ft = [
        at(-2.0 * h, Vector3::zeros())?,
        at(-h, Vector3::zeros())?,
        at(h, Vector3::zeros())?,
        at(2.0 * h, Vector3::zeros())?,
    ];
    let utt = (-ft[0] + ft[1] * re(16.0) - u0 * re(30.0) + ft[2] * re(16.0) - ft[3]) / re(12.0 * h * h);

    let lj = m.lambda.jet(x)?;
    let mj = m.mu.jet(x)?;
    let rho = m.rho.value(x)?;
    let div: C64 = (0..3).map(|i| grad[i][i]).sum();
    let mut out = CVec3::zeros();
    for i in 0..3 {
        let grad_div: C64 = (0..3).map(|k| hess[i][k][k]).sum();
        let lap: C64 = (0..3).map(|j| hess[j][j][i]).sum();
        let mut divs = re(lj.grad[i]) * div + re(lj.value) * grad_div + re(mj.value) * (lap + grad_div);
        for j in 0..3 {
            divs += re(mj.grad[j]) * (grad[i][j] + grad[j][i]);
        }
        out[i] = utt[i] * rho - divs;
    }
    Ok(out)
}

/// `max |𝓛u| / (ϱ · max |u|)` over the sample points.
pub fn pde_residual(beam: &GaussianBeam, varrho: f64, samples: &[(f64, Vector3<f64>)], h: f64) -> Result<f64> {
    let m = beam.chart.path.medium();
    let mut rmax: f64 = 0.0;
    let mut umax: f64 = 0.0;
    for (t, x) in samples {
        let lu = elastic_operator_fd(|t, x| beam.evaluate(t, x, varrho), m, *t, x, h)?;
        rmax = rmax.max(lu.norm());
        umax = umax.max(beam.evaluate(*t, x, varrho)?.norm());
    }
    if umax == 0.0 {
        return Ok(0.0);
    }
    Ok(rmax / (varrho * umax))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_plateau_and_support() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(0.25), 1.0);
        assert_eq!(cutoff(-0.2), 1.0);
        assert_eq!(cutoff(0.5), 0.0);
        assert_eq!(cutoff(0.7), 0.0);
        let mut prev = 1.0;
        for k in 1..100 {
            let v = cutoff(0.25 + 0.25 * k as f64 / 100.0);
            assert!(v <= prev && v > 0.0);
            prev = v;
        }
        assert!((cutoff(0.375) - 0.5).abs() < 1e-15);
    }
}
