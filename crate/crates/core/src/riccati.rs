//! The quadratic phase of a Gaussian beam: `H = Z Y⁻¹` with
//! `Y′ = C Z`, `Z′ = −D Y`, `C = diag(0, 2, 2)`, so that
//! `H′ + H C H + D = 0`.

use crate::error::{Error, Result};
use crate::geodesics::{d_from_jet, frame_rhs, put, renormalize, v3, AxisFrame, FermiChart};
use crate::ode::{integrate, OdeOptions};
use nalgebra::{Complex, Matrix3, SymmetricEigen};
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

pub type C64 = Complex<f64>;
pub type CMat3 = Matrix3<C64>;
pub type DFn = Arc<dyn Fn(f64) -> Result<Matrix3<f64>> + Send + Sync>;

pub fn c_matrix() -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, 2.0, 2.0))
}

fn pack(y: &CMat3, z: &CMat3, out: &mut [f64]) {
    for k in 0..9 {
        out[2 * k] = y[k].re;
        out[2 * k + 1] = y[k].im;
        out[18 + 2 * k] = z[k].re;
        out[18 + 2 * k + 1] = z[k].im;
    }
}

fn unpack(a: &[f64]) -> (CMat3, CMat3) {
    let y = CMat3::from_fn(|i, j| {
        let k = i + 3 * j;
        C64::new(a[2 * k], a[2 * k + 1])
    });
    let z = CMat3::from_fn(|i, j| {
        let k = i + 3 * j;
        C64::new(a[18 + 2 * k], a[18 + 2 * k + 1])
    });
    (y, z)
}

fn yz_rhs(y: &CMat3, z: &CMat3, d: &Matrix3<f64>, scale: f64, out: &mut [f64]) {
    let c = c_matrix().map(|v| C64::new(v * scale, 0.0));
    let dc = d.map(|v| C64::new(-v * scale, 0.0));
    pack(&(c * z), &(dc * y), out);
}

/// `det(Im H) |det Y|²`.
pub fn conserved_quantity(y: &CMat3, z: &CMat3) -> Result<f64> {
    let h = phase_hessian(y, z)?;
    Ok(h.map(|v| v.im).determinant() * y.determinant().norm_sqr())
}

pub fn phase_hessian(y: &CMat3, z: &CMat3) -> Result<CMat3> {
    let yi = y
        .try_inverse()
        .ok_or_else(|| Error::Singular("Y is not invertible".into()))?;
    Ok(z * yi)
}

fn min_eig(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(0.5 * (m + m.transpose())).eigenvalues.min()
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[derive(Clone, Debug)]
pub struct RiccatiSample {
    pub tau: f64,
    pub y: CMat3,
    pub z: CMat3,
    /// Continuous branch of `arg det Y`.
    pub det_arg: f64,
}

impl RiccatiSample {
    pub fn h(&self) -> Result<CMat3> {
        phase_hessian(&self.y, &self.z)
    }
}

#[derive(Clone)]
pub struct RiccatiEvolution {
    pub tau0: f64,
    pub samples: Vec<RiccatiSample>,
    /// Value of `det(Im H)|det Y|²` at `tau0`.
    pub c0: f64,
    d: DFn,
    ode: OdeOptions,
}

impl std::fmt::Debug for RiccatiEvolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RiccatiEvolution")
            .field("tau0", &self.tau0)
            .field("samples", &self.samples.len())
            .field("c0", &self.c0)
            .finish()
    }
}

fn check_initial(y0: &CMat3, h0: &CMat3) -> Result<()> {
    if y0.determinant().norm() < 1e-14 {
        return Err(Error::InvalidInput("Y0 must be nonsingular".into()));
    }
    if (h0 - h0.transpose()).norm() > 1e-12 * h0.norm().max(1.0) {
        return Err(Error::InvalidInput("H0 must be symmetric".into()));
    }
    let me = min_eig(&h0.map(|v| v.im));
    if !(me > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Im H0 must be positive definite (min eigenvalue {me:.3e})"
        )));
    }
    Ok(())
}

impl RiccatiEvolution {
    fn finish(tau0: f64, mut raw: Vec<(f64, CMat3, CMat3)>, d: DFn, ode: OdeOptions) -> Result<Self> {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        raw.dedup_by(|a, b| a.0 == b.0);
        let k0 = raw
            .iter()
            .position(|r| r.0 == tau0)
            .ok_or_else(|| Error::InvalidInput("missing initial sample".into()))?;
        let dets: Vec<C64> = raw.iter().map(|r| r.1.determinant()).collect();
        let mut args = vec![0.0; raw.len()];
        args[k0] = dets[k0].arg();
        let step = |from: usize, to: usize, args: &mut Vec<f64>| -> Result<()> {
            let jump = wrap(dets[to].arg() - dets[from].arg());
            if jump.abs() > 0.5 * PI {
                return Err(Error::InvalidInput(format!(
                    "arg det Y jumps by {jump:.3} between tau = {} and {}; reduce the step size",
                    raw[from].0, raw[to].0
                )));
            }
            args[to] = args[from] + jump;
            Ok(())
        };
        for k in k0 + 1..raw.len() {
            step(k - 1, k, &mut args)?;
        }
        for k in (0..k0).rev() {
            step(k + 1, k, &mut args)?;
        }
        let mut samples = Vec::with_capacity(raw.len());
        for ((tau, y, z), det_arg) in raw.into_iter().zip(args) {
            let h = phase_hessian(&y, &z)?;
            let me = min_eig(&h.map(|v| v.im));
            if !(me > 0.0) {
                return Err(Error::PositivityLost { tau, min_eig: me });
            }
            samples.push(RiccatiSample { tau, y, z, det_arg });
        }
        let c0 = conserved_quantity(&samples[k0].y, &samples[k0].z)?;
        Ok(RiccatiEvolution {
            tau0,
            samples,
            c0,
            d,
            ode,
        })
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.samples[0].tau, self.samples[self.samples.len() - 1].tau)
    }

    pub fn d_at(&self, tau: f64) -> Result<Matrix3<f64>> {
        (self.d)(tau)
    }

    fn nearest(&self, tau: f64) -> Result<usize> {
        let (lo, hi) = self.tau_range();
        let slack = 1e-9 * (hi - lo).max(1.0);
        if !(tau >= lo - slack && tau <= hi + slack) {
            return Err(Error::OutsidePath(tau));
        }
        let i = self.samples.partition_point(|q| q.tau < tau);
        Ok(if i == 0 {
            0
        } else if i == self.samples.len() || tau - self.samples[i - 1].tau < self.samples[i].tau - tau {
            i - 1
        } else {
            i
        })
    }

    /// `(Y, Z)` at an arbitrary `tau`, re-integrated from the nearest sample.
    pub fn at(&self, tau: f64) -> Result<RiccatiSample> {
        let k = self.nearest(tau)?;
        let q = &self.samples[k];
        if q.tau == tau {
            return Ok(q.clone());
        }
        let mut y0 = [0.0; 36];
        pack(&q.y, &q.z, &mut y0);
        let d = &self.d;
        let (_, yend) = integrate(
            |t, s: &[f64; 36]| {
                let (y, z) = unpack(s);
                let mut out = [0.0; 36];
                yz_rhs(&y, &z, &d(t)?, 1.0, &mut out);
                Ok(out)
            },
            q.tau,
            y0,
            tau,
            &self.ode,
            |_, _| Ok(true),
        )?;
        let (y, z) = unpack(&yend);
        let det_arg = q.det_arg + wrap(y.determinant().arg() - q.y.determinant().arg());
        Ok(RiccatiSample { tau, y, z, det_arg })
    }

    /// `det(Y)^{-1/2}` on the branch continued from the principal value at
    /// `tau0`.
    pub fn det_inv_sqrt(&self, tau: f64) -> Result<C64> {
        let q = self.at(tau)?;
        Ok(det_inv_sqrt_of(&q))
    }

    pub fn max_conservation_drift(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for q in &self.samples {
            let v = conserved_quantity(&q.y, &q.z)?;
            worst = worst.max(((v - self.c0) / self.c0).abs());
        }
        Ok(worst)
    }

    pub fn max_asymmetry(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for q in &self.samples {
            let h = q.h()?;
            worst = worst.max((h - h.transpose()).norm() / h.norm());
        }
        Ok(worst)
    }

    pub fn min_imag_eigenvalue(&self) -> Result<f64> {
        let mut best = f64::INFINITY;
        for q in &self.samples {
            best = best.min(min_eig(&q.h()?.map(|v| v.im)));
        }
        Ok(best)
    }

    /// Largest condition number of `Y` over the samples.
    pub fn max_condition(&self) -> f64 {
        self.samples
            .iter()
            .map(|q| {
                let sv = q.y.svd(false, false).singular_values;
                sv.max() / sv.min()
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn det_inv_sqrt_of(q: &RiccatiSample) -> C64 {
    let r = q.y.determinant().norm();
    C64::from_polar(r.powf(-0.5), -0.5 * q.det_arg)
}

/// Integrates the Y/Z system with a caller-supplied `D(τ)` over
/// `[interval.0, interval.1]` starting at `tau0`.
pub fn evolve_yz(
    d: DFn,
    y0: CMat3,
    h0: CMat3,
    interval: (f64, f64),
    tau0: f64,
    ode: &OdeOptions,
) -> Result<RiccatiEvolution> {
    check_initial(&y0, &h0)?;
    let (a, b) = interval;
    if !(a <= tau0 && tau0 <= b) {
        return Err(Error::InvalidInput("tau0 must lie in the interval".into()));
    }
    let mut ode = *ode;
    if !ode.h_max.is_finite() {
        ode.h_max = ((b - a) / 200.0).max(1e-6);
    }
    let z0 = h0 * y0;
    let mut s0 = [0.0; 36];
    pack(&y0, &z0, &mut s0);
    let mut raw = vec![(tau0, y0, z0)];
    for end in [b, a] {
        let dd = &d;
        integrate(
            |t, s: &[f64; 36]| {
                let (y, z) = unpack(s);
                let mut out = [0.0; 36];
                yz_rhs(&y, &z, &dd(t)?, 1.0, &mut out);
                Ok(out)
            },
            tau0,
            s0,
            end,
            &ode,
            |t, s| {
                let (y, z) = unpack(s);
                raw.push((t, y, z));
                Ok(true)
            },
        )?;
    }
    RiccatiEvolution::finish(tau0, raw, d, ode)
}

/// `D(τ)` along the chart's axis, `τ = √2 s`.
pub fn build_d_along_ray(chart: &FermiChart) -> DFn {
    let chart = Arc::new(chart.clone());
    Arc::new(move |tau: f64| chart.d_matrix(tau / SQRT_2))
}

/// Evolves `(Y, Z)` over the whole traced path, integrating the geodesic,
/// the parallel frame and the Y/Z system together in arclength.
pub fn evolve_along_ray(chart: &FermiChart, y0: CMat3, h0: CMat3) -> Result<RiccatiEvolution> {
    check_initial(&y0, &h0)?;
    let path = &chart.path;
    let (m, mode) = (path.medium(), path.mode);
    let anchor = path
        .samples
        .iter()
        .position(|q| q.s == 0.0)
        .ok_or_else(|| Error::InvalidInput("path has no anchor sample".into()))?;
    let mut s0 = [0.0; 48];
    s0[..6].copy_from_slice(&path.samples[anchor].state());
    put(&mut s0, 6, &chart.frame.e[anchor][0]);
    put(&mut s0, 9, &chart.frame.e[anchor][1]);
    let z0 = h0 * y0;
    pack(&y0, &z0, &mut s0[12..]);
    let rhs = |_: f64, s: &[f64; 48]| -> Result<[f64; 48]> {
        let mut g = [0.0; 12];
        g.copy_from_slice(&s[..12]);
        let fr = frame_rhs(m, mode, &g)?;
        let x = v3(s, 0);
        let cj = m.wavespeed_jet(&x, mode)?;
        let axis = AxisFrame {
            x,
            v: v3(s, 3) * (cj.value * cj.value),
            e2: v3(s, 6),
            e3: v3(s, 9),
        };
        let d = d_from_jet(&cj, &axis);
        let (y, z) = unpack(&s[12..]);
        let mut out = [0.0; 48];
        out[..12].copy_from_slice(&fr);
        yz_rhs(&y, &z, &d, SQRT_2, &mut out[12..]);
        Ok(out)
    };
    let mut ode = path.ode;
    let (lo, hi) = path.s_range();
    ode.h_max = ode.h_max.min((hi - lo) / 200.0);
    let mut raw = vec![(0.0, y0, z0)];
    for end in [hi, lo] {
        integrate(rhs, 0.0, s0, end, &ode, |s, st| {
            renormalize(m, mode, &mut st[..6])?;
            let (y, z) = unpack(&st[12..]);
            raw.push((s * SQRT_2, y, z));
            Ok(true)
        })?;
    }
    let tau_ode = OdeOptions {
        h_max: ode.h_max * SQRT_2,
        ..ode
    };
    RiccatiEvolution::finish(0.0, raw, build_d_along_ray(chart), tau_ode)
}

pub fn identity_y0() -> CMat3 {
    CMat3::identity()
}

pub fn default_h0() -> CMat3 {
    CMat3::identity() * C64::new(0.0, 1.0)
}
