//! Unit-speed geodesics of the slowness metric `g = c⁻² dx²`, parallel
//! frames and Fermi coordinates along them.
//!
//! Geodesics are integrated in Hamiltonian form with `H = ½ c²|p|²`:
//! `ẋ = c² p`, `ṗ = −c |p|² ∇c`. After each accepted step the momentum is
//! rescaled so that `c|p| = 1`, which pins `g(ẋ, ẋ) = 1`.

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::medium::{IsotropicMedium, WaveMode};
use crate::ode::{integrate, OdeOptions};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

pub(crate) fn v3(a: &[f64], o: usize) -> Vector3<f64> {
    Vector3::new(a[o], a[o + 1], a[o + 2])
}

pub(crate) fn put(a: &mut [f64], o: usize, v: &Vector3<f64>) {
    a[o] = v.x;
    a[o + 1] = v.y;
    a[o + 2] = v.z;
}

fn geodesic_rhs(m: &IsotropicMedium, mode: WaveMode, y: &[f64]) -> Result<([f64; 6], f64, Vector3<f64>)> {
    let x = v3(y, 0);
    let p = v3(y, 3);
    let cj = m.wavespeed_jet(&x, mode)?;
    let c = cj.value;
    let mut out = [0.0; 6];
    put(&mut out, 0, &(p * (c * c)));
    put(&mut out, 3, &(-cj.grad * (c * p.norm_squared())));
    Ok((out, c, cj.grad))
}

/// Levi-Civita connection of `c⁻² dx²` applied to `(v, w)`.
fn connection(v: &Vector3<f64>, w: &Vector3<f64>, c: f64, grad_c: &Vector3<f64>) -> Vector3<f64> {
    let df = -grad_c / c;
    v * w.dot(&df) + w * v.dot(&df) - df * v.dot(w)
}

pub(crate) fn frame_rhs(m: &IsotropicMedium, mode: WaveMode, y: &[f64; 12]) -> Result<[f64; 12]> {
    let (g, c, grad_c) = geodesic_rhs(m, mode, y)?;
    let v = v3(&g, 0);
    let mut out = [0.0; 12];
    out[..6].copy_from_slice(&g);
    put(&mut out, 6, &-connection(&v, &v3(y, 6), c, &grad_c));
    put(&mut out, 9, &-connection(&v, &v3(y, 9), c, &grad_c));
    Ok(out)
}

pub(crate) fn renormalize(m: &IsotropicMedium, mode: WaveMode, y: &mut [f64]) -> Result<()> {
    let x = v3(y, 0);
    let p = v3(y, 3);
    let c = m.wavespeed(&x, mode)?;
    put(y, 3, &(p / (c * p.norm())));
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub ode: OdeOptions,
    /// Limit on |s| in either direction before trapping is reported.
    pub max_arclength: Option<f64>,
    /// Extension past each boundary crossing as a fraction of the path length.
    pub extension: f64,
    pub boundary_tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            ode: OdeOptions::default(),
            max_arclength: None,
            extension: 0.05,
            boundary_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathSample {
    pub s: f64,
    pub t: f64,
    pub x: [f64; 3],
    pub v: [f64; 3],
    #[serde(skip)]
    p: [f64; 3],
}

impl PathSample {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.x)
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::from(self.v)
    }

    pub(crate) fn state(&self) -> [f64; 6] {
        [self.x[0], self.x[1], self.x[2], self.p[0], self.p[1], self.p[2]]
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundaryEvent {
    pub s: f64,
    pub t: f64,
    pub x: [f64; 3],
    pub v: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub mode: WaveMode,
    pub t0: f64,
    pub samples: Vec<PathSample>,
    pub entry: BoundaryEvent,
    pub exit: BoundaryEvent,
    medium: IsotropicMedium,
    pub(crate) ode: OdeOptions,
}

impl GeodesicPath {
    pub fn medium(&self) -> &IsotropicMedium {
        &self.medium
    }

    /// g-length between the two boundary crossings.
    pub fn length(&self) -> f64 {
        self.exit.s - self.entry.s
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.samples[0].s, self.samples[self.samples.len() - 1].s)
    }

    pub(crate) fn nearest(&self, s: f64) -> Result<usize> {
        let (lo, hi) = self.s_range();
        let slack = 1e-9 * (hi - lo).max(1.0);
        if !(s >= lo - slack && s <= hi + slack) {
            return Err(Error::OutsidePath(s));
        }
        let i = self.samples.partition_point(|q| q.s < s);
        Ok(if i == 0 {
            0
        } else if i == self.samples.len() {
            i - 1
        } else if (self.samples[i].s - s) < (s - self.samples[i - 1].s) {
            i
        } else {
            i - 1
        })
    }

    /// Position and momentum at arclength `s`, re-integrated from the
    /// nearest stored sample.
    pub fn state_at(&self, s: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let k = self.nearest(s)?;
        let smp = &self.samples[k];
        let (m, mode) = (&self.medium, self.mode);
        let (_, y) = integrate(
            |_, y: &[f64; 6]| geodesic_rhs(m, mode, y).map(|r| r.0),
            smp.s,
            smp.state(),
            s,
            &self.ode,
            |_, y| renormalize(m, mode, y).map(|_| true),
        )?;
        Ok((v3(&y, 0), v3(&y, 3)))
    }

    pub fn point_at(&self, s: f64) -> Result<Vector3<f64>> {
        self.state_at(s).map(|r| r.0)
    }

    /// Position and velocity `ẋ = c² p` at `s`.
    pub fn kinematics_at(&self, s: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let (x, p) = self.state_at(s)?;
        let c = self.medium.wavespeed(&x, self.mode)?;
        Ok((x, p * c * c))
    }

    /// Largest deviation of `g(v, v)` from 1 over the stored samples.
    pub fn unit_speed_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for q in &self.samples {
            let c = self.medium.wavespeed(&q.position(), self.mode)?;
            worst = worst.max((q.velocity().norm_squared() / (c * c) - 1.0).abs());
        }
        Ok(worst)
    }

    /// Smallest radius of curvature of the ray, measured in g-length.
    /// Infinite for straight rays.
    pub fn min_curvature_radius(&self) -> Result<f64> {
        let mut best = f64::INFINITY;
        for q in &self.samples {
            let x = q.position();
            let cj = self.medium.wavespeed_jet(&x, self.mode)?;
            let u = q.velocity().normalize();
            let gl = cj.grad / cj.value;
            let kappa = (gl - u * u.dot(&gl)).norm();
            if kappa > 0.0 {
                best = best.min(1.0 / (kappa * cj.value));
            }
        }
        Ok(best)
    }
}

fn sample_from(s: f64, t0: f64, y: &[f64; 6], c: f64) -> PathSample {
    let p = v3(y, 3);
    let v = p * (c * c);
    PathSample {
        s,
        t: t0 + s,
        x: [y[0], y[1], y[2]],
        v: v.into(),
        p: p.into(),
    }
}

/// Traces in one direction until the boundary is crossed. Returns the
/// samples strictly inside (excluding the start) and the crossing sample.
fn trace_half(
    m: &IsotropicMedium,
    mode: WaveMode,
    dom: &ConvexDomain,
    y0: [f64; 6],
    t0: f64,
    dir: f64,
    max_s: f64,
    opts: &TraceOptions,
) -> Result<(Vec<PathSample>, PathSample)> {
    let mut inside: Vec<(f64, [f64; 6])> = vec![(0.0, y0)];
    let mut crossed = false;
    let rhs = |_: f64, y: &[f64; 6]| geodesic_rhs(m, mode, y).map(|r| r.0);
    let (s_end, y_end) = integrate(rhs, 0.0, y0, dir * max_s, &opts.ode, |s, y| {
        renormalize(m, mode, y)?;
        if dom.b(&v3(y, 0)) >= 0.0 {
            crossed = true;
            return Ok(false);
        }
        inside.push((s, *y));
        Ok(true)
    })?;
    if !crossed {
        return Err(Error::TrappingSuspected { max_arclength: max_s });
    }
    // Illinois iteration on b(x(s)) between the last inside state and the
    // first outside state, re-integrating from the inside state.
    let (sa0, ya) = *inside.last().unwrap();
    let at = |s: f64| -> Result<[f64; 6]> {
        let (_, y) = integrate(rhs, sa0, ya, s, &opts.ode, |_, y| renormalize(m, mode, y).map(|_| true))?;
        Ok(y)
    };
    let (mut a, mut fa) = (sa0, dom.b(&v3(&ya, 0)));
    let (mut b, mut fb) = (s_end, dom.b(&v3(&y_end, 0)));
    let mut yb = y_end;
    for _ in 0..200 {
        if fb.abs() <= opts.boundary_tol || (b - a).abs() < 1e-15 * b.abs().max(1.0) {
            break;
        }
        let s = b - fb * (b - a) / (fb - fa);
        let y = at(s)?;
        let f = dom.b(&v3(&y, 0));
        if f * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = s;
        fb = f;
        yb = y;
    }
    let c = m.wavespeed(&v3(&yb, 0), mode)?;
    let mut samples: Vec<PathSample> = inside[1..]
        .iter()
        .filter(|(s, _)| dir * (s - b) < 0.0)
        .map(|(s, y)| Ok(sample_from(*s, t0, y, m.wavespeed(&v3(y, 0), mode)?)))
        .collect::<Result<_>>()?;
    samples.dedup_by(|x, y| x.s == y.s);
    Ok((samples, sample_from(b, t0, &yb, c)))
}

fn extend(
    m: &IsotropicMedium,
    mode: WaveMode,
    from: &PathSample,
    t0: f64,
    to: f64,
    opts: &OdeOptions,
) -> Result<Vec<PathSample>> {
    let mut out = Vec::new();
    let rhs = |_: f64, y: &[f64; 6]| geodesic_rhs(m, mode, y).map(|r| r.0);
    integrate(rhs, from.s, from.state(), to, opts, |s, y| {
        renormalize(m, mode, y)?;
        out.push(sample_from(s, t0, y, m.wavespeed(&v3(y, 0), mode)?));
        Ok(true)
    })?;
    Ok(out)
}

/// Traces the geodesic through `x0` with initial direction `dir0` (any
/// nonzero vector; it is rescaled to unit g-speed) in both directions until
/// it leaves `dom`, then extends it past each crossing. Arclength `s` is
/// measured from `x0` and time is `t = t0 + s`.
pub fn trace_geodesic(
    m: &IsotropicMedium,
    mode: WaveMode,
    x0: &Vector3<f64>,
    dir0: &Vector3<f64>,
    dom: &ConvexDomain,
    t0: f64,
    opts: &TraceOptions,
) -> Result<GeodesicPath> {
    let b0 = dom.b(x0);
    if !(b0 < 0.0) {
        return Err(Error::StartOutsideDomain(b0));
    }
    let n = dir0.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidInput("initial direction must be nonzero".into()));
    }
    let c0 = m.wavespeed(x0, mode)?;
    let p0 = dir0 / (n * c0);
    let y0 = [x0.x, x0.y, x0.z, p0.x, p0.y, p0.z];
    let mut ode = opts.ode;
    if !ode.h_max.is_finite() {
        ode.h_max = 0.05 * dom.extent() / c0;
    }
    let opts = TraceOptions { ode, ..opts.clone() };
    let max_s = opts.max_arclength.unwrap_or(1e3 * dom.extent() / c0);
    let (fwd, exit) = trace_half(m, mode, dom, y0, t0, 1.0, max_s, &opts)?;
    let (bwd, entry) = trace_half(m, mode, dom, y0, t0, -1.0, max_s, &opts)?;
    let eps = opts.extension * (exit.s - entry.s);
    let mut samples = Vec::new();
    if eps > 0.0 {
        let mut pre = extend(m, mode, &entry, t0, entry.s - eps, &ode)?;
        pre.reverse();
        samples.extend(pre);
    }
    samples.push(entry);
    samples.extend(bwd.into_iter().rev());
    samples.push(sample_from(0.0, t0, &y0, c0));
    samples.extend(fwd);
    samples.push(exit);
    if eps > 0.0 {
        samples.extend(extend(m, mode, &exit, t0, exit.s + eps, &ode)?);
    }
    samples.dedup_by(|x, y| x.s == y.s);
    let event = |q: &PathSample| BoundaryEvent {
        s: q.s,
        t: q.t,
        x: q.x,
        v: q.v,
    };
    Ok(GeodesicPath {
        mode,
        t0,
        entry: event(&entry),
        exit: event(&exit),
        samples,
        medium: m.clone(),
        ode,
    })
}

/// Completes the unit tangent `u` to a Euclidean orthonormal frame.
pub fn orthonormal_complement(u: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let u = u.normalize();
    let a = u.abs();
    let helper = if a.x <= a.y && a.x <= a.z {
        Vector3::x()
    } else if a.y <= a.z {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e2 = (helper - u * u.dot(&helper)).normalize();
    (e2, u.cross(&e2))
}

/// A g-orthonormal pair transported along the path, stored at the path
/// samples. Each vector has Euclidean length `c`.
#[derive(Clone, Debug)]
pub struct ParallelFrame {
    pub e: Vec<[Vector3<f64>; 2]>,
}

impl ParallelFrame {
    /// Largest deviation of the g-Gram matrix of `{γ̇, e₂, e₃}` from the
    /// identity over all samples.
    pub fn orthonormality_defect(&self, path: &GeodesicPath) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (q, e) in path.samples.iter().zip(&self.e) {
            let c = path.medium.wavespeed(&q.position(), path.mode)?;
            let b = [q.velocity(), e[0], e[1]];
            for i in 0..3 {
                for j in 0..3 {
                    let gij = b[i].dot(&b[j]) / (c * c);
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((gij - want).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// The default initial frame at the anchor `s = 0`.
pub fn default_frame(path: &GeodesicPath) -> Result<[Vector3<f64>; 2]> {
    let (x, v) = path.kinematics_at(0.0)?;
    let c = path.medium.wavespeed(&x, path.mode)?;
    let (e2, e3) = orthonormal_complement(&v);
    Ok([e2 * c, e3 * c])
}

pub fn parallel_transport(path: &GeodesicPath, e_init: [Vector3<f64>; 2]) -> Result<ParallelFrame> {
    let (m, mode) = (&path.medium, path.mode);
    let anchor = path
        .samples
        .iter()
        .position(|q| q.s == 0.0)
        .ok_or_else(|| Error::InvalidInput("path has no anchor sample".into()))?;
    let q0 = &path.samples[anchor];
    let c0 = m.wavespeed(&q0.position(), mode)?;
    let b = [q0.velocity(), e_init[0], e_init[1]];
    for i in 0..3 {
        for j in i..3 {
            let g = b[i].dot(&b[j]) / (c0 * c0);
            let want = if i == j { 1.0 } else { 0.0 };
            if (g - want).abs() > 1e-8 {
                return Err(Error::InvalidInput(
                    "initial frame is not g-orthonormal and orthogonal to the tangent".into(),
                ));
            }
        }
    }
    let n = path.samples.len();
    let mut e = vec![[Vector3::zeros(); 2]; n];
    e[anchor] = e_init;
    let rhs = |_: f64, y: &[f64; 12]| frame_rhs(m, mode, y);
    let step = |from: usize, to: usize, w: [Vector3<f64>; 2]| -> Result<[Vector3<f64>; 2]> {
        let a = &path.samples[from];
        let mut y = [0.0; 12];
        y[..6].copy_from_slice(&a.state());
        put(&mut y, 6, &w[0]);
        put(&mut y, 9, &w[1]);
        let (_, y) = integrate(rhs, a.s, y, path.samples[to].s, &path.ode, |_, y| {
            renormalize(m, mode, &mut y[..6]).map(|_| true)
        })?;
        Ok([v3(&y, 6), v3(&y, 9)])
    };
    for k in anchor + 1..n {
        e[k] = step(k - 1, k, e[k - 1])?;
    }
    for k in (0..anchor).rev() {
        e[k] = step(k + 1, k, e[k + 1])?;
    }
    Ok(ParallelFrame { e })
}

/// Christoffel symbols of the Euclidean metric in Fermi coordinates
/// `(s, y², y³)`, on the axis, from `c` and its Fermi-frame derivatives
/// `dc = (∂_s c, ∂_2 c, ∂_3 c)`. Indexed `[k][i][j]` for `Γ^k_ij`.
pub fn euclidean_christoffel_on_axis(c: f64, dc: [f64; 3]) -> [[[f64; 3]; 3]; 3] {
    let l = [dc[0] / c, dc[1] / c, dc[2] / c];
    let mut g = [[[0.0; 3]; 3]; 3];
    g[0][0][0] = l[0];
    for a in 1..3 {
        g[0][0][a] = l[a];
        g[0][a][0] = l[a];
        g[a][0][0] = -l[a];
        g[0][a][a] = -l[0];
        g[a][0][a] = l[0];
        g[a][a][0] = l[0];
        for b in 1..3 {
            for k in 1..3 {
                let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
                g[k][a][b] = d(k, a) * l[b] + d(k, b) * l[a] - d(a, b) * l[k];
            }
        }
    }
    g
}

/// Fermi coordinates along a traced path with a parallel frame.
#[derive(Clone, Debug)]
pub struct FermiChart {
    pub path: GeodesicPath,
    pub frame: ParallelFrame,
    /// Tube radius in g-length.
    pub delta: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct AxisFrame {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub e3: Vector3<f64>,
}

impl AxisFrame {
    pub fn basis(&self) -> [Vector3<f64>; 3] {
        [self.v, self.e2, self.e3]
    }
}

impl FermiChart {
    /// Builds the chart with the default frame and tube radius
    /// `0.1 · min(min curvature radius, path length)`.
    pub fn new(path: GeodesicPath) -> Result<Self> {
        let e0 = default_frame(&path)?;
        Self::with_frame(path, e0, None)
    }

    pub fn with_frame(path: GeodesicPath, e_init: [Vector3<f64>; 2], delta: Option<f64>) -> Result<Self> {
        let frame = parallel_transport(&path, e_init)?;
        let delta = match delta {
            Some(d) => d,
            None => 0.1 * path.min_curvature_radius()?.min(path.length()),
        };
        if !(delta > 0.0) {
            return Err(Error::InvalidInput("tube radius must be positive".into()));
        }
        Ok(FermiChart { path, frame, delta })
    }

    pub fn mode(&self) -> WaveMode {
        self.path.mode
    }

    pub fn t0(&self) -> f64 {
        self.path.t0
    }

    pub fn axis_at(&self, s: f64) -> Result<AxisFrame> {
        let path = &self.path;
        let k = path.nearest(s)?;
        let a = &path.samples[k];
        let (m, mode) = (&path.medium, path.mode);
        let mut y = [0.0; 12];
        y[..6].copy_from_slice(&a.state());
        put(&mut y, 6, &self.frame.e[k][0]);
        put(&mut y, 9, &self.frame.e[k][1]);
        let (_, y) = integrate(
            |_, y: &[f64; 12]| frame_rhs(m, mode, y),
            a.s,
            y,
            s,
            &path.ode,
            |_, y| renormalize(m, mode, &mut y[..6]).map(|_| true),
        )?;
        let x = v3(&y, 0);
        let c = m.wavespeed(&x, mode)?;
        Ok(AxisFrame {
            x,
            v: v3(&y, 3) * (c * c),
            e2: v3(&y, 6),
            e3: v3(&y, 9),
        })
    }

    /// Riemannian exponential map of `g` at `x` applied to `w`.
    pub fn exp_map(&self, x: &Vector3<f64>, w: &Vector3<f64>) -> Result<Vector3<f64>> {
        if w.norm_squared() == 0.0 {
            return Ok(*x);
        }
        let (m, mode) = (&self.path.medium, self.path.mode);
        let c = m.wavespeed(x, mode)?;
        let p = w / (c * c);
        let y0 = [x.x, x.y, x.z, p.x, p.y, p.z];
        let opts = OdeOptions {
            h_max: 0.25,
            ..self.path.ode
        };
        let (_, y) = integrate(
            |_, y: &[f64; 6]| geodesic_rhs(m, mode, y).map(|r| r.0),
            0.0,
            y0,
            1.0,
            &opts,
            |_, _| Ok(true),
        )?;
        Ok(v3(&y, 0))
    }

    /// Spatial part of the forward map `(s, y², y³) ↦ x`.
    pub fn forward_spatial(&self, s: f64, y2: f64, y3: f64) -> Result<Vector3<f64>> {
        let a = self.axis_at(s)?;
        self.exp_map(&a.x, &(a.e2 * y2 + a.e3 * y3))
    }

    pub fn forward(&self, t: f64, s: f64, y2: f64, y3: f64) -> Result<(f64, Vector3<f64>)> {
        Ok((t, self.forward_spatial(s, y2, y3)?))
    }

    /// Solves `forward_spatial(s, y) = x` by Newton iteration with a
    /// finite-difference Jacobian.
    pub fn inverse_spatial(&self, x: &Vector3<f64>) -> Result<(f64, f64, f64)> {
        let path = &self.path;
        let k = path
            .samples
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1.position() - x).norm_squared();
                let db = (b.1.position() - x).norm_squared();
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
            .unwrap();
        let q = &path.samples[k];
        let (lo, hi) = path.s_range();
        let vq = q.velocity();
        let mut s = (q.s + (x - q.position()).dot(&vq) / vq.norm_squared()).clamp(lo, hi);
        let a = self.axis_at(s)?;
        let c = path.medium.wavespeed(&a.x, path.mode)?;
        let d = x - a.x;
        let mut y = [d.dot(&a.e2) / (c * c), d.dot(&a.e3) / (c * c)];
        let scale = x.norm().max(1.0);
        let f = |s: f64, y: &[f64; 2]| -> Result<Vector3<f64>> { Ok(self.forward_spatial(s, y[0], y[1])? - x) };
        let mut r = f(s, &y)?;
        for _ in 0..60 {
            if r.norm() < 1e-12 * scale {
                return Ok((s, y[0], y[1]));
            }
            let h = 1e-6;
            let mut jac = Matrix3::zeros();
            let cols = [
                (f(s + h, &y)? - f(s - h, &y)?) / (2.0 * h),
                (f(s, &[y[0] + h, y[1]])? - f(s, &[y[0] - h, y[1]])?) / (2.0 * h),
                (f(s, &[y[0], y[1] + h])? - f(s, &[y[0], y[1] - h])?) / (2.0 * h),
            ];
            for (j, col) in cols.iter().enumerate() {
                jac.set_column(j, col);
            }
            let delta = jac
                .lu()
                .solve(&-r)
                .ok_or_else(|| Error::ChartInversion("singular chart Jacobian".into()))?;
            let mut lam = 1.0;
            loop {
                let sn = s + lam * delta[0];
                let yn = [y[0] + lam * delta[1], y[1] + lam * delta[2]];
                let rn = f(sn, &yn);
                if let Ok(rn) = rn {
                    if rn.norm() < r.norm() || lam < 1e-3 {
                        s = sn;
                        y = yn;
                        r = rn;
                        break;
                    }
                }
                lam *= 0.5;
                if lam < 1e-3 {
                    return Err(Error::ChartInversion(format!(
                        "line search failed at s = {s:.6}, residual {:.3e}",
                        r.norm()
                    )));
                }
            }
        }
        if r.norm() < 1e-10 * scale {
            return Ok((s, y[0], y[1]));
        }
        Err(Error::ChartInversion(format!(
            "Newton did not converge (residual {:.3e}); the point may lie outside the injectivity tube",
            r.norm()
        )))
    }

    pub fn inverse(&self, t: f64, x: &Vector3<f64>) -> Result<(f64, f64, f64, f64)> {
        let (s, y2, y3) = self.inverse_spatial(x)?;
        Ok((t, s, y2, y3))
    }

    /// `(t, s, y², y³) ↦ (τ, r, z², z³)`.
    pub fn rotate(&self, t: f64, s: f64, y2: f64, y3: f64) -> [f64; 4] {
        let dt = t - self.t0();
        let k = std::f64::consts::FRAC_1_SQRT_2;
        [k * (dt + s), k * (s - dt), y2, y3]
    }

    /// `(τ, r, z², z³) ↦ (t, s, y², y³)`.
    pub fn unrotate(&self, z: [f64; 4]) -> (f64, f64, f64, f64) {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        (self.t0() + k * (z[0] - z[1]), k * (z[0] + z[1]), z[2], z[3])
    }

    /// Fermi coordinates `(τ, r, z², z³)` of a spacetime point.
    pub fn coordinates(&self, t: f64, x: &Vector3<f64>) -> Result<[f64; 4]> {
        let (t, s, y2, y3) = self.inverse(t, x)?;
        Ok(self.rotate(t, s, y2, y3))
    }

    /// Wavespeed and its derivatives along `(γ̇, e₂, e₃)` on the axis.
    pub fn axis_derivatives(&self, s: f64) -> Result<(f64, [f64; 3])> {
        let a = self.axis_at(s)?;
        let cj = self.path.medium.wavespeed_jet(&a.x, self.mode())?;
        let b = a.basis();
        Ok((cj.value, [b[0].dot(&cj.grad), b[1].dot(&cj.grad), b[2].dot(&cj.grad)]))
    }

    pub fn christoffel_at(&self, s: f64) -> Result<[[[f64; 3]; 3]; 3]> {
        let (c, dc) = self.axis_derivatives(s)?;
        Ok(euclidean_christoffel_on_axis(c, dc))
    }

    /// Riccati coefficient on the axis at arclength `s`, in the ordering
    /// `(r, z², z³)`. With `ḡ = ½(g^{ss} − 1)` in Fermi coordinates,
    /// `D = ¼ ∂²ḡ`; the `r` row vanishes and the transverse block is a
    /// quarter of the Jacobi operator `⟨R(e_α, γ̇)γ̇, e_β⟩`, which for the
    /// conformal metric `c⁻² dx²` reads
    /// `¼ c (ê_α·∇∇c·ê_β + δ_αβ û·∇∇c·û) − ¼ |∇c|² δ_αβ`
    /// with `ê`, `û` the Euclidean unit directions.
    pub fn d_matrix(&self, s: f64) -> Result<Matrix3<f64>> {
        let a = self.axis_at(s)?;
        let cj = self.path.medium.wavespeed_jet(&a.x, self.mode())?;
        Ok(d_from_jet(&cj, &a))
    }
}

pub(crate) fn d_from_jet(cj: &crate::jet::Jet, a: &AxisFrame) -> Matrix3<f64> {
    let c = cj.value;
    let u = a.v.normalize();
    let e = [a.e2.normalize(), a.e3.normalize()];
    let huu = u.dot(&(cj.hess * u));
    let g2 = cj.grad.norm_squared();
    let mut d = Matrix3::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let mut v = 0.25 * c * e[i].dot(&(cj.hess * e[j]));
            if i == j {
                v += 0.25 * (c * huu - g2);
            }
            d[(i + 1, j + 1)] = v;
        }
    }
    let sym = 0.5 * (d[(1, 2)] + d[(2, 1)]);
    d[(1, 2)] = sym;
    d[(2, 1)] = sym;
    d
}

#[derive(Clone, Debug, Serialize)]
pub struct DiameterEstimate {
    /// Largest g-length found; a lower bound on the diameter.
    pub lower_bound: f64,
    pub geodesics: usize,
}

/// Maximum g-length over boundary-to-boundary geodesics launched from
/// `n_samples` quasi-uniform boundary points, each along the inward normal
/// and `extra_directions` further inward directions.
pub fn estimate_diameter(
    m: &IsotropicMedium,
    mode: WaveMode,
    dom: &ConvexDomain,
    n_samples: usize,
    extra_directions: usize,
) -> Result<DiameterEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let opts = TraceOptions {
        extension: 0.0,
        ..Default::default()
    };
    let pts = dom.boundary_points(n_samples);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let lengths: Vec<Result<Vec<f64>>> = pts
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let nu = dom.outward_normal(p);
            let (t1, t2) = orthonormal_complement(&nu);
            let x0 = p - nu * (1e-7 * dom.extent());
            let mut out = Vec::with_capacity(extra_directions + 1);
            for j in 0..=extra_directions {
                let d = if j == 0 {
                    -nu
                } else {
                    // spread over the inward hemisphere, offset per point
                    let z = (j as f64 - 0.5) / extra_directions as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let th = golden * (j + 7 * k) as f64;
                    -nu * z.max(0.05) + (t1 * th.cos() + t2 * th.sin()) * r
                };
                let path = trace_geodesic(m, mode, &x0, &d, dom, 0.0, &opts)?;
                out.push(path.length());
            }
            Ok(out)
        })
        .collect();
    let mut best: f64 = 0.0;
    let mut count = 0;
    for r in lengths {
        for l in r? {
            best = best.max(l);
            count += 1;
        }
    }
    Ok(DiameterEstimate {
        lower_bound: best,
        geodesics: count,
    })
}
