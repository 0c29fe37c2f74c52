//! Quadratic source `G`, the interaction density `𝒢`, the S-S-P direction
//! construction and the interaction amplitude `𝒜`.

pub mod stationary;

use crate::error::{Error, Result};
use crate::geodesics::orthonormal_complement;
use crate::medium::{IsotropicMedium, PointModuli};
use crate::riccati::C64;
use crate::ConvexDomain;
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{ComplexField, Matrix3, Vector3};
use serde::Serialize;
use std::num::NonZeroUsize;

/// Displacement gradient with `g[(i, j)] = ∂u_i/∂x_j`.
pub type Gradient<T> = Matrix3<T>;

fn k<T: ComplexField<RealField = f64>>(v: f64) -> T {
    T::from_real(v)
}

/// Second-order stress `G_ij(u⁽¹⁾, u⁽²⁾)`, term by term.
pub fn quadratic_source_g<T>(g1: &Gradient<T>, g2: &Gradient<T>, p: &PointModuli) -> Matrix3<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (lb, mu_a) = (k::<T>(p.lambda + p.b), k::<T>(p.mu + p.a / 4.0));
    let (a4, b, c2) = (k::<T>(p.a / 4.0), k::<T>(p.b), k::<T>(2.0 * p.c));
    let tr1 = g1.trace();
    let tr2 = g2.trace();
    let mut dd = T::zero();
    let mut dt = T::zero();
    for m in 0..3 {
        for n in 0..3 {
            dd += g1[(m, n)] * g2[(m, n)];
            dt += g1[(m, n)] * g2[(n, m)];
        }
    }
    Matrix3::from_fn(|i, j| {
        let delta = if i == j { T::one() } else { T::zero() };
        let mut v = (lb * dd + c2 * tr1 * tr2 + b * dt) * delta;
        v += b * (tr1 * g2[(j, i)] + tr2 * g1[(j, i)]);
        v += lb * (tr1 * g2[(i, j)] + tr2 * g1[(i, j)]);
        let mut s_a = T::zero();
        let mut s_m = T::zero();
        for m in 0..3 {
            s_a += g1[(j, m)] * g2[(m, i)] + g2[(j, m)] * g1[(m, i)];
            s_m += g1[(m, i)] * g2[(m, j)] + g2[(m, i)] * g1[(m, j)];
            s_m += g1[(i, m)] * g2[(j, m)] + g2[(i, m)] * g1[(j, m)];
            s_m += g1[(i, m)] * g2[(m, j)] + g2[(i, m)] * g1[(m, j)];
        }
        v + a4 * s_a + mu_a * s_m
    })
}

fn ddot<T: ComplexField<RealField = f64> + Copy>(x: &Matrix3<T>, y: &Matrix3<T>) -> T {
    x.component_mul(y).sum()
}

/// Interaction density `𝒢(∇u⁽¹⁾, ∇u⁽²⁾, ∇u⁽⁰⁾)`.
pub fn interaction_density<T>(g1: &Gradient<T>, g2: &Gradient<T>, g0: &Gradient<T>, p: &PointModuli) -> T
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (tr1, tr2, tr0) = (g1.trace(), g2.trace(), g0.trace());
    let lb = k::<T>(p.lambda + p.b);
    let b = k::<T>(p.b);
    let p12 = g1 * g2;
    let p21 = g2 * g1;
    let sym = g1.transpose() * g2 + g2.transpose() * g1 + g1 * g2.transpose() + g2 * g1.transpose() + p12 + p21;
    tr0 * (lb * ddot(g1, g2) + k::<T>(2.0 * p.c) * tr1 * tr2 + b * p12.trace())
        + b * (tr1 * (g2 * g0).trace() + tr2 * (g1 * g0).trace())
        + k::<T>(p.a / 4.0) * ddot(&(p12 + p21).transpose(), g0)
        + lb * (tr1 * ddot(g2, g0) + tr2 * ddot(g1, g0))
        + k::<T>(p.mu + p.a / 4.0) * ddot(&sym, g0)
}

/// Rank-one gradient `a ⊗ ξ`.
pub fn rank_one(a: &Vector3<C64>, xi: &Vector3<C64>) -> Gradient<C64> {
    a * xi.transpose()
}

/// `∂v_i/∂x_j` by fourth-order central differences.
pub fn gradient_fd<F>(v: &F, x: &Vector3<f64>, h: f64) -> Result<Gradient<f64>>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    let mut g = Matrix3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = h;
        let d = (v(&(x - e * 2.0))? - v(&(x - e))? * 8.0 + v(&(x + e))? * 8.0 - v(&(x + e * 2.0))?) / (12.0 * h);
        g.set_column(j, &d);
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DivergenceCheck {
    /// `∫ v⁽⁰⁾·∇·G dx`
    pub volume_divergence: f64,
    /// `∫ v⁽⁰⁾·(G ν) dS`
    pub boundary: f64,
    /// `∫ 𝒢 dx`
    pub volume_density: f64,
    pub residual: f64,
}

fn gl(n: usize) -> Result<Vec<(f64, f64)>> {
    let n = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidInput("quadrature order must be positive".into()))?;
    Ok(GaussLegendre::new(n).as_node_weight_pairs().to_vec())
}

fn center_axes(dom: &ConvexDomain) -> (Vector3<f64>, Vector3<f64>) {
    match dom {
        ConvexDomain::Ball { center, radius } => (Vector3::from(*center), Vector3::repeat(*radius)),
        ConvexDomain::Ellipsoid { center, semi_axes } => (Vector3::from(*center), Vector3::from(*semi_axes)),
    }
}

/// Volume and surface tensor rules on a ball or ellipsoid: Gauss–Legendre
/// in `r` and `cos θ`, trapezoidal in `φ`.
fn domain_rules(
    dom: &ConvexDomain,
    order: usize,
) -> Result<(Vec<(Vector3<f64>, f64)>, Vec<(Vector3<f64>, Vector3<f64>, f64)>)> {
    let (c, a) = center_axes(dom);
    let nodes = gl(order)?;
    let nphi = 2 * order;
    let jac = a.x * a.y * a.z;
    let mut vol = Vec::with_capacity(order * order * nphi);
    let mut surf = Vec::with_capacity(order * nphi);
    for &(u, wu) in &nodes {
        let st = (1.0 - u * u).sqrt();
        for kphi in 0..nphi {
            let ph = 2.0 * std::f64::consts::PI * kphi as f64 / nphi as f64;
            let wph = 2.0 * std::f64::consts::PI / nphi as f64;
            let y = Vector3::new(st * ph.cos(), st * ph.sin(), u);
            for &(rr, wr) in &nodes {
                let r = 0.5 * (rr + 1.0);
                vol.push((c + (y * r).component_mul(&a), jac * r * r * 0.5 * wr * wu * wph));
            }
            // dS for x = c + A y(u, φ): |∂_u x × ∂_φ x| du dφ
            let du = Vector3::new(-u / st * ph.cos(), -u / st * ph.sin(), 1.0).component_mul(&a);
            let dphi = Vector3::new(-st * ph.sin(), st * ph.cos(), 0.0).component_mul(&a);
            let x = c + y.component_mul(&a);
            surf.push((x, dom.outward_normal(&x), du.cross(&dphi).norm() * wu * wph));
        }
    }
    Ok((vol, surf))
}

/// Checks `∫ v⁽⁰⁾·∇·G − ∮ v⁽⁰⁾·(Gν) = −∫ 𝒢` for `G = G(v⁽¹⁾, v⁽²⁾)`, with
/// gradients and `∇·G` by finite differences.
pub fn divergence_identity_check<F1, F2, F0>(
    v1: F1,
    v2: F2,
    v0: F0,
    m: &IsotropicMedium,
    dom: &ConvexDomain,
    order: usize,
) -> Result<DivergenceCheck>
where
    F1: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
    F2: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
    F0: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    let h = 1e-3 * dom.extent();
    let g_at = |x: &Vector3<f64>| -> Result<Matrix3<f64>> {
        let p = m.moduli_at(x)?;
        Ok(quadratic_source_g(
            &gradient_fd(&v1, x, h)?,
            &gradient_fd(&v2, x, h)?,
            &p,
        ))
    };
    let (vol, surf) = domain_rules(dom, order)?;
    let (mut div_term, mut dens, mut bdry) = (0.0, 0.0, 0.0);
    for (x, w) in &vol {
        let mut div = Vector3::zeros();
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = h;
            let d = (g_at(&(x - e * 2.0))? - g_at(&(x - e))? * 8.0 + g_at(&(x + e))? * 8.0 - g_at(&(x + e * 2.0))?)
                / (12.0 * h);
            div += d.column(j);
        }
        let p = m.moduli_at(x)?;
        div_term += w * v0(x)?.dot(&div);
        dens += w * interaction_density(
            &gradient_fd(&v1, x, h)?,
            &gradient_fd(&v2, x, h)?,
            &gradient_fd(&v0, x, h)?,
            &p,
        );
    }
    for (x, nu, w) in &surf {
        bdry += w * v0(x)?.dot(&(g_at(x)? * nu));
    }
    let scale = div_term.abs().max(bdry.abs()).max(dens.abs()).max(f64::MIN_POSITIVE);
    Ok(DivergenceCheck {
        volume_divergence: div_term,
        boundary: bdry,
        volume_density: dens,
        residual: (div_term - bdry + dens).abs() / scale,
    })
}

/// Direction data for two S covectors and one P covector meeting at a point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SspDirections {
    pub a: f64,
    pub psi: f64,
    pub xi1: Vector3<f64>,
    pub xi0: Vector3<f64>,
    /// `a ξ⁽¹⁾ + ξ⁽⁰⁾`.
    pub xi2: Vector3<f64>,
    pub xi2_unit: Vector3<f64>,
}

pub fn ssp_coefficient(psi: f64, c_p: f64, c_s: f64) -> f64 {
    (c_p * c_p - c_s * c_s) / (2.0 * (c_s * c_s * psi.cos() + c_s * c_p))
}

pub fn build_ssp_directions(xi1: &Vector3<f64>, xi0: &Vector3<f64>, c_p: f64, c_s: f64) -> Result<SspDirections> {
    if !(c_p > c_s && c_s > 0.0) {
        return Err(Error::InvalidInput(format!("need c_P > c_S > 0, got {c_p}, {c_s}")));
    }
    if (xi1.norm() - 1.0).abs() > 1e-12 || (xi0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("directions must be unit vectors".into()));
    }
    let cos_psi = xi1.dot(xi0).clamp(-1.0, 1.0);
    let psi = cos_psi.acos();
    let a = (c_p * c_p - c_s * c_s) / (2.0 * (c_s * c_s * cos_psi + c_s * c_p));
    let xi2 = xi1 * a + xi0;
    let null = (a * c_s - c_p).powi(2) - c_s * c_s * xi2.norm_squared();
    if null.abs() > 1e-12 * c_p * c_p {
        return Err(Error::Inconsistent(format!("null condition violated by {null:e}")));
    }
    Ok(SspDirections {
        a,
        psi,
        xi1: *xi1,
        xi0: *xi0,
        xi2,
        xi2_unit: xi2.normalize(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConfigKind {
    Perp,
    InPlane,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InteractionConfig {
    pub kind: ConfigKind,
    pub c_p: f64,
    pub c_s: f64,
    pub dirs: SspDirections,
    /// `ξ⁽²⁾` as used in the amplitude: unnormalized for PERP, unit for
    /// INPLANE.
    pub xi2: Vector3<f64>,
    pub alpha1: Vector3<f64>,
    pub alpha2: Vector3<f64>,
}

fn plane_normal(xi1: &Vector3<f64>, xi0: &Vector3<f64>) -> Vector3<f64> {
    let n = xi0.cross(xi1);
    if n.norm() > 1e-12 {
        n.normalize()
    } else {
        orthonormal_complement(xi1).0
    }
}

fn in_plane(psi: f64) -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::x(), Vector3::new(psi.cos(), psi.sin(), 0.0))
}

impl InteractionConfig {
    /// `α⁽¹⁾ = α⁽²⁾` normal to the plane of `ξ⁽¹⁾, ξ⁽⁰⁾`.
    pub fn perp(xi1: &Vector3<f64>, xi0: &Vector3<f64>, c_p: f64, c_s: f64) -> Result<Self> {
        let dirs = build_ssp_directions(xi1, xi0, c_p, c_s)?;
        let n = plane_normal(xi1, xi0);
        Ok(InteractionConfig {
            kind: ConfigKind::Perp,
            c_p,
            c_s,
            dirs,
            xi2: dirs.xi2,
            alpha1: n,
            alpha2: n,
        })
    }

    /// Coplanar polarizations `α⁽ʲ⁾ = n × ξ⁽ʲ⁾` with `n ∝ ξ⁽⁰⁾ × ξ⁽¹⁾`.
    pub fn inplane(xi1: &Vector3<f64>, xi0: &Vector3<f64>, c_p: f64, c_s: f64) -> Result<Self> {
        let dirs = build_ssp_directions(xi1, xi0, c_p, c_s)?;
        let n = plane_normal(xi1, xi0);
        Ok(InteractionConfig {
            kind: ConfigKind::InPlane,
            c_p,
            c_s,
            dirs,
            xi2: dirs.xi2_unit,
            alpha1: n.cross(xi1),
            alpha2: n.cross(&dirs.xi2_unit),
        })
    }

    /// PERP configuration in the `x₁x₂` plane with `ξ⁽¹⁾ = e₁`.
    pub fn perp_from_psi(psi: f64, c_p: f64, c_s: f64) -> Result<Self> {
        let (x1, x0) = in_plane(psi);
        Self::perp(&x1, &x0, c_p, c_s)
    }

    pub fn inplane_from_psi(psi: f64, c_p: f64, c_s: f64) -> Result<Self> {
        let (x1, x0) = in_plane(psi);
        Self::inplane(&x1, &x0, c_p, c_s)
    }

    /// INPLANE configuration whose S directions meet at angle `alpha`,
    /// taking `ψ` on the increasing branch of `α(ψ)`.
    pub fn inplane_from_alpha(alpha: f64, c_p: f64, c_s: f64) -> Result<Self> {
        let (amax, psi_max) = max_inplane_angle(c_p, c_s);
        if !(0.0..=amax).contains(&alpha) {
            return Err(Error::InvalidInput(format!(
                "in-plane angle {alpha} outside [0, {amax}] for c_P/c_S = {}",
                c_p / c_s
            )));
        }
        let (mut lo, mut hi) = (0.0, psi_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inplane_angle(mid, c_p, c_s) < alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::inplane_from_psi(0.5 * (lo + hi), c_p, c_s)
    }

    pub fn psi(&self) -> f64 {
        self.dirs.psi
    }

    /// Angle between `ξ⁽¹⁾` and `ξ⁽²⁾`.
    pub fn alpha(&self) -> f64 {
        self.dirs.xi1.dot(&self.dirs.xi2_unit).clamp(-1.0, 1.0).acos()
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dirs;
        let tol = 1e-10;
        let unit = |v: &Vector3<f64>| (v.norm() - 1.0).abs() < tol;
        let ok = unit(&self.alpha1)
            && unit(&self.alpha2)
            && self.alpha1.dot(&d.xi1).abs() < tol
            && self.alpha2.dot(&self.xi2).abs() < tol * self.xi2.norm();
        let kind_ok = match self.kind {
            ConfigKind::Perp => {
                (self.alpha1 - self.alpha2).norm() < tol
                    && self.alpha1.dot(&d.xi0).abs() < tol
                    && (self.xi2 - d.xi2).norm() < tol
            }
            ConfigKind::InPlane => {
                let n = plane_normal(&d.xi1, &d.xi0);
                self.alpha1.dot(&n).abs() < tol && self.alpha2.dot(&n).abs() < tol && unit(&self.xi2)
            }
        };
        if ok && kind_ok {
            Ok(())
        } else {
            Err(Error::ConfigMismatch(format!(
                "polarizations do not match a {:?} configuration",
                self.kind
            )))
        }
    }
}

/// `α(ψ) = atan2(sin ψ, a(ψ) + cos ψ)`.
pub fn inplane_angle(psi: f64, c_p: f64, c_s: f64) -> f64 {
    psi.sin().atan2(ssp_coefficient(psi, c_p, c_s) + psi.cos())
}

/// Largest attainable in-plane angle and the `ψ` attaining it.
pub fn max_inplane_angle(c_p: f64, c_s: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if inplane_angle(m1, c_p, c_s) < inplane_angle(m2, c_p, c_s) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let psi = 0.5 * (lo + hi);
    (inplane_angle(psi, c_p, c_s), psi)
}

/// Normalized amplitude from the specialized formulas:
/// PERP `(λ+ℬ) ξ⁽¹⁾·ξ⁽²⁾ + (2μ+𝒜/2)(ξ⁽¹⁾·ξ⁽⁰⁾)(ξ⁽²⁾·ξ⁽⁰⁾)`,
/// INPLANE `(λ+2μ+ℬ+𝒜/2) cos²α − (μ+ℬ+𝒜/2) sin²α`.
pub fn closed_form_scaled(cfg: &InteractionConfig, p: &PointModuli) -> f64 {
    let d = &cfg.dirs;
    match cfg.kind {
        ConfigKind::Perp => {
            (p.lambda + p.b) * d.xi1.dot(&cfg.xi2) + (2.0 * p.mu + p.a / 2.0) * d.xi1.dot(&d.xi0) * cfg.xi2.dot(&d.xi0)
        }
        ConfigKind::InPlane => {
            let ca = d.xi1.dot(&cfg.xi2);
            let sa2 = 1.0 - ca * ca;
            (p.lambda + 2.0 * p.mu + p.b + p.a / 2.0) * ca * ca - (p.mu + p.b + p.a / 2.0) * sa2
        }
    }
}

/// `det(Y)` values of the three beams at the interaction point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BeamNormalizers {
    pub det_y1: C64,
    pub det_y2: C64,
    pub det_y0: C64,
}

impl Default for BeamNormalizers {
    fn default() -> Self {
        let one = C64::new(1.0, 0.0);
        BeamNormalizers {
            det_y1: one,
            det_y2: one,
            det_y0: one,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AmplitudeReport {
    /// `𝒜(q)` from the rank-one contraction.
    pub value: C64,
    /// `det(Y⁽¹⁾)^{1/2} det(Y⁽²⁾)^{1/2} det(Y⁽⁰⁾)^{1/2} c_P^{5/2} c_S⁵ ρ^{3/2} 𝒜`.
    pub scaled: C64,
    pub closed_form: f64,
    /// `scaled · ρ^{-3/2}`, the combination fixed by boundary data.
    pub observable: f64,
}

/// `𝒜(q) = 𝒢(a⁽¹⁾⊗∇φ⁽¹⁾, a⁽²⁾⊗∇φ⁽²⁾, a⁽⁰⁾⊗∇φ⁽⁰⁾)` with
/// `a⁽ʲ⁾ = det(Y)^{-1/2} c^{-1/2} ρ^{-1/2} e⁽ʲ⁾`, `e⁽ʲ⁾ = α⁽ʲ⁾/c_S`,
/// `∇φ⁽ʲ⁾ = ξ⁽ʲ⁾/c_S` and `a⁽⁰⁾ ∝ ∇φ⁽⁰⁾ = ξ⁽⁰⁾/c_P`, checked against the
/// specialized formula.
pub fn amplitude_a(cfg: &InteractionConfig, p: &PointModuli, norms: &BeamNormalizers) -> Result<AmplitudeReport> {
    cfg.validate()?;
    let (cp, cs, rho) = (cfg.c_p, cfg.c_s, p.rho);
    let c = |v: &Vector3<f64>, s: f64| v.map(|x| C64::new(x * s, 0.0));
    let n_s = |det: C64| det.sqrt().inv() / (cs * rho).sqrt();
    let n1 = n_s(norms.det_y1);
    let n2 = n_s(norms.det_y2);
    let n0 = norms.det_y0.sqrt().inv() / (cp * rho).sqrt();
    let d = &cfg.dirs;
    let g1 = rank_one(&(c(&cfg.alpha1, 1.0 / cs) * n1), &c(&d.xi1, 1.0 / cs));
    let g2 = rank_one(&(c(&cfg.alpha2, 1.0 / cs) * n2), &c(&cfg.xi2, 1.0 / cs));
    let g0 = rank_one(&(c(&d.xi0, 1.0 / cp) * n0), &c(&d.xi0, 1.0 / cp));
    let value = interaction_density(&g1, &g2, &g0, p);
    let factor =
        norms.det_y1.sqrt() * norms.det_y2.sqrt() * norms.det_y0.sqrt() * (cp.powf(2.5) * cs.powi(5) * rho.powf(1.5));
    let scaled = value * factor;
    let cf = closed_form_scaled(cfg, p);
    if (scaled - C64::new(cf, 0.0)).norm() > 1e-10 * cf.abs().max(1.0) {
        return Err(Error::AmplitudeMismatch {
            general: scaled.re,
            closed_form: cf,
        });
    }
    Ok(AmplitudeReport {
        value,
        scaled,
        closed_form: cf,
        observable: scaled.re * rho.powf(-1.5),
    })
}

/// Normalized amplitude from the rank-one contraction with unit-length
/// polarizations and unit-speed covectors.
pub fn general_scaled(cfg: &InteractionConfig, p: &PointModuli) -> f64 {
    let c = |v: &Vector3<f64>| v.map(|x| C64::new(x, 0.0));
    let d = &cfg.dirs;
    interaction_density(
        &rank_one(&c(&cfg.alpha1), &c(&d.xi1)),
        &rank_one(&c(&cfg.alpha2), &c(&cfg.xi2)),
        &rank_one(&c(&d.xi0), &c(&d.xi0)),
        p,
    )
    .re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_regression() {
        let p = PointModuli::new(2.0, 1.0, 1.0, 0.0, 0.0, 0.0);
        let g = quadratic_source_g(&Matrix3::<f64>::identity(), &Matrix3::identity(), &p);
        assert_eq!(g, Matrix3::identity() * 24.0);
    }
}
