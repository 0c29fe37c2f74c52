//! Leading-order reflection at a traction-free flat boundary patch.
//!
//! Local convention: the boundary is `x₃ = 0`, the interior is `x₃ < 0` and
//! incident waves travel outward (`ξ₃ > 0`). Slowness vectors satisfy
//! `|ξ| = 1/c`.

use crate::error::{Error, Result};
use crate::geodesics::{orthonormal_complement, trace_geodesic, GeodesicPath, TraceOptions};
use crate::medium::{IsotropicMedium, PointModuli, WaveMode};
use crate::riccati::C64;
use crate::ConvexDomain;
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

type CVec3 = Vector3<C64>;

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Square root with `Im √z > 0` off `[0, ∞)` and `√z ≥ 0` on it.
pub fn sqrt_branch(z: C64) -> C64 {
    if z.im == 0.0 && z.re >= 0.0 {
        return re(z.re.sqrt());
    }
    if z.im == 0.0 {
        return C64::new(0.0, (-z.re).sqrt());
    }
    let w = z.sqrt();
    if w.im < 0.0 {
        -w
    } else {
        w
    }
}

/// Snell data shared by the incident and reflected branches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnellData {
    pub xi1: f64,
    pub xi2: f64,
    /// `√(c_P⁻² − ξ₁² − ξ₂²)` on the `Im > 0` branch.
    pub xi_p3: C64,
    /// `√(c_S⁻² − ξ₁² − ξ₂²)`, always real for a propagating incidence.
    pub xi_s3: f64,
    pub evanescent: bool,
}

impl SnellData {
    pub fn xi_p_minus(&self) -> CVec3 {
        CVec3::new(re(self.xi1), re(self.xi2), -self.xi_p3)
    }

    pub fn xi_s_minus(&self) -> Vector3<f64> {
        Vector3::new(self.xi1, self.xi2, -self.xi_s3)
    }

    pub fn xi_p_plus(&self) -> Vector3<f64> {
        Vector3::new(self.xi1, self.xi2, self.xi_p3.re)
    }

    pub fn xi_s_plus(&self) -> Vector3<f64> {
        Vector3::new(self.xi1, self.xi2, self.xi_s3)
    }
}

pub fn snell_reflect(xi: &Vector3<f64>, mode: WaveMode, c_p: f64, c_s: f64) -> Result<SnellData> {
    let c = match mode {
        WaveMode::P => c_p,
        WaveMode::S => c_s,
    };
    if !(c_p > c_s && c_s > 0.0) {
        return Err(Error::InvalidInput(format!("need c_P > c_S > 0, got {c_p}, {c_s}")));
    }
    if xi[2] <= 0.0 || ((xi.norm() * c) - 1.0).abs() > 1e-9 {
        return Err(Error::NotPropagating(format!(
            "incident {mode} slowness {:?} has |ξ|c = {} and ξ₃ = {}",
            xi.as_slice(),
            xi.norm() * c,
            xi[2]
        )));
    }
    let t2 = xi[0] * xi[0] + xi[1] * xi[1];
    let xi_p3 = sqrt_branch(re(c_p.powi(-2) - t2));
    let xi_s3 = (c_s.powi(-2) - t2).max(0.0).sqrt();
    Ok(SnellData {
        xi1: xi[0],
        xi2: xi[1],
        xi_p3,
        xi_s3,
        evanescent: xi_p3.im > 0.0,
    })
}

/// Traction operator `B(ξ)`: the boundary traction of `a e^{iϱx·ξ}` is
/// `iϱ B(ξ) a`.
pub fn traction_matrix(xi: &CVec3, p: &PointModuli) -> Matrix3<C64> {
    let (l, m) = (re(p.lambda), re(p.mu));
    Matrix3::new(
        m * xi[2],
        re(0.0),
        m * xi[0],
        re(0.0),
        m * xi[2],
        m * xi[1],
        l * xi[0],
        l * xi[1],
        (l + m * 2.0) * xi[2],
    )
}

/// `M_P(ξ)` with `ξ₃` the (possibly complex) normal P slowness and `ξ_{S,3}`
/// the normal S slowness, both on their positive branches.
pub fn assemble_mp(xi1: f64, xi2: f64, xi3: C64, xi_s3: f64, p: &PointModuli) -> Matrix4<C64> {
    let (l, m, rho) = (p.lambda, p.mu, p.rho);
    let s3 = re(xi_s3);
    Matrix4::new(
        xi3 * (-2.0 * m * xi1),
        -s3 * m,
        re(0.0),
        re(m * xi1),
        xi3 * (-2.0 * m * xi2),
        re(0.0),
        -s3 * m,
        re(m * xi2),
        re(rho - 2.0 * m * (xi1 * xi1 + xi2 * xi2)),
        re(l * xi1),
        re(l * xi2),
        -s3 * (l + 2.0 * m),
        re(0.0),
        re(xi1),
        re(xi2),
        -s3,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Incident {
    P(C64),
    S(CVec3),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionCoefficients {
    pub incident: Incident,
    pub snell: SnellData,
    pub a_p_minus: C64,
    pub a_s_minus: CVec3,
    pub det: C64,
}

impl ReflectionCoefficients {
    pub fn evanescent(&self) -> bool {
        self.snell.evanescent
    }

    /// Leading-order traction of incident plus reflected waves, evaluated
    /// from the stress tensors `λ tr(∇u) I + μ(∇u + ∇uᵀ)` of the three
    /// plane-wave gradients `a ⊗ ξ`.
    pub fn traction_residual(&self, p: &PointModuli) -> f64 {
        let stress = |a: &CVec3, xi: &CVec3| -> CVec3 {
            let g = a * xi.transpose();
            let s = Matrix3::identity().map(re) * (re(p.lambda) * g.trace()) + (g + g.transpose()) * re(p.mu);
            s.column(2).into_owned()
        };
        let sn = &self.snell;
        let xp = sn.xi_p_minus();
        let mut t = stress(&(xp * self.a_p_minus), &xp) + stress(&self.a_s_minus, &sn.xi_s_minus().map(re));
        let scale;
        match self.incident {
            Incident::P(a) => {
                let xi = sn.xi_p_plus().map(re);
                t += stress(&(xi * a), &xi);
                scale = a.norm() * xi.norm() * xi.norm();
            }
            Incident::S(a) => {
                let xi = sn.xi_s_plus().map(re);
                t += stress(&a, &xi);
                scale = a.norm() * xi.norm();
            }
        }
        let scale = scale * (p.lambda.abs() + 2.0 * p.mu);
        if scale == 0.0 {
            t.norm()
        } else {
            t.norm() / scale
        }
    }
}

fn solve(m: Matrix4<C64>, rhs: Vector4<C64>) -> Result<(Vector4<C64>, C64)> {
    let det = m.determinant();
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(det.norm() > 1e-14 * scale.powi(4)) {
        return Err(Error::Singular(format!("reflection matrix determinant {det}")));
    }
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("reflection system".into()))?;
    Ok((x, det))
}

/// P incidence: `M_P(ξ) x = −(B(ξ⁺)ξ⁺ A_P⁺, 0)`.
pub fn solve_p_incidence(a_p_plus: C64, xi: &Vector3<f64>, p: &PointModuli) -> Result<ReflectionCoefficients> {
    let sn = snell_reflect(xi, WaveMode::P, p.c_p(), p.c_s())?;
    let m = assemble_mp(sn.xi1, sn.xi2, sn.xi_p3, sn.xi_s3, p);
    let t2 = sn.xi1 * sn.xi1 + sn.xi2 * sn.xi2;
    let x3 = xi[2];
    let rhs = -Vector4::new(
        re(2.0 * p.mu * sn.xi1 * x3),
        re(2.0 * p.mu * sn.xi2 * x3),
        re(p.rho - 2.0 * p.mu * t2),
        re(0.0),
    ) * a_p_plus;
    let (x, det) = solve(m, rhs)?;
    Ok(ReflectionCoefficients {
        incident: Incident::P(a_p_plus),
        snell: sn,
        a_p_minus: x[0],
        a_s_minus: CVec3::new(x[1], x[2], x[3]),
        det,
    })
}

/// S incidence with `M_S(ξ) = M_P((ξ₁, ξ₂, ξ_{P,3}))`; `ξ_{P,3}` is complex
/// past the critical angle.
pub fn solve_s_incidence(a_s_plus: &CVec3, xi: &Vector3<f64>, p: &PointModuli) -> Result<ReflectionCoefficients> {
    let sn = snell_reflect(xi, WaveMode::S, p.c_p(), p.c_s())?;
    let xr = xi.map(re);
    let dot = a_s_plus.dot(&xr);
    if dot.norm() > 1e-10 * a_s_plus.norm() * xi.norm() {
        return Err(Error::NotTransversal(dot.norm()));
    }
    let m = assemble_mp(sn.xi1, sn.xi2, sn.xi_p3, sn.xi_s3, p);
    let b = -(traction_matrix(&xr, p) * a_s_plus);
    let (x, det) = solve(m, Vector4::new(b[0], b[1], b[2], re(0.0)))?;
    Ok(ReflectionCoefficients {
        incident: Incident::S(*a_s_plus),
        snell: sn,
        a_p_minus: x[0],
        a_s_minus: CVec3::new(x[1], x[2], x[3]),
        det,
    })
}

/// Unit SV and SH polarizations for an S slowness `ξ`. SH is horizontal and
/// normal to the plane of incidence, SV = SH × ξ̂.
pub fn s_polarizations(xi: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let t = Vector3::new(xi[0], xi[1], 0.0);
    let sh = if t.norm() > 1e-14 {
        Vector3::new(-xi[1], xi[0], 0.0).normalize()
    } else {
        Vector3::y()
    };
    let sv = sh.cross(xi).normalize();
    (sv, sh)
}

/// `det` of the reduced SV block for `ξ₂ = 0`: rows 1 and 3 of `M_P`
/// applied to `(1, 0, 0, 0)` and `(0, ξ_{S,3}, 0, ξ₁)`.
pub fn reduced_sv_determinant(xi1: f64, xi3: f64, xi_s3: f64, p: &PointModuli) -> f64 {
    let m = assemble_mp(xi1, 0.0, re(xi3), xi_s3, p);
    let e_sv = Vector4::new(re(0.0), re(xi_s3), re(0.0), re(xi1));
    let c1 = m.column(0).into_owned();
    let c2 = m * e_sv;
    (c1[0] * c2[2] - c2[0] * c1[2]).re
}

pub fn reduced_sv_determinant_closed_form(xi1: f64, xi3: f64, xi_s3: f64, mu: f64) -> f64 {
    let (a, s) = (xi1 * xi1, xi_s3 * xi_s3);
    mu * mu * (4.0 * a * xi3 * xi_s3 + a * a - 2.0 * a * s + s * s)
}

/// Orthonormal boundary frame `(t₁, t₂, ν)` at a boundary point, `ν` the
/// outward normal.
pub fn boundary_frame(dom: &ConvexDomain, x: &Vector3<f64>) -> Matrix3<f64> {
    let nu = dom.outward_normal(x);
    let (t1, t2) = orthonormal_complement(&nu);
    Matrix3::from_rows(&[t1.transpose(), t2.transpose(), nu.transpose()])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchAmplitude {
    /// Scalar `A_P`; the displacement amplitude is `A_P ξ`.
    P(C64),
    /// Cartesian displacement amplitude, transverse to the ray.
    S(CVec3),
}

#[derive(Clone, Debug)]
pub struct ReflectionNode {
    pub depth: usize,
    pub path: GeodesicPath,
    pub amplitude: BranchAmplitude,
    /// Reflection at the exit of `path`, absent at the depth cap.
    pub reflection: Option<ReflectionCoefficients>,
    pub children: Vec<ReflectionNode>,
}

impl ReflectionNode {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(|c| c.count()).sum::<usize>()
    }

    pub fn max_traction_residual(&self) -> Result<f64> {
        let mut r: f64 = 0.0;
        if let Some(rc) = &self.reflection {
            let x = Vector3::from(self.path.exit.x);
            r = rc.traction_residual(&self.path.medium().moduli_at(&x)?);
        }
        for c in &self.children {
            r = r.max(c.max_traction_residual()?);
        }
        Ok(r)
    }
}

/// Iterates single reflections along the broken ray up to `depth`
/// reflections. Amplitudes are the plane-wave coefficients carried along
/// each segment; S polarizations keep their components in the parallel
/// frame. Evanescent P branches are recorded but not traced.
pub fn reflection_tree(
    m: &IsotropicMedium,
    dom: &ConvexDomain,
    x0: &Vector3<f64>,
    dir: &Vector3<f64>,
    amplitude: BranchAmplitude,
    depth: usize,
    opts: &TraceOptions,
) -> Result<ReflectionNode> {
    let mode = match amplitude {
        BranchAmplitude::P(_) => WaveMode::P,
        BranchAmplitude::S(_) => WaveMode::S,
    };
    build_node(m, dom, mode, x0, dir, 0.0, amplitude, 0, depth, opts)
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    m: &IsotropicMedium,
    dom: &ConvexDomain,
    mode: WaveMode,
    x0: &Vector3<f64>,
    dir: &Vector3<f64>,
    t0: f64,
    amplitude: BranchAmplitude,
    level: usize,
    depth: usize,
    opts: &TraceOptions,
) -> Result<ReflectionNode> {
    let path = trace_geodesic(m, mode, x0, dir, dom, t0, opts)?;
    let mut node = ReflectionNode {
        depth: level,
        path,
        amplitude,
        reflection: None,
        children: Vec::new(),
    };
    if level >= depth {
        return Ok(node);
    }
    let xb = Vector3::from(node.path.exit.x);
    let vb = Vector3::from(node.path.exit.v);
    let p = m.moduli_at(&xb)?;
    let c = p.wavespeed(mode);
    let r = boundary_frame(dom, &xb);
    // incident slowness in the local frame, renormalized against round-off
    let xi = (r * vb).normalize() / c;
    let rc = match amplitude {
        BranchAmplitude::P(a) => solve_p_incidence(a, &xi, &p)?,
        BranchAmplitude::S(a) => {
            let mut a_loc = r.map(re) * a;
            let xr = xi.map(re);
            a_loc -= xr * (a_loc.dot(&xr) / xr.dot(&xr));
            solve_s_incidence(&a_loc, &xi, &p)?
        }
    };
    let rt = r.transpose();
    let start = xb - dom.outward_normal(&xb) * (1e-9 * dom.extent());
    let t1 = node.path.exit.t;
    if !rc.evanescent() {
        let xp = rt * rc.snell.xi_p_minus().map(|z| z.re);
        node.children.push(build_node(
            m,
            dom,
            WaveMode::P,
            &start,
            &xp,
            t1,
            BranchAmplitude::P(rc.a_p_minus),
            level + 1,
            depth,
            opts,
        )?);
    }
    let xs = rt * rc.snell.xi_s_minus();
    node.children.push(build_node(
        m,
        dom,
        WaveMode::S,
        &start,
        &xs,
        t1,
        BranchAmplitude::S(rt.map(re) * rc.a_s_minus),
        level + 1,
        depth,
        opts,
    )?);
    node.reflection = Some(rc);
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_signs() {
        assert_eq!(sqrt_branch(re(4.0)), re(2.0));
        assert_eq!(sqrt_branch(re(-4.0)), C64::new(0.0, 2.0));
        assert_eq!(sqrt_branch(C64::new(-4.0, -0.0)), C64::new(0.0, 2.0));
        assert!(sqrt_branch(C64::new(1.0, -1e-3)).im > 0.0);
    }
}
