//! Convex domains described by a signed boundary function `b` with
//! `Ω = {b < 0}`.

use crate::error::{Error, Result};
use crate::medium::{IsotropicMedium, WaveMode};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ConvexDomain {
    Ball { center: [f64; 3], radius: f64 },
    Ellipsoid { center: [f64; 3], semi_axes: [f64; 3] },
}

impl ConvexDomain {
    pub fn ball(center: Vector3<f64>, radius: f64) -> Self {
        ConvexDomain::Ball {
            center: center.into(),
            radius,
        }
    }

    pub fn unit_ball() -> Self {
        Self::ball(Vector3::zeros(), 1.0)
    }

    pub fn ellipsoid(center: Vector3<f64>, semi_axes: Vector3<f64>) -> Self {
        ConvexDomain::Ellipsoid {
            center: center.into(),
            semi_axes: semi_axes.into(),
        }
    }

    /// Parses `ball:R`, `ball:R@cx,cy,cz`, `ellipsoid:a,b,c` or
    /// `ellipsoid:a,b,c@cx,cy,cz`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse domain `{text}`"));
        let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
        let (shape, center) = match rest.split_once('@') {
            Some((s, c)) => (s, Some(c)),
            None => (rest, None),
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|w| w.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        let center = match center {
            Some(c) => {
                let v = nums(c)?;
                if v.len() != 3 {
                    return Err(bad());
                }
                Vector3::new(v[0], v[1], v[2])
            }
            None => Vector3::zeros(),
        };
        let dom = match kind {
            "ball" => {
                let v = nums(shape)?;
                if v.len() != 1 {
                    return Err(bad());
                }
                Self::ball(center, v[0])
            }
            "ellipsoid" => {
                let v = nums(shape)?;
                if v.len() != 3 {
                    return Err(bad());
                }
                Self::ellipsoid(center, Vector3::new(v[0], v[1], v[2]))
            }
            _ => return Err(bad()),
        };
        let ok = match &dom {
            ConvexDomain::Ball { radius, .. } => *radius > 0.0,
            ConvexDomain::Ellipsoid { semi_axes, .. } => semi_axes.iter().all(|&a| a > 0.0),
        };
        if !ok {
            return Err(Error::InvalidInput("domain extents must be positive".into()));
        }
        Ok(dom)
    }

    fn center(&self) -> Vector3<f64> {
        match self {
            ConvexDomain::Ball { center, .. } | ConvexDomain::Ellipsoid { center, .. } => Vector3::from(*center),
        }
    }

    fn axes(&self) -> Vector3<f64> {
        match self {
            ConvexDomain::Ball { radius, .. } => Vector3::repeat(*radius),
            ConvexDomain::Ellipsoid { semi_axes, .. } => Vector3::from(*semi_axes),
        }
    }

    /// Boundary function `(Σ (u_i/a_i)² − 1) · m / 2` with `m` the smallest
    /// semi-axis, so that `|∇b| = 1` on a ball's boundary.
    pub fn b(&self, x: &Vector3<f64>) -> f64 {
        let (u, a) = (x - self.center(), self.axes());
        let m = a.min();
        let q: f64 = (0..3).map(|i| (u[i] / a[i]).powi(2)).sum();
        0.5 * m * (q - 1.0)
    }

    pub fn grad_b(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let (u, a) = (x - self.center(), self.axes());
        let m = a.min();
        Vector3::from_fn(|i, _| m * u[i] / (a[i] * a[i]))
    }

    pub fn hess_b(&self, _x: &Vector3<f64>) -> Matrix3<f64> {
        let a = self.axes();
        let m = a.min();
        Matrix3::from_diagonal(&Vector3::from_fn(|i, _| m / (a[i] * a[i])))
    }

    pub fn outward_normal(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.grad_b(x).normalize()
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        self.b(x) < 0.0
    }

    /// Bounding radius about the center.
    pub fn extent(&self) -> f64 {
        self.axes().max()
    }

    /// Exit parameters `(s_minus, s_plus)` of the straight line `x + s d`.
    pub fn line_intersections(&self, x: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
        let (u, a) = (x - self.center(), self.axes());
        let p = u.component_div(&a);
        let q = d.component_div(&a);
        let (qa, qb, qc) = (q.dot(&q), 2.0 * p.dot(&q), p.dot(&p) - 1.0);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let r = disc.sqrt();
        Some(((-qb - r) / (2.0 * qa), (-qb + r) / (2.0 * qa)))
    }

    /// Quasi-uniform boundary points (Fibonacci lattice on the sphere,
    /// mapped onto the boundary).
    pub fn boundary_points(&self, n: usize) -> Vec<Vector3<f64>> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let (c, a) = (self.center(), self.axes());
        (0..n)
            .map(|k| {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let th = golden * k as f64;
                let s = Vector3::new(r * th.cos(), r * th.sin(), z);
                c + s.component_mul(&a)
            })
            .collect()
    }

    /// Necessary sample condition for strict convexity of the boundary with
    /// respect to `c⁻² dx²`: at each point and tangent direction,
    /// `∇∇b(v, v)/|∇b| − ∂_ν c / c > 0`. Returns the smallest margin found.
    pub fn convexity_margin(&self, m: &IsotropicMedium, mode: WaveMode, n_points: usize) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for x in self.boundary_points(n_points) {
            let g = self.grad_b(&x);
            let nu = g.normalize();
            let hb = self.hess_b(&x);
            let cj = m.wavespeed_jet(&x, mode)?;
            let dn = cj.grad.dot(&nu) / cj.value;
            let t1 = if nu.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let t1 = (t1 - nu * nu.dot(&t1)).normalize();
            let t2 = nu.cross(&t1);
            for k in 0..8 {
                let th = std::f64::consts::PI * k as f64 / 8.0;
                let v = t1 * th.cos() + t2 * th.sin();
                let margin = v.dot(&(hb * v)) / g.norm() - dn;
                worst = worst.min(margin);
            }
        }
        Ok(worst)
    }
}
