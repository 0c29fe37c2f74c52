//! Scalar coefficient fields over R^3 with exact or interpolant derivatives.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use nalgebra::{Matrix3, Vector3};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub enum ScalarField {
    Constant(f64),
    Expression { source: String, expr: Arc<Expr> },
    Grid(Arc<Grid>),
}

impl ScalarField {
    pub fn constant(v: f64) -> Self {
        ScalarField::Constant(v)
    }

    pub fn expression(source: &str) -> Result<Self> {
        let expr = Expr::parse(source)?;
        Ok(ScalarField::Expression {
            source: source.to_string(),
            expr: Arc::new(expr),
        })
    }

    pub fn grid(grid: Grid) -> Self {
        ScalarField::Grid(Arc::new(grid))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ScalarField::Constant(_))
    }

    pub fn value(&self, x: &Vector3<f64>) -> Result<f64> {
        match self {
            ScalarField::Constant(v) => Ok(*v),
            ScalarField::Expression { expr, .. } => Ok(expr.eval(x)),
            ScalarField::Grid(g) => g.jet(x).map(|j| j.value),
        }
    }

    pub fn jet(&self, x: &Vector3<f64>) -> Result<Jet> {
        match self {
            ScalarField::Constant(v) => Ok(Jet::constant(*v)),
            ScalarField::Expression { expr, .. } => Ok(expr.eval_jet(x)),
            ScalarField::Grid(g) => g.jet(x),
        }
    }
}

/// Tabulated values on a uniform rectilinear grid, interpolated with
/// tensor-product Catmull-Rom cubics (C1 across cells).
///
/// Values are stored row-major with `x1` the slowest index:
/// `values[(i * ny + j) * nz + k]` sits at `origin + (i, j, k) * spacing`.
#[derive(Clone, Debug)]
pub struct Grid {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(dims: [usize; 3], origin: [f64; 3], spacing: [f64; 3], values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::MediumDefinition("grid needs at least 2 nodes per axis".into()));
        }
        if spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::MediumDefinition("grid spacing must be positive".into()));
        }
        let n = dims[0] * dims[1] * dims[2];
        if values.len() != n {
            return Err(Error::MediumDefinition(format!(
                "grid expects {n} values, got {}",
                values.len()
            )));
        }
        Ok(Grid {
            dims,
            origin,
            spacing,
            values,
        })
    }

    /// Samples a function on the grid nodes.
    pub fn from_fn(
        dims: [usize; 3],
        origin: [f64; 3],
        spacing: [f64; 3],
        f: impl Fn(&Vector3<f64>) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let x = Vector3::new(
                        origin[0] + i as f64 * spacing[0],
                        origin[1] + j as f64 * spacing[1],
                        origin[2] + k as f64 * spacing[2],
                    );
                    values.push(f(&x));
                }
            }
        }
        Grid::new(dims, origin, spacing, values)
    }

    /// Parses the plain-text grid format:
    ///
    /// ```text
    /// dims nx ny nz
    /// origin ox oy oz
    /// spacing hx hy hz
    /// v0 v1 v2 ...      (row-major, any whitespace layout)
    /// ```
    ///
    /// Lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dims = None;
        let mut origin = None;
        let mut spacing = None;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut words = line.split_whitespace();
            let head = words.next().unwrap_or("");
            let bad = |what: &str| Error::MediumDefinition(format!("grid line {}: invalid {what}", lineno + 1));
            match head {
                "dims" => {
                    let v: Vec<usize> = words
                        .map(|w| w.parse().map_err(|_| bad("dims")))
                        .collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(bad("dims"));
                    }
                    dims = Some([v[0], v[1], v[2]]);
                }
                "origin" | "spacing" => {
                    let v: Vec<f64> = words.map(|w| w.parse().map_err(|_| bad(head))).collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(bad(head));
                    }
                    if head == "origin" {
                        origin = Some([v[0], v[1], v[2]]);
                    } else {
                        spacing = Some([v[0], v[1], v[2]]);
                    }
                }
                _ => {
                    for w in line.split_whitespace() {
                        values.push(w.parse::<f64>().map_err(|_| bad("value"))?);
                    }
                }
            }
        }
        let missing = |k: &str| Error::MediumDefinition(format!("grid header missing `{k}`"));
        Grid::new(
            dims.ok_or_else(|| missing("dims"))?,
            origin.ok_or_else(|| missing("origin"))?,
            spacing.ok_or_else(|| missing("spacing"))?,
            values,
        )
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    pub fn jet(&self, x: &Vector3<f64>) -> Result<Jet> {
        let mut base = [0usize; 3];
        let mut w = [[[0.0; 4]; 3]; 3]; // [axis][derivative order][tap]
        for a in 0..3 {
            let n = self.dims[a];
            let u = (x[a] - self.origin[a]) / self.spacing[a];
            let upper = (n - 1) as f64;
            if !(u >= -1e-12 && u <= upper + 1e-12) {
                return Err(Error::OutsideSupport {
                    field: "grid".into(),
                    point: *x,
                });
            }
            let cell = (u.floor().max(0.0) as usize).min(n - 2);
            let t = u - cell as f64;
            base[a] = cell;
            let h = self.spacing[a];
            let (t2, t3) = (t * t, t * t * t);
            w[a][0] = [
                0.5 * (-t3 + 2.0 * t2 - t),
                0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
                0.5 * (-3.0 * t3 + 4.0 * t2 + t),
                0.5 * (t3 - t2),
            ];
            w[a][1] = [
                0.5 * (-3.0 * t2 + 4.0 * t - 1.0) / h,
                0.5 * (9.0 * t2 - 10.0 * t) / h,
                0.5 * (-9.0 * t2 + 8.0 * t + 1.0) / h,
                0.5 * (3.0 * t2 - 2.0 * t) / h,
            ];
            w[a][2] = [
                0.5 * (-6.0 * t + 4.0) / (h * h),
                0.5 * (18.0 * t - 10.0) / (h * h),
                0.5 * (-18.0 * t + 8.0) / (h * h),
                0.5 * (6.0 * t - 2.0) / (h * h),
            ];
        }
        let idx = |a: usize, tap: usize| -> usize {
            let i = base[a] as isize + tap as isize - 1;
            i.clamp(0, self.dims[a] as isize - 1) as usize
        };
        // derivative orders per axis for value, gradient and Hessian entries
        let mut value = 0.0;
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        for p in 0..4 {
            for q in 0..4 {
                for r in 0..4 {
                    let v = self.at(idx(0, p), idx(1, q), idx(2, r));
                    let d = |o: [usize; 3]| w[0][o[0]][p] * w[1][o[1]][q] * w[2][o[2]][r];
                    value += v * d([0, 0, 0]);
                    grad[0] += v * d([1, 0, 0]);
                    grad[1] += v * d([0, 1, 0]);
                    grad[2] += v * d([0, 0, 1]);
                    hess[(0, 0)] += v * d([2, 0, 0]);
                    hess[(1, 1)] += v * d([0, 2, 0]);
                    hess[(2, 2)] += v * d([0, 0, 2]);
                    hess[(0, 1)] += v * d([1, 1, 0]);
                    hess[(0, 2)] += v * d([1, 0, 1]);
                    hess[(1, 2)] += v * d([0, 1, 1]);
                }
            }
        }
        hess[(1, 0)] = hess[(0, 1)];
        hess[(2, 0)] = hess[(0, 2)];
        hess[(2, 1)] = hess[(1, 2)];
        Ok(Jet { value, grad, hess })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_reproduces_quadratics_in_interior_cells() {
        // Catmull-Rom is exact for quadratics away from the clamped edges.
        let f = |x: &Vector3<f64>| 1.0 + 0.5 * x.x - 0.25 * x.y * x.z + 0.3 * x.x * x.x;
        let g = Grid::from_fn([8, 8, 8], [-1.0; 3], [2.0 / 7.0; 3], f).unwrap();
        let x = Vector3::new(0.1, -0.05, 0.2);
        let j = g.jet(&x).unwrap();
        assert!((j.value - f(&x)).abs() < 1e-12);
        assert!((j.grad[0] - (0.5 + 0.6 * x.x)).abs() < 1e-12);
        assert!((j.grad[1] + 0.25 * x.z).abs() < 1e-12);
        assert!((j.hess[(0, 0)] - 0.6).abs() < 1e-10);
        assert!((j.hess[(1, 2)] + 0.25).abs() < 1e-10);
    }

    #[test]
    fn grid_rejects_points_outside() {
        let g = Grid::from_fn([4, 4, 4], [0.0; 3], [1.0; 3], |_| 1.0).unwrap();
        assert!(matches!(
            g.jet(&Vector3::new(3.5, 1.0, 1.0)),
            Err(Error::OutsideSupport { .. })
        ));
    }

    #[test]
    fn grid_text_format() {
        let text = "# demo\ndims 2 2 2\norigin 0 0 0\nspacing 1 1 1\n0 1\n2 3\n4 5 6 7\n";
        let g = Grid::parse(text).unwrap();
        // row-major with x1 slowest
        assert_eq!(g.at(1, 0, 1), 5.0);
        assert_eq!(g.at(0, 1, 0), 2.0);
        assert!(Grid::parse("dims 2 2\norigin 0 0 0\nspacing 1 1 1\n").is_err());
        assert!(Grid::parse("dims 2 2 2\norigin 0 0 0\nspacing 1 1 1\n1 2 3").is_err());
    }
}
