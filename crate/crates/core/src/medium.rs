//! Isotropic elastic media with linear and third-order moduli.

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};
use crate::jet::Jet;
use nalgebra::Vector3;
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum WaveMode {
    P,
    S,
}

impl std::str::FromStr for WaveMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" | "p" => Ok(WaveMode::P),
            "S" | "s" => Ok(WaveMode::S),
            _ => Err(Error::InvalidInput(format!("unknown wave mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for WaveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WaveMode::P => "P",
            WaveMode::S => "S",
        })
    }
}

/// The six coefficients sampled at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointModuli {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PointModuli {
    pub fn new(lambda: f64, mu: f64, rho: f64, a: f64, b: f64, c: f64) -> Self {
        PointModuli {
            lambda,
            mu,
            rho,
            a,
            b,
            c,
        }
    }

    pub fn c_p(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho).sqrt()
    }

    pub fn c_s(&self) -> f64 {
        (self.mu / self.rho).sqrt()
    }

    pub fn wavespeed(&self, mode: WaveMode) -> f64 {
        match mode {
            WaveMode::P => self.c_p(),
            WaveMode::S => self.c_s(),
        }
    }

    /// Strong ellipticity and positive density.
    pub fn is_admissible(&self) -> bool {
        self.mu > 0.0 && 3.0 * self.lambda + 2.0 * self.mu > 0.0 && self.rho > 0.0
    }
}

#[derive(Clone, Debug)]
pub struct IsotropicMedium {
    pub lambda: ScalarField,
    pub mu: ScalarField,
    pub rho: ScalarField,
    pub mod_a: ScalarField,
    pub mod_b: ScalarField,
    pub mod_c: ScalarField,
}

impl IsotropicMedium {
    pub fn constant(m: PointModuli) -> Self {
        IsotropicMedium {
            lambda: ScalarField::constant(m.lambda),
            mu: ScalarField::constant(m.mu),
            rho: ScalarField::constant(m.rho),
            mod_a: ScalarField::constant(m.a),
            mod_b: ScalarField::constant(m.b),
            mod_c: ScalarField::constant(m.c),
        }
    }

    /// Builds a medium from expression sources `(lambda, mu, rho, A, B, C)`.
    pub fn from_expressions(src: [&str; 6]) -> Result<Self> {
        Ok(IsotropicMedium {
            lambda: ScalarField::expression(src[0])?,
            mu: ScalarField::expression(src[1])?,
            rho: ScalarField::expression(src[2])?,
            mod_a: ScalarField::expression(src[3])?,
            mod_b: ScalarField::expression(src[4])?,
            mod_c: ScalarField::expression(src[5])?,
        })
    }

    pub fn is_homogeneous(&self) -> bool {
        [&self.lambda, &self.mu, &self.rho, &self.mod_a, &self.mod_b, &self.mod_c]
            .iter()
            .all(|f| f.is_constant())
    }

    pub fn moduli_at(&self, x: &Vector3<f64>) -> Result<PointModuli> {
        Ok(PointModuli {
            lambda: self.lambda.value(x)?,
            mu: self.mu.value(x)?,
            rho: self.rho.value(x)?,
            a: self.mod_a.value(x)?,
            b: self.mod_b.value(x)?,
            c: self.mod_c.value(x)?,
        })
    }

    fn stiffness_jet(&self, x: &Vector3<f64>, mode: WaveMode) -> Result<Jet> {
        Ok(match mode {
            WaveMode::P => self.lambda.jet(x)? + self.mu.jet(x)?.scale(2.0),
            WaveMode::S => self.mu.jet(x)?,
        })
    }

    /// Wavespeed with gradient and Hessian at `x`.
    pub fn wavespeed_jet(&self, x: &Vector3<f64>, mode: WaveMode) -> Result<Jet> {
        let k = self.stiffness_jet(x, mode)?;
        let rho = self.rho.jet(x)?;
        if !(rho.value > 0.0) || !(k.value > 0.0) {
            return Err(Error::InvalidMedium {
                point: *x,
                reason: format!(
                    "{mode}-wavespeed radicand not positive (stiffness {:.6e}, density {:.6e})",
                    k.value, rho.value
                ),
            });
        }
        Ok((k / rho).sqrt())
    }

    pub fn wavespeed(&self, x: &Vector3<f64>, mode: WaveMode) -> Result<f64> {
        let k = self.stiffness_jet(x, mode)?.value;
        let rho = self.rho.value(x)?;
        if !(rho > 0.0) || !(k > 0.0) {
            return Err(Error::InvalidMedium {
                point: *x,
                reason: format!("{mode}-wavespeed radicand not positive"),
            });
        }
        Ok((k / rho).sqrt())
    }

    /// Parses a TOML medium description. Each of `lambda`, `mu`, `rho`, `A`,
    /// `B`, `C` is a number, an expression string, or a table
    /// `{ grid = "file" }` whose path is resolved against `base_dir`.
    /// `A`, `B` and `C` default to zero.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let loc = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}: ")
                })
                .unwrap_or_default();
            Error::MediumDefinition(format!("{loc}{}", e.message()))
        })?;
        for key in table.keys() {
            if !["lambda", "mu", "rho", "A", "B", "C"].contains(&key.as_str()) {
                return Err(Error::MediumDefinition(format!("unknown key `{key}`")));
            }
        }
        let field = |key: &str, required: bool| -> Result<ScalarField> {
            match table.get(key) {
                None if required => Err(Error::MediumDefinition(format!("missing `{key}`"))),
                None => Ok(ScalarField::constant(0.0)),
                Some(toml::Value::Float(v)) => Ok(ScalarField::constant(*v)),
                Some(toml::Value::Integer(v)) => Ok(ScalarField::constant(*v as f64)),
                Some(toml::Value::String(s)) => {
                    ScalarField::expression(s).map_err(|e| Error::MediumDefinition(format!("`{key}`: {e}")))
                }
                Some(toml::Value::Table(t)) => {
                    let file = t
                        .get("grid")
                        .and_then(|v| v.as_str())
                        .ok_or_else(|| Error::MediumDefinition(format!("`{key}`: table needs a `grid` path")))?;
                    let text = std::fs::read_to_string(base_dir.join(file))?;
                    Ok(ScalarField::grid(Grid::parse(&text)?))
                }
                Some(_) => Err(Error::MediumDefinition(format!(
                    "`{key}` must be a number, expression string, or grid table"
                ))),
            }
        };
        Ok(IsotropicMedium {
            lambda: field("lambda", true)?,
            mu: field("mu", true)?,
            rho: field("rho", true)?,
            mod_a: field("A", false)?,
            mod_b: field("B", false)?,
            mod_c: field("C", false)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub point: [f64; 3],
    pub condition: &'static str,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
    pub evaluation_errors: Vec<(usize, String)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.evaluation_errors.is_empty()
    }
}

pub fn validate_medium(m: &IsotropicMedium, samples: &[Vector3<f64>]) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("validation needs at least one sample".into()));
    }
    let mut violations = Vec::new();
    let mut evaluation_errors = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        match m.moduli_at(x) {
            Ok(p) => {
                let point = [x.x, x.y, x.z];
                let checks = [
                    ("mu > 0", p.mu),
                    ("3 lambda + 2 mu > 0", 3.0 * p.lambda + 2.0 * p.mu),
                    ("rho > 0", p.rho),
                ];
                for (condition, value) in checks {
                    if !(value > 0.0) {
                        violations.push(Violation {
                            point,
                            condition,
                            value,
                        });
                    }
                }
            }
            Err(e) => evaluation_errors.push((i, e.to_string())),
        }
    }
    Ok(ValidationReport {
        samples: samples.len(),
        violations,
        evaluation_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> IsotropicMedium {
        IsotropicMedium::constant(PointModuli::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0))
    }

    #[test]
    fn constant_wavespeeds() {
        let m = unit();
        let x = Vector3::zeros();
        assert!((m.wavespeed(&x, WaveMode::P).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((m.wavespeed(&x, WaveMode::S).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_cases() {
        let pts = [Vector3::zeros(), Vector3::new(0.5, 0.1, -0.2)];
        assert!(validate_medium(&unit(), &pts).unwrap().passed());

        let bad = IsotropicMedium::constant(PointModuli::new(1.0, -1.0, 1.0, 0.0, 0.0, 0.0));
        let r = validate_medium(&bad, &pts).unwrap();
        assert!(!r.passed());
        assert!(r.violations.iter().any(|v| v.condition == "mu > 0"));

        let edge = IsotropicMedium::constant(PointModuli::new(-0.6, 1.0, 1.0, 0.0, 0.0, 0.0));
        assert!(validate_medium(&edge, &pts).unwrap().passed());
        assert!(validate_medium(&edge, &[]).is_err());
    }

    #[test]
    fn grid_support_failure_is_reported_per_point() {
        let g = Grid::from_fn([4, 4, 4], [0.0; 3], [1.0; 3], |_| 1.0).unwrap();
        let mut m = unit();
        m.rho = ScalarField::grid(g);
        let r = validate_medium(&m, &[Vector3::new(1.0, 1.0, 1.0), Vector3::new(9.0, 0.0, 0.0)]).unwrap();
        assert_eq!(r.evaluation_errors.len(), 1);
        assert_eq!(r.evaluation_errors[0].0, 1);
    }

    #[test]
    fn wavespeed_gradient_matches_finite_differences() {
        let m = IsotropicMedium::from_expressions([
            "2 + 0.3 * sin(x1 + x2)",
            "1 + 0.1 * x3 * x3",
            "1 + 0.2 * x1 * x2",
            "0",
            "0",
            "0",
        ])
        .unwrap();
        let x = Vector3::new(0.2, -0.3, 0.4);
        for mode in [WaveMode::P, WaveMode::S] {
            let j = m.wavespeed_jet(&x, mode).unwrap();
            for i in 0..3 {
                let h = 1e-4;
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (m.wavespeed(&xp, mode).unwrap() - m.wavespeed(&xm, mode).unwrap()) / (2.0 * h);
                assert!((fd - j.grad[i]).abs() < 1e-6 * fd.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn toml_medium_file() {
        let text = "lambda = 2\nmu = \"1 + 0.1 * x1\"\nrho = 1.0\nA = 0.3\nB = 0.2\n";
        let m = IsotropicMedium::from_toml_str(text, Path::new(".")).unwrap();
        let p = m.moduli_at(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((p.mu - 1.1).abs() < 1e-15);
        assert_eq!(p.c, 0.0);
        assert!(IsotropicMedium::from_toml_str("lambda = 1\nmu = 1\n", Path::new(".")).is_err());
        assert!(IsotropicMedium::from_toml_str("lambda = 1\nmu = 1\nrho = 1\nD = 2\n", Path::new(".")).is_err());
        match IsotropicMedium::from_toml_str("lambda = 1\nmu = \"1 +\"\nrho = 1\n", Path::new(".")) {
            Err(Error::MediumDefinition(msg)) => assert!(msg.contains("column")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
