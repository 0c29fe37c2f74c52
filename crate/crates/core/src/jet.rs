//! Second-order forward-mode derivatives in three variables.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `(x1, x2, x3)`. Arithmetic on jets applies the chain rule, so an
//! expression evaluated on jets yields exact first and second derivatives.

use nalgebra::{Matrix3, Vector3};
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vector3<f64>,
    pub hess: Matrix3<f64>,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: Vector3::zeros(),
            hess: Matrix3::zeros(),
        }
    }

    /// The coordinate function `x_{axis+1}` evaluated at `x`.
    pub fn variable(x: &Vector3<f64>, axis: usize) -> Self {
        let mut grad = Vector3::zeros();
        grad[axis] = 1.0;
        Jet {
            value: x[axis],
            grad,
            hess: Matrix3::zeros(),
        }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    pub fn chain(&self, g: f64, dg: f64, d2g: f64) -> Self {
        Jet {
            value: g,
            grad: self.grad * dg,
            hess: self.hess * dg + self.grad * self.grad.transpose() * d2g,
        }
    }

    pub fn recip(&self) -> Self {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn sqrt(&self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn powf(&self, p: f64) -> Self {
        let v = self.value;
        if p == 0.0 {
            return Jet::constant(1.0);
        }
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn pow(&self, exponent: &Jet) -> Self {
        if exponent.grad == Vector3::zeros() && exponent.hess == Matrix3::zeros() {
            self.powf(exponent.value)
        } else {
            (*exponent * self.ln()).exp()
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Jet {
            value: self.value * k,
            grad: self.grad * k,
            hess: self.hess * k,
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            value: self.value + o.value,
            grad: self.grad + o.grad,
            hess: self.hess + o.hess,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            value: self.value - o.value,
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let cross = self.grad * o.grad.transpose();
        Jet {
            value: self.value * o.value,
            grad: self.grad * o.value + o.grad * self.value,
            hess: self.hess * o.value + o.hess * self.value + cross + cross.transpose(),
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, k: f64) -> Jet {
        self.value += k;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&Vector3<f64>) -> Jet, x: Vector3<f64>) {
        let h = 1e-4;
        let j = f(&x);
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let g = (f(&xp).value - f(&xm).value) / (2.0 * h);
            assert!((g - j.grad[i]).abs() < 1e-6 * (1.0 + g.abs()), "grad {i}");
            let hrow = (f(&xp).grad - f(&xm).grad) / (2.0 * h);
            for k in 0..3 {
                assert!(
                    (hrow[k] - j.hess[(i, k)]).abs() < 1e-6 * (1.0 + hrow[k].abs()),
                    "hess {i}{k}"
                );
            }
        }
    }

    #[test]
    fn composite_matches_finite_differences() {
        let f = |x: &Vector3<f64>| {
            let a = Jet::variable(x, 0);
            let b = Jet::variable(x, 1);
            let c = Jet::variable(x, 2);
            (a * b + c.sin()).exp() / (Jet::constant(2.0) + c * c).sqrt() + b.pow(&a)
        };
        fd_check(f, Vector3::new(0.3, 1.2, -0.4));
    }

    #[test]
    fn hessian_is_symmetric() {
        let x = Vector3::new(0.7, 0.2, 1.1);
        let a = Jet::variable(&x, 0);
        let b = Jet::variable(&x, 1);
        let c = Jet::variable(&x, 2);
        let j = (a * b * c).cos() / (a + b * c);
        assert!((j.hess - j.hess.transpose()).norm() < 1e-14);
    }
}
