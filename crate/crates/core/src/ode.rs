//! Adaptive Dormand–Prince 5(4) integration on fixed-size state arrays.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One trial step of size `h`; returns the 5th-order solution and the
/// scaled error norm.
fn trial<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k0: &[f64; N],
    h: f64,
    opts: &OdeOptions,
) -> Result<([f64; N], f64, [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    k[0] = *k0;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys)?;
    }
    let mut y5 = *y;
    let mut err = 0.0;
    for i in 0..N {
        let mut d5 = 0.0;
        let mut d4 = 0.0;
        for s in 0..7 {
            d5 += B5[s] * k[s][i];
            d4 += B4[s] * k[s][i];
        }
        y5[i] += h * d5;
        let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
        let e = h * (d5 - d4) / sc;
        err += e * e;
    }
    // FSAL: stage 7 is evaluated at the new point
    Ok((y5, (err / N as f64).sqrt(), k[6]))
}

/// Integrates from `t0` to `t1` (either direction). After every accepted
/// step `observe(t, &mut y)` may modify the state (projection onto a
/// constraint) and returns `false` to stop early. Returns the final
/// parameter and state.
pub fn integrate<const N: usize, F, O>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    mut observe: O,
) -> Result<(f64, [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    O: FnMut(f64, &mut [f64; N]) -> Result<bool>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((t0, y0));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h_init.min(span.abs()).min(opts.h_max);
    let mut k0 = f(t, &y)?;
    let mut steps = 0;
    while dir * (t1 - t) > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::TooManySteps(opts.max_steps));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let (y5, err, k_end) = trial(&f, t, &y, &k0, dir * hs, opts)?;
        if err <= 1.0 {
            t = if last { t1 } else { t + dir * hs };
            y = y5;
            let projected = {
                let before = y;
                let keep = observe(t, &mut y)?;
                (keep, before != y)
            };
            if !projected.0 {
                return Ok((t, y));
            }
            k0 = if projected.1 { f(t, &y)? } else { k_end };
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (hs * fac).min(opts.h_max);
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.25)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h = hs * fac;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { at: t });
            }
        }
    }
    Ok((t, y))
}

/// Plain integration to `t1` with no observer.
pub fn solve<const N: usize, F>(f: F, t0: f64, y0: [f64; N], t1: f64, opts: &OdeOptions) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    integrate(f, t0, y0, t1, opts, |_, _| Ok(true)).map(|(_, y)| y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let f = |_t: f64, y: &[f64; 2]| Ok([y[1], -y[0]]);
        let y = solve(f, 0.0, [1.0, 0.0], 10.0, &OdeOptions::default()).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn backward_integration() {
        let f = |_t: f64, y: &[f64; 1]| Ok([y[0]]);
        let y = solve(f, 1.0, [1.0], 0.0, &OdeOptions::default()).unwrap();
        assert!((y[0] - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn observer_can_stop_early() {
        let f = |_t: f64, _y: &[f64; 1]| Ok([1.0]);
        let opts = OdeOptions {
            h_max: 0.1,
            ..Default::default()
        };
        let (t, y) = integrate(f, 0.0, [0.0], 10.0, &opts, |t, _| Ok(t < 0.55)).unwrap();
        assert!(t >= 0.55 && t < 0.7);
        assert!((y[0] - t).abs() < 1e-12);
    }

    #[test]
    fn step_budget_is_enforced() {
        let f = |_t: f64, y: &[f64; 2]| Ok([y[1], -y[0]]);
        let opts = OdeOptions {
            max_steps: 5,
            h_max: 0.01,
            ..Default::default()
        };
        assert!(matches!(
            solve(f, 0.0, [1.0, 0.0], 10.0, &opts),
            Err(Error::TooManySteps(5))
        ));
    }
}
