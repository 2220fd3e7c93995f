//! Adaptive Runge-Kutta-Fehlberg 4(5) integration.
//!
//! Small fixed-dimension integrator used for rarefaction curves and
//! isentrope quadrature. The embedded 4th-order solution provides the
//! per-step error estimate; accepted-step estimates are accumulated so
//! callers can bound the total evaluation error.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RkfOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step (signed). Zero means |t1 - t0| / 64.
    pub h0: f64,
    /// Smallest permissible |step|.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for RkfOptions {
    fn default() -> Self {
        RkfOptions { rtol: 1e-10, atol: 1e-12, h0: 0.0, h_min: 1e-30, max_steps: 100_000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integration<const N: usize> {
    pub y: [f64; N],
    pub t: f64,
    /// Per-component sum of |embedded error estimates| over accepted steps,
    /// times a safety factor of 10.
    pub err_bound: [f64; N],
    pub steps: usize,
}

/// One embedded RKF45 step from `(t, y)` with step `h`.
///
/// Returns the 5th-order solution and the per-component error estimate.
pub fn rkf45_step<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t: f64,
    y: &[f64; N],
    h: f64,
) -> Result<([f64; N], [f64; N])> {
    let combine = |y: &[f64; N], terms: &[(f64, &[f64; N])]| {
        let mut out = *y;
        for i in 0..N {
            for (c, k) in terms {
                out[i] += h * c * k[i];
            }
        }
        out
    };

    let k1 = f(t, y)?;
    let k2 = f(t + h / 4.0, &combine(y, &[(0.25, &k1)]))?;
    let k3 = f(t + 3.0 * h / 8.0, &combine(y, &[(3.0 / 32.0, &k1), (9.0 / 32.0, &k2)]))?;
    let k4 = f(
        t + 12.0 * h / 13.0,
        &combine(y, &[(1932.0 / 2197.0, &k1), (-7200.0 / 2197.0, &k2), (7296.0 / 2197.0, &k3)]),
    )?;
    let k5 = f(
        t + h,
        &combine(
            y,
            &[(439.0 / 216.0, &k1), (-8.0, &k2), (3680.0 / 513.0, &k3), (-845.0 / 4104.0, &k4)],
        ),
    )?;
    let k6 = f(
        t + h / 2.0,
        &combine(
            y,
            &[
                (-8.0 / 27.0, &k1),
                (2.0, &k2),
                (-3544.0 / 2565.0, &k3),
                (1859.0 / 4104.0, &k4),
                (-11.0 / 40.0, &k5),
            ],
        ),
    )?;

    let mut y5 = *y;
    let mut err = [0.0; N];
    for i in 0..N {
        y5[i] += h
            * (16.0 / 135.0 * k1[i]
                + 6656.0 / 12825.0 * k3[i]
                + 28561.0 / 56430.0 * k4[i]
                - 9.0 / 50.0 * k5[i]
                + 2.0 / 55.0 * k6[i]);
        err[i] = h
            * (1.0 / 360.0 * k1[i] - 128.0 / 4275.0 * k3[i] - 2197.0 / 75240.0 * k4[i]
                + 1.0 / 50.0 * k5[i]
                + 2.0 / 55.0 * k6[i]);
    }
    Ok((y5, err))
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` with adaptive steps.
///
/// A failing right-hand side (out-of-domain state) rejects the step and
/// retries with a smaller one; persistent failure below `h_min` is a
/// stiff-integration error carrying the last accepted state.
pub fn integrate<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    opts: &RkfOptions,
) -> Result<Integration<N>> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Integration { y: y0, t: t0, err_bound: [0.0; N], steps: 0 });
    }
    let dir = span.signum();
    let mut h = if opts.h0 != 0.0 { opts.h0.abs() * dir } else { span / 64.0 };
    let mut t = t0;
    let mut y = y0;
    let mut err_bound = [0.0; N];
    let mut steps = 0;

    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::Integration(format!(
                "step budget exhausted at t = {t} (of {t1}), last state {y:?}"
            )));
        }
        if h.abs() > (t1 - t).abs() {
            h = t1 - t;
        }
        match rkf45_step(f, t, &y, h) {
            Ok((y5, err)) => {
                let mut norm: f64 = 0.0;
                for i in 0..N {
                    let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                    norm = norm.max(err[i].abs() / scale);
                }
                if norm <= 1.0 {
                    t += h;
                    y = y5;
                    for i in 0..N {
                        err_bound[i] += 10.0 * err[i].abs();
                    }
                    steps += 1;
                    let grow = if norm > 0.0 { 0.9 * norm.powf(-0.2) } else { 5.0 };
                    h *= grow.clamp(0.2, 5.0);
                } else {
                    h *= (0.9 * norm.powf(-0.25)).clamp(0.1, 0.9);
                    if h.abs() < opts.h_min {
                        return Err(Error::Integration(format!(
                            "step underflow (|h| < {}) at t = {t}, state {y:?}",
                            opts.h_min
                        )));
                    }
                }
            }
            Err(_) if h.abs() > opts.h_min => {
                h *= 0.5;
            }
            // persistent failure at the minimal step: surface the cause
            Err(e) => return Err(e),
        }
    }
    Ok(Integration { y, t, err_bound, steps })
}
