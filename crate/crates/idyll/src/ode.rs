//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)) and
//! adaptive Simpson quadrature.
//!
//! The integrator drives every shooting and ray computation in the crate, so
//! it favors tight, predictable error control over raw speed: PI step-size
//! control with conservative safety factors, mixed absolute/relative error
//! weighting, and exact landing on requested sample times.

use crate::error::{Error, Result};

/// Tolerances and limits for one integration.
#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_initial: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 10_000_000, h_initial: None }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol * 1e-2, ..Self::default() }
    }
}

// Dormand-Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// b5 - b4 (error weights), with the 7th stage (FSAL) entry
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates y' = f(t, y) from `t0` to `t1` (either direction), calling
/// `observer` at every requested time in `sample_times` (which must move
/// monotonically from t0 toward t1). Returns the state at `t1`.
pub fn integrate_with_samples<F, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    opts: &OdeOptions,
    sample_times: &[f64],
    mut observer: O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64]),
{
    let dim = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        for &ts in sample_times {
            observer(ts, y0);
        }
        return Ok(y0.to_vec());
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; dim]; 7];
    f(t, &y, &mut k[0])?;

    let mut h = opts.h_initial.unwrap_or_else(|| {
        // crude initial step from the first derivative scale
        let ynorm = weighted_norm(&y, &y, opts);
        let dnorm = weighted_norm(&k[0], &y, opts);
        let guess = if dnorm > 1e-12 { 0.01 * ynorm.max(1.0) / dnorm } else { span * 1e-3 };
        guess.min(span).max(span * 1e-12)
    }) * dir;

    let mut sample_iter = sample_times.iter().copied().peekable();
    // samples exactly at t0 fire immediately
    while let Some(&ts) = sample_iter.peek() {
        if (ts - t0).abs() <= 1e-14 * span.max(1.0) {
            observer(ts, &y);
            sample_iter.next();
        } else {
            break;
        }
    }

    let mut err_prev: f64 = 1.0;
    let mut ytmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut steps = 0usize;

    'outer: loop {
        if (t - t1) * dir >= 0.0 {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::MaxStepsExceeded(opts.max_steps));
        }
        // do not overstep the endpoint or the next sample time
        let mut h_step = h;
        if (t + h_step - t1) * dir > 0.0 {
            h_step = t1 - t;
        }
        let mut sample_hit = false;
        if let Some(&ts) = sample_iter.peek() {
            if (t + h_step - ts) * dir >= 0.0 {
                h_step = ts - t;
                sample_hit = true;
            }
        }
        if h_step.abs() < 1e-14 * t.abs().max(1.0) {
            // sample time coincides with current t
            if sample_hit {
                if let Some(ts) = sample_iter.next() {
                    observer(ts, &y);
                }
                continue 'outer;
            }
            break;
        }

        // stages
        for s in 0..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s + 1) {
                    acc += a * k[j][i];
                }
                ytmp[i] = y[i] + h_step * acc;
            }
            f(t + C[s] * h_step, &ytmp, &mut k[s + 1])?;
        }
        // 5th order solution is stage-6 combination (FSAL: ytmp after s = 5)
        y5.copy_from_slice(&ytmp);
        // error estimate
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, w) in E.iter().enumerate() {
                e += w * k[j][i];
            }
            e *= h_step;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / dim as f64).sqrt().max(1e-30);

        if err <= 1.0 {
            // accept
            t += h_step;
            y.copy_from_slice(&y5);
            let (head, tail) = k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]); // FSAL
            if sample_hit {
                if let Some(ts) = sample_iter.next() {
                    observer(ts, &y);
                }
            }
            // PI controller
            let fac = 0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            let fac = fac.clamp(0.2, 5.0);
            h = h_step * fac;
            err_prev = err;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h = h_step * fac;
            f(t, &y, &mut k[0])?; // k0 may hold a rejected FSAL slot
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    // flush samples at the endpoint
    for ts in sample_iter {
        if (ts - t1).abs() <= 1e-10 * span.max(1.0) {
            observer(ts, &y);
        }
    }
    Ok(y)
}

/// Endpoint-only integration.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_with_samples(f, t0, t1, y0, opts, &[], |_, _| {})
}

fn weighted_norm(v: &[f64], y: &[f64], opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..v.len() {
        let sc = opts.atol + opts.rtol * y[i].abs();
        acc += (v[i] / sc) * (v[i] / sc);
    }
    (acc / v.len() as f64).sqrt()
}

/// Adaptive Simpson quadrature of a scalar function to absolute tolerance.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
