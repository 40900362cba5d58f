//! Dormand–Prince 5(4) with a PI step-size controller, for small fixed-size
//! systems.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow (h = {h:e}) at t = {t}; the system is stiff or singular")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error("invalid integration request: {0}")]
    BadRequest(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Options {
    pub fn with_tol(tol: f64) -> Self {
        Options { rtol: tol, atol: tol, ..Options::default() }
    }
}

impl Default for Options {
    fn default() -> Self {
        Options {
            rtol: 1e-9,
            atol: 1e-9,
            h_init: None,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

/// Returned by the step monitor after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    /// Requested output times actually reached.
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Set when the monitor stopped the run: last accepted (t, y).
    pub stopped: Option<(f64, [f64; N])>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const BETA: f64 = 0.04;
const SAFETY: f64 = 0.9;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrates `rhs` from `(t0, y0)` and samples at every time in `t_out`
/// (ascending, each ≥ t0). `monitor` sees every accepted step and may stop
/// the run early, in which case the samples reached so far are returned.
pub fn dopri5<const N: usize, F, G>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_out: &[f64],
    opts: &Options,
    mut monitor: G,
) -> Result<Solution<N>, IntegrateError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    G: FnMut(f64, &[f64; N]) -> Control,
{
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(IntegrateError::BadRequest("tolerances must be positive"));
    }
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(IntegrateError::BadRequest("output times must be ascending and not before t0"));
    }
    let mut sol = Solution {
        times: Vec::with_capacity(t_out.len()),
        states: Vec::with_capacity(t_out.len()),
        stopped: None,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let t_end = t_out.last().copied().unwrap_or(t0);
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&mut rhs, t, &y, &k1, opts))
        .min(opts.h_max);
    let mut err_old: f64 = 1e-4;
    let mut next = 0;
    let mut steps = 0usize;

    loop {
        while next < t_out.len() && t_out[next] <= t {
            sol.times.push(t_out[next]);
            sol.states.push(y);
            next += 1;
        }
        if next == t_out.len() || t >= t_end {
            return Ok(sol);
        }
        if steps >= opts.max_steps {
            return Err(IntegrateError::MaxSteps { t });
        }
        steps += 1;

        let target = t_out[next];
        let landing = t + h >= target;
        let h_step = if landing { target - t } else { h };
        if h_step < opts.h_min && !landing {
            return Err(IntegrateError::StepUnderflow { t, h: h_step });
        }

        let k2 = rhs(t + C2 * h_step, &axpy(&y, h_step, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h_step, &axpy(&y, h_step, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(t + C4 * h_step, &axpy(&y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            t + C5 * h_step,
            &axpy(&y, h_step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h_step,
            &axpy(&y, h_step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h_step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = rhs(t + h_step, &y_new);

        let mut err = 0.0;
        for i in 0..N {
            let e = h_step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        err = (err / N as f64).sqrt();
        if !err.is_finite() {
            err = 1e10;
        }

        let fac11 = err.powf(0.2 - 0.75 * BETA);
        if err <= 1.0 {
            let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(0.1, 5.0);
            err_old = err.max(1e-4);
            t = if landing { target } else { t + h_step };
            y = y_new;
            k1 = k7;
            sol.accepted_steps += 1;
            let h_next = (h_step / fac).min(opts.h_max);
            // a shortened landing step must not shrink the working step
            h = if landing { h.max(h_next) } else { h_next };
            if monitor(t, &y) == Control::Stop {
                while next < t_out.len() && t_out[next] <= t {
                    sol.times.push(t_out[next]);
                    sol.states.push(y);
                    next += 1;
                }
                sol.stopped = Some((t, y));
                return Ok(sol);
            }
        } else {
            sol.rejected_steps += 1;
            h = h_step / (fac11 / SAFETY).min(5.0);
            if h < opts.h_min {
                return Err(IntegrateError::StepUnderflow { t, h });
            }
        }
    }
}

fn initial_step<const N: usize, F>(rhs: &mut F, t: f64, y: &[f64; N], f0: &[f64; N], opts: &Options) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let sc = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let norm = |v: &[f64; N]| ((0..N).map(|i| (v[i] / sc(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let f1 = rhs(t + h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-3
    }
}

/// `n + 1` equally spaced times on [0, t_max].
pub fn uniform_times(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sol = dopri5(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], &[0.0, 1.0, 5.0], &Options::with_tol(1e-11), |_, _| Control::Continue)
            .unwrap();
        assert_eq!(sol.times, vec![0.0, 1.0, 5.0]);
        assert!((sol.states[1][0] - (-1f64).exp()).abs() < 1e-10);
        assert!((sol.states[2][0] - (-5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let rhs = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let t = 100.0;
        let sol = dopri5(rhs, 0.0, [1.0, 0.0], &[t], &Options::with_tol(1e-12), |_, _| Control::Continue).unwrap();
        assert!((sol.states[0][0] - t.cos()).abs() < 1e-9);
        assert!((sol.states[0][1] + t.sin()).abs() < 1e-9);
    }

    #[test]
    fn monitor_can_stop() {
        let sol = dopri5(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], &[100.0], &Options::default(), |_, y| {
            if y[0] > 1e3 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .unwrap();
        let (t, y) = sol.stopped.unwrap();
        assert!(y[0] > 1e3 && t < 10.0);
        assert!(sol.times.is_empty());
    }

    #[test]
    fn rejects_bad_requests() {
        let r = dopri5(|_, y: &[f64; 1]| [y[0]], 1.0, [1.0], &[0.5], &Options::default(), |_, _| Control::Continue);
        assert!(matches!(r, Err(IntegrateError::BadRequest(_))));
    }

    #[test]
    fn finite_time_blow_up_underflows() {
        // y' = y², y(0) = 1 blows up at t = 1
        let r = dopri5(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], &[2.0], &Options::default(), |_, _| Control::Continue);
        assert!(matches!(r, Err(IntegrateError::StepUnderflow { .. })), "{r:?}");
    }
}
