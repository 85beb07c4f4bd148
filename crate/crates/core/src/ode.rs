//! Embedded Dormand–Prince 5(4) integrator with adaptive step control.
//!
//! Callers integrate one continuity interval at a time so steps never cross
//! a breakpoint of the coefficient path.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step length (infinite when unset).
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
            h_max: f64::INFINITY,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
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
// error coefficients: 5th order minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
///
/// `on_step` runs after every accepted step with the new time and a mutable
/// view of the state; it may project the state or abort with a message.
/// Returns the number of accepted steps.
pub fn integrate<F, C>(
    mut f: F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
    mut on_step: C,
) -> Result<usize>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    C: FnMut(f64, &mut [f64]) -> std::result::Result<(), String>,
{
    let n = y.len();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(0);
    }
    if !(span > 0.0) {
        return Err(Error::Integrator(format!("invalid interval [{t0}, {t1}]")));
    }
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let scale = |y0: &[f64], y1: &[f64], i: usize| opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());

    f(t0, y, &mut k1);
    let mut h = initial_step(&mut f, t0, y, &k1, opts).min(span).min(opts.h_max);
    let mut t = t0;
    let mut steps = 0usize;
    let mut attempts = 0usize;
    let mut fac_old = 1e-4f64;

    while t < t1 {
        if attempts >= opts.max_steps {
            return Err(Error::Integrator(format!(
                "step budget of {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        attempts += 1;
        let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * span;
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + h };
        f(t_new, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &y_new, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let s = scale(y, &y_new, i);
            err += (e / s) * (e / s);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            if h < 1e-15 * span.max(t.abs()) {
                return Err(Error::Integrator(format!("non-finite state at t = {t}")));
            }
            continue;
        }

        if err <= 1.0 {
            t = t_new;
            y.copy_from_slice(&y_new);
            on_step(t, y).map_err(Error::Integrator)?;
            steps += 1;
            // y may have been projected; recompute instead of FSAL reuse
            f(t, y, &mut k1);
            // PI step-size controller
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * fac_old.powf(0.04)).clamp(0.2, 10.0);
            fac_old = err.max(1e-4);
            h = (h * fac).min(opts.h_max);
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            if h < 1e-14 * span.max(t.abs()) {
                return Err(Error::Integrator(format!("step size underflow at t = {t}")));
            }
        }
    }
    Ok(steps)
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(x, s)| (x / s) * (x / s)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * d).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = [1.0];
        let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
        integrate(|_, y, dy| dy[0] = -2.0 * y[0], 0.0, 3.0, &mut y, &opts, |_, _| Ok(())).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let mut y = [1.0, 0.0];
        let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
        let tau = 2.0 * std::f64::consts::PI;
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            tau,
            &mut y,
            &opts,
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn callback_abort_propagates() {
        let mut y = [1.0];
        let r = integrate(
            |_, y, dy| dy[0] = y[0],
            0.0,
            1.0,
            &mut y,
            &OdeOptions::default(),
            |t, _| if t > 0.5 { Err("stop".into()) } else { Ok(()) },
        );
        assert!(matches!(r, Err(Error::Integrator(m)) if m == "stop"));
    }

    #[test]
    fn zero_length_interval_is_noop() {
        let mut y = [3.0];
        let n = integrate(|_, _, dy| dy[0] = 1.0, 1.0, 1.0, &mut y, &OdeOptions::default(), |_, _| Ok(())).unwrap();
        assert_eq!(n, 0);
        assert_eq!(y[0], 3.0);
    }
}
