//! Monodromy matrix, Perron root and growth rate `Λ(m, T) = ln(μ) / T`,
//! plus a trajectory-based estimate used as an independent oracle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{
    dominant_nonnegative, matrix_exponential_scaled, perron_root, ScaledMatrix, SquareMatrix,
};
use crate::ode::{integrate, OdeOptions};
use crate::path::{bind, ModelParameters, PatchModel, PiecewiseMatrixPath, Segment};
use crate::simplex::simplex_field;

/// Relative tolerance for smooth-segment propagators.
pub const PROPAGATOR_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct MonodromyResult {
    /// Monodromy matrix divided by `exp(log_scale)`; its largest entry is 1.
    pub x: SquareMatrix,
    pub log_scale: f64,
    /// Perron root; may be infinite when `ln μ` exceeds the double range.
    pub mu: f64,
    pub log_mu: f64,
    pub pi: Vec<f64>,
    pub lambda: f64,
    pub period: f64,
    /// Set for `m = 0`, where patches evolve independently.
    pub decoupled: bool,
}

impl MonodromyResult {
    /// `X(T)` with its scale restored; fails when entries overflow.
    pub fn monodromy(&self) -> Result<SquareMatrix> {
        ScaledMatrix {
            mat: self.x.clone(),
            log_scale: self.log_scale,
        }
        .to_unscaled()
    }
}

/// `X(T)` for the bound path `A`, kept in scaled form so long periods and
/// large rates do not overflow.
pub fn fundamental_matrix_scaled(a: &PiecewiseMatrixPath, period: f64) -> Result<ScaledMatrix> {
    propagator_scaled(a, period, 0, a.len())
}

/// `X(T)` as a plain matrix.
pub fn fundamental_matrix(a: &PiecewiseMatrixPath, period: f64) -> Result<SquareMatrix> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameters(format!("period must be > 0, got {period}")));
    }
    fundamental_matrix_scaled(a, period)?.to_unscaled()
}

/// Propagator over segments `first..last`, applied right to left.
pub fn propagator_scaled(
    a: &PiecewiseMatrixPath,
    period: f64,
    first: usize,
    last: usize,
) -> Result<ScaledMatrix> {
    let mut acc = ScaledMatrix::identity(a.n());
    for k in first..last {
        let (t0, t1) = a.interval(k);
        let step = match a.segment(k) {
            Segment::Constant(m) => matrix_exponential_scaled(m, period * (t1 - t0))?,
            seg => smooth_propagator(seg, t0, t1, period)?,
        };
        acc = step.after(&acc);
    }
    Ok(acc)
}

/// Largest sampled `|A(s) - A(t)| / |s - t|` over the segment.
fn estimate_lipschitz(seg: &Segment, t0: f64, t1: f64) -> f64 {
    let k = 33;
    let mut prev = seg.eval(t0);
    let mut lip: f64 = 0.0;
    for j in 1..=k {
        let t = t0 + (t1 - t0) * j as f64 / k as f64 * (1.0 - 1e-12);
        let cur = seg.eval(t);
        let d = (cur.as_dmatrix() - prev.as_dmatrix()).abs().max();
        lip = lip.max(d * k as f64 / (t1 - t0));
        prev = cur;
    }
    lip
}

/// Solves `dY/dτ = T A(τ) Y` across one smooth segment.
fn smooth_propagator(seg: &Segment, t0: f64, t1: f64, period: f64) -> Result<ScaledMatrix> {
    let n = seg.eval(t0).n();
    let lip = match seg {
        Segment::Smooth {
            lipschitz: Some(l), ..
        } => *l,
        _ => estimate_lipschitz(seg, t0, t1),
    };
    let len = t1 - t0;
    let min_steps = (8.0 + lip * len).ceil().min(1e5);
    let opts = OdeOptions {
        h_max: len / min_steps,
        ..OdeOptions::with_tolerances(PROPAGATOR_RTOL, 1e-14)
    };
    let mut y = vec![0.0; n * n];
    for i in 0..n {
        y[i * n + i] = 1.0;
    }
    let mut log_scale = 0.0;
    // Column-major state: y[j * n + i] = Y(i, j).
    integrate(
        |t, y, dy| {
            let m = seg.eval(t);
            for j in 0..n {
                for i in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += m[(i, k)] * y[j * n + k];
                    }
                    dy[j * n + i] = period * s;
                }
            }
        },
        t0,
        t1,
        &mut y,
        &opts,
        |_, y| {
            let s = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if s > 1e100 {
                y.iter_mut().for_each(|v| *v /= s);
                log_scale += s.ln();
            }
            Ok(())
        },
    )?;
    let mat = SquareMatrix::new(nalgebra::DMatrix::from_column_slice(n, n, &y))?;
    let mut out = ScaledMatrix { mat, log_scale };
    out.normalize();
    Ok(out)
}

/// Index of the first maximal entry.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Growth rate of the model at `(m, T)`.
///
/// For `m = 0` the patches are decoupled and the result is `max r̄ᵢ` with
/// the indicator of the best patch as `π` and `decoupled` set.
pub fn growth_rate(model: &PatchModel, params: &ModelParameters) -> Result<MonodromyResult> {
    let params = ModelParameters::new(params.m, params.period)?;
    let period = params.period;
    if params.m == 0.0 {
        let rbar = model.mean_growth();
        let best = argmax(&rbar);
        let lambda = rbar[best];
        let x = fundamental_matrix_scaled(model.growth(), period)?;
        let mut pi = vec![0.0; model.n()];
        pi[best] = 1.0;
        return Ok(MonodromyResult {
            x: x.mat,
            log_scale: x.log_scale,
            mu: (lambda * period).exp(),
            log_mu: lambda * period,
            pi,
            lambda,
            period,
            decoupled: true,
        });
    }
    if !model.satisfies_h2() {
        return Err(Error::Reducible);
    }
    let a = bind(model, &params);
    let x = fundamental_matrix_scaled(&a, period)?;
    let clipped = clip_roundoff(&x.mat);
    let perron = match perron_root(&clipped) {
        Ok(p) => p,
        // entries of X can underflow to 0 for extreme (m, T)
        Err(Error::NotIrreducibleNonnegative) => dominant_nonnegative(&clipped)?,
        Err(e) => return Err(e),
    };
    let log_mu = perron.mu.ln() + x.log_scale;
    Ok(MonodromyResult {
        x: x.mat,
        log_scale: x.log_scale,
        mu: log_mu.exp(),
        log_mu,
        pi: perron.pi,
        lambda: log_mu / period,
        period,
        decoupled: false,
    })
}

/// Zeroes entries that are negative only through round-off.
fn clip_roundoff(m: &SquareMatrix) -> SquareMatrix {
    let tol = 1e-12 * m.max_abs();
    let d = m.as_dmatrix().map(|v| if v < 0.0 && v >= -tol { 0.0 } else { v });
    SquareMatrix::from_dmatrix_unchecked(d)
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// State divided by its total, so entries sum to 1.
    pub x: Vec<f64>,
    /// Logarithm of the total population.
    pub log_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryEstimate {
    /// `(1/t) ln xᵢ(t)` at the final time.
    pub raw: Vec<f64>,
    /// Per-patch log growth over the final period divided by `T`.
    pub per_patch: Vec<f64>,
    /// Growth of the total population over the final period divided by `T`.
    pub shared: f64,
    /// One sample per period boundary, starting at `t = 0`.
    pub samples: Vec<TrajectorySample>,
}

/// Integrates `dx/dt = A(t/T) x` for `horizon` periods with an adaptive
/// Runge–Kutta scheme, renormalizing once per period.
pub fn trajectory_lyapunov(
    model: &PatchModel,
    params: &ModelParameters,
    x0: &[f64],
    horizon: usize,
) -> Result<TrajectoryEstimate> {
    let params = ModelParameters::new(params.m, params.period)?;
    let n = model.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if x0.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || x0.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameters(
            "initial state must be nonnegative and nonzero".into(),
        ));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameters("horizon must be at least one period".into()));
    }
    let period = params.period;
    let a = bind(model, &params);
    let opts = OdeOptions::with_tolerances(1e-11, 1e-30);

    let total0: f64 = x0.iter().sum();
    let mut x: Vec<f64> = x0.iter().map(|v| v / total0).collect();
    let mut log_norm = total0.ln();
    let mut samples = vec![TrajectorySample {
        t: 0.0,
        x: x.clone(),
        log_norm,
    }];
    let mut prev_logs: Vec<f64> = x.iter().map(|v| v.ln() + log_norm).collect();
    let mut prev_total = log_norm;
    let mut logs = prev_logs.clone();

    for p in 0..horizon {
        let base = p as f64 * period;
        for k in 0..a.len() {
            let (t0, t1) = a.interval(k);
            let seg = a.segment(k);
            let constant = seg.as_constant().cloned();
            integrate(
                |t, y, dy| {
                    let m = match &constant {
                        Some(m) => std::borrow::Cow::Borrowed(m),
                        None => std::borrow::Cow::Owned(seg.eval((t - base) / period)),
                    };
                    for i in 0..n {
                        dy[i] = (0..n).map(|j| m[(i, j)] * y[j]).sum();
                    }
                },
                base + t0 * period,
                base + t1 * period,
                &mut x,
                &opts,
                |_, y| {
                    let s: f64 = y.iter().sum();
                    if s > 1e150 || (s > 0.0 && s < 1e-150) {
                        y.iter_mut().for_each(|v| *v /= s);
                        log_norm += s.ln();
                    }
                    Ok(())
                },
            )?;
        }
        let s: f64 = x.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Integrator(format!("population collapsed at period {}", p + 1)));
        }
        x.iter_mut().for_each(|v| *v /= s);
        log_norm += s.ln();
        prev_logs = std::mem::replace(&mut logs, x.iter().map(|v| v.ln() + log_norm).collect());
        if p + 1 < horizon {
            prev_total = log_norm;
        }
        samples.push(TrajectorySample {
            t: (p + 1) as f64 * period,
            x: x.clone(),
            log_norm,
        });
    }
    let t_end = horizon as f64 * period;
    Ok(TrajectoryEstimate {
        raw: logs.iter().map(|l| l / t_end).collect(),
        per_patch: logs
            .iter()
            .zip(&prev_logs)
            .map(|(l, p)| (l - p) / period)
            .collect(),
        shared: (log_norm - prev_total) / period,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SimplexOrbit {
    /// `(τ, θ*(τT))` at accepted integrator steps, τ ∈ [0, 1].
    pub samples: Vec<(f64, Vec<f64>)>,
    /// `(1/T) ∫₀ᵀ ⟨A(t/T) θ*(t), 1⟩ dt`.
    pub integral: f64,
    /// `‖θ*(T) - π‖∞`.
    pub drift: f64,
}

/// Allowed `‖θ*(T) - π‖∞` before the orbit is rejected.
pub const PERIODICITY_TOL: f64 = 1e-7;

/// Follows the periodic solution of the proportion dynamics from `θ*(0) = π`
/// and integrates the instantaneous growth along it.
pub fn periodic_simplex_orbit(
    model: &PatchModel,
    params: &ModelParameters,
    result: &MonodromyResult,
) -> Result<SimplexOrbit> {
    let n = model.n();
    let period = params.period;
    let a = bind(model, params);
    let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
    // state: θ followed by the running integral
    let mut y: Vec<f64> = result.pi.clone();
    y.push(0.0);
    let mut samples = vec![(0.0, result.pi.clone())];
    for k in 0..a.len() {
        let (t0, t1) = a.interval(k);
        let seg = a.segment(k);
        integrate(
            |tau, y, dy| {
                let m = seg.eval(tau);
                let theta = &y[..n];
                let f = simplex_field(&m, theta);
                for i in 0..n {
                    dy[i] = period * f[i];
                }
                dy[n] = m.apply(theta).iter().sum();
            },
            t0,
            t1,
            &mut y,
            &opts,
            |tau, y| {
                samples.push((tau, y[..n].to_vec()));
                Ok(())
            },
        )?;
    }
    let drift = y[..n]
        .iter()
        .zip(&result.pi)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    if drift > PERIODICITY_TOL {
        return Err(Error::Periodicity(drift));
    }
    Ok(SimplexOrbit {
        samples,
        integral: y[n],
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Breakpoint;

    fn worst_direction(a1: f64, b1: f64, a2: f64, b2: f64) -> PatchModel {
        PatchModel::piecewise_constant(
            vec![Breakpoint::zero(), Breakpoint::ratio(1, 2)],
            vec![vec![a1, b2], vec![b1, a2]],
            vec![
                SquareMatrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
                SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn single_patch(c: f64) -> PatchModel {
        PatchModel::piecewise_constant(
            vec![Breakpoint::zero()],
            vec![vec![c]],
            vec![SquareMatrix::zeros(1)],
        )
        .unwrap()
    }

    fn params(m: f64, t: f64) -> ModelParameters {
        ModelParameters::new(m, t).unwrap()
    }

    #[test]
    fn scalar_monodromy() {
        let model = single_patch(0.3);
        let x = fundamental_matrix(&bind(&model, &params(1.0, 2.0)), 2.0).unwrap();
        assert!((x[(0, 0)] - 0.6f64.exp()).abs() < 1e-14);
        let r = growth_rate(&model, &params(1.0, 2.0)).unwrap();
        assert!((r.lambda - 0.3).abs() < 1e-14);
        assert_eq!(r.pi, vec![1.0]);
    }

    #[test]
    fn equal_growth_gives_that_rate() {
        let model = worst_direction(0.7, 0.7, 0.7, 0.7);
        for (m, t) in [(0.1, 0.5), (1.0, 1.0), (10.0, 3.0)] {
            let r = growth_rate(&model, &params(m, t)).unwrap();
            assert!((r.lambda - 0.7).abs() < 1e-12, "{m} {t}: {}", r.lambda);
        }
    }

    #[test]
    fn decoupled_rate_is_best_mean() {
        let model = worst_direction(1.0, -2.0, 2.0, -1.0);
        let r = growth_rate(&model, &params(0.0, 1.0)).unwrap();
        assert!(r.decoupled);
        assert!((r.lambda - 0.5).abs() < 1e-15);
        assert_eq!(r.pi, vec![0.0, 1.0]);
    }

    #[test]
    fn short_period_approaches_averaged_rate() {
        let model = worst_direction(1.0, -2.0, 2.0, -1.0);
        let r = growth_rate(&model, &params(1.0, 1e-4)).unwrap();
        let expect = 0.5 * (-1.0 + 2f64.sqrt());
        assert!((r.lambda - expect).abs() < 1e-3);
    }

    #[test]
    fn reducible_average_is_rejected() {
        let model = PatchModel::piecewise_constant(
            vec![Breakpoint::zero()],
            vec![vec![1.0, 0.0]],
            vec![SquareMatrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap()],
        )
        .unwrap();
        let e = growth_rate(&model, &params(1.0, 1.0)).unwrap_err();
        assert!(e.to_string().contains("average migration matrix reducible"));
    }

    #[test]
    fn monodromy_satisfies_eigen_equation() {
        let model = worst_direction(1.0, -2.0, 2.0, -1.0);
        let r = growth_rate(&model, &params(1.0, 1.0)).unwrap();
        let x = r.monodromy().unwrap();
        assert!(x.iter().all(|&v| v >= -1e-12));
        let xp = x.apply(&r.pi);
        for (a, b) in xp.iter().zip(&r.pi) {
            assert!((a - r.mu * b).abs() <= 1e-8 * r.mu * b.max(1e-300));
        }
        assert_eq!(r.lambda, r.log_mu / r.period);
    }

    #[test]
    fn long_periods_do_not_overflow() {
        let model = worst_direction(1.0, -2.0, 2.0, -1.0);
        let r = growth_rate(&model, &params(0.5, 5000.0)).unwrap();
        // middle band is empty here; Λ(m,∞) = χ - m = 1.0
        assert!((r.lambda - 1.0).abs() < 1e-3, "{}", r.lambda);
        assert!(fundamental_matrix(&bind(&model, &params(0.5, 5000.0)), 5000.0).is_err());
    }

    #[test]
    fn smooth_segments_match_constant_ones() {
        let c = SquareMatrix::from_rows(&[vec![-0.5, 1.0], vec![0.5, -1.0]]).unwrap();
        let cc = c.clone();
        let smooth = PiecewiseMatrixPath::new(2, vec![Breakpoint::zero()], vec![Segment::smooth(move |_| cc.clone())]).unwrap();
        let x1 = fundamental_matrix(&PiecewiseMatrixPath::constant(c), 2.0).unwrap();
        let x2 = fundamental_matrix(&smooth, 2.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((x1[(i, j)] - x2[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn time_dependent_scalar_rate() {
        // r(τ) = 2πcos(2πτ) + 0.1 integrates to 0.1 over one period
        let p = PiecewiseMatrixPath::new(
            1,
            vec![Breakpoint::zero()],
            vec![Segment::smooth(|t| {
                SquareMatrix::diagonal(&[2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * t).cos() + 0.1]).unwrap()
            })],
        )
        .unwrap();
        let x = fundamental_matrix(&p, 3.0).unwrap();
        assert!((x[(0, 0)].ln() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn trajectory_matches_growth_rate() {
        let model = worst_direction(1.0, -2.0, 2.0, -1.0);
        let p = params(1.0, 1.0);
        let r = growth_rate(&model, &p).unwrap();
        for x0 in [vec![1.0, 0.0], vec![0.5, 0.5]] {
            let est = trajectory_lyapunov(&model, &p, &x0, 200).unwrap();
            for v in &est.per_patch {
                assert!((v - r.lambda).abs() < 1e-6, "{v} vs {}", r.lambda);
            }
            assert!((est.shared - r.lambda).abs() < 1e-6);
            assert_eq!(est.samples.len(), 201);
        }
        let est = trajectory_lyapunov(&single_patch(0.4), &params(1.0, 1.0), &[2.0], 3).unwrap();
        assert!((est.shared - 0.4).abs() < 1e-12);
        assert!(trajectory_lyapunov(&model, &p, &[0.0, 0.0], 10).is_err());
    }

    #[test]
    fn orbit_integral_equals_growth_rate() {
        let model = worst_direction(1.0, -2.0, 2.0, -1.0);
        let p = params(1.0, 1.0);
        let r = growth_rate(&model, &p).unwrap();
        let orbit = periodic_simplex_orbit(&model, &p, &r).unwrap();
        assert!((orbit.integral - r.lambda).abs() < 1e-8);

        let single = single_patch(-0.25);
        let r = growth_rate(&single, &p).unwrap();
        let orbit = periodic_simplex_orbit(&single, &p, &r).unwrap();
        assert!((orbit.integral + 0.25).abs() < 1e-12);
    }
}
