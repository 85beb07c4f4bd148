//! Proportion dynamics on the unit simplex with τ frozen, and the sampled
//! certification of uniform-basin stability for `A(τ)` and `L(τ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{eigenvalues, spectral_abscissa, SquareMatrix};
use crate::ode::{integrate, OdeOptions};
use crate::path::{PatchModel, PiecewiseMatrixPath};

/// `F(θ) = Aθ − ⟨Aθ, 1⟩ θ`.
pub fn simplex_field(a: &SquareMatrix, theta: &[f64]) -> Vec<f64> {
    let at = a.apply(theta);
    let s: f64 = at.iter().sum();
    at.iter().zip(theta).map(|(x, t)| x - s * t).collect()
}

/// Jacobian of the simplex field at `theta` restricted to the tangent space
/// `{Σxᵢ = 0}`, in the basis `eᵢ − eₙ` (i < n). Empty for n = 1.
pub fn tangent_jacobian(a: &SquareMatrix, theta: &[f64]) -> Vec<Vec<f64>> {
    let n = a.n();
    let lambda: f64 = a.apply(theta).iter().sum();
    let col_sums = a.column_sums();
    // DF = A − λI − θ 1ᵀA
    let df = |i: usize, j: usize| {
        a[(i, j)] - if i == j { lambda } else { 0.0 } - theta[i] * col_sums[j]
    };
    (0..n.saturating_sub(1))
        .map(|i| (0..n - 1).map(|j| df(i, j) - df(i, n - 1)).collect())
        .collect()
}

/// Projects onto the simplex after a step: negatives down to `-1e-9` are
/// treated as round-off.
fn project(theta: &mut [f64]) -> std::result::Result<(), String> {
    if let Some((i, v)) = theta.iter().enumerate().find(|(_, &v)| v < -1e-9) {
        return Err(format!("simplex component {i} became {v:e}"));
    }
    theta.iter_mut().for_each(|v| *v = v.max(0.0));
    let s: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|v| *v /= s);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowTrajectory {
    /// `(s, θ(s))` at accepted steps, starting with the initial state.
    pub samples: Vec<(f64, Vec<f64>)>,
    pub end: Vec<f64>,
}

/// Integrates `dθ/ds = F(θ)` for the frozen matrix `a` over `[0, horizon]`.
pub fn frozen_flow(a: &SquareMatrix, theta0: &[f64], horizon: f64) -> Result<FlowTrajectory> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameters(format!("horizon must be > 0, got {horizon}")));
    }
    check_simplex(theta0, a.n())?;
    let mut theta = theta0.to_vec();
    let mut samples = vec![(0.0, theta.clone())];
    integrate(
        |_, y, dy| dy.copy_from_slice(&simplex_field(a, y)),
        0.0,
        horizon,
        &mut theta,
        &flow_options(),
        |s, y| {
            project(y)?;
            samples.push((s, y.to_vec()));
            Ok(())
        },
    )?;
    Ok(FlowTrajectory {
        end: theta,
        samples,
    })
}

fn flow_options() -> OdeOptions {
    OdeOptions::with_tolerances(1e-10, 1e-13)
}

fn check_simplex(theta: &[f64], n: usize) -> Result<()> {
    if theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: theta.len(),
        });
    }
    let s: f64 = theta.iter().sum();
    if theta.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameters(format!(
            "state is not in the unit simplex (sum {s})"
        )));
    }
    Ok(())
}

const STOPPED: &str = "\u{0}stopped";

/// Flow that ends early once `stop` holds. Returns the final state.
fn flow_until(
    a: &SquareMatrix,
    theta0: &[f64],
    horizon: f64,
    stop: impl Fn(&[f64]) -> bool,
) -> Result<Vec<f64>> {
    let mut theta = theta0.to_vec();
    if stop(&theta) {
        return Ok(theta);
    }
    let mut last = theta.clone();
    let r = integrate(
        |_, y, dy| dy.copy_from_slice(&simplex_field(a, y)),
        0.0,
        horizon,
        &mut theta,
        &flow_options(),
        |_, y| {
            project(y)?;
            last.copy_from_slice(y);
            if stop(y) {
                Err(STOPPED.into())
            } else {
                Ok(())
            }
        },
    );
    match r {
        Ok(_) => Ok(theta),
        Err(Error::Integrator(msg)) if msg == STOPPED => Ok(last),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H2,
    H3,
    H4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    VerifiedSampled,
    Violated,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::VerifiedSampled => "verified-sampled",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    Reducible,
    NonSimple,
    NoNonnegativeEigenvector,
    NotLocallyStable,
    HandoffCapture,
    PerturbationCapture,
    NoConvergence,
    IntegratorFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub tau: f64,
    pub kind: WitnessKind,
    pub reason: String,
    /// Kind-specific numbers: eigenvalues, trajectory start and end, ...
    pub data: Vec<f64>,
}

/// Sampling parameters of the basin checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// τ samples per smooth segment (constant segments use one).
    pub samples: usize,
    pub perturbations: usize,
    pub radius: f64,
    pub seed: u64,
    /// Flow horizon is `horizon_scale / gap`, clamped to `[horizon_min, horizon_max]`.
    pub horizon_scale: f64,
    pub horizon_min: f64,
    pub horizon_max: f64,
    pub convergence_tol: f64,
    pub stability_tol: f64,
    /// `‖F‖∞` below which a non-converged endpoint counts as an equilibrium.
    pub equilibrium_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            samples: 33,
            perturbations: 16,
            radius: 1e-3,
            seed: 20_240_917,
            horizon_scale: 50.0,
            horizon_min: 10.0,
            horizon_max: 1e4,
            convergence_tol: 1e-6,
            stability_tol: 1e-9,
            equilibrium_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hypothesis: Hypothesis,
    pub verdict: Verdict,
    /// Migration strength the check ran at, for H3.
    pub m: Option<f64>,
    pub witnesses: Vec<Witness>,
    /// Checks that could not be decided (integrator failure, slow convergence).
    pub inconclusive: Vec<Witness>,
    pub tau_samples: usize,
    pub flows: usize,
    pub config: CheckConfig,
}

impl HypothesisReport {
    pub fn is_verified(&self) -> bool {
        self.verdict == Verdict::VerifiedSampled
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// Irreducibility of the averaged migration matrix.
pub fn check_h2(model: &PatchModel) -> HypothesisReport {
    let ok = model.satisfies_h2();
    let witnesses = if ok {
        Vec::new()
    } else {
        let avg = model.migration().average();
        vec![Witness {
            tau: 0.0,
            kind: WitnessKind::Reducible,
            reason: "average migration matrix is reducible".into(),
            data: avg.rows().concat(),
        }]
    };
    HypothesisReport {
        hypothesis: Hypothesis::H2,
        verdict: if ok {
            Verdict::VerifiedSampled
        } else {
            Verdict::Violated
        },
        m: None,
        witnesses,
        inconclusive: Vec::new(),
        tau_samples: 0,
        flows: 0,
        config: CheckConfig::default(),
    }
}

/// Sampled check that the Perron vector of `A(τ) = R(τ) + mL(τ)` attracts a
/// uniform basin and that each breakpoint hands the previous equilibrium
/// into the next basin.
pub fn check_h3(model: &PatchModel, m: f64, config: &CheckConfig) -> Result<HypothesisReport> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameters(format!("H3 check needs m > 0, got {m}")));
    }
    let path = model.combined().bind(m);
    let mut report = check_path(&path, Hypothesis::H3, config);
    report.m = Some(m);
    Ok(report)
}

/// Same protocol for the migration path `L(τ)`, whose equilibrium is the
/// kernel vector `p(τ)`.
pub fn check_h4(model: &PatchModel, config: &CheckConfig) -> HypothesisReport {
    check_path(model.migration(), Hypothesis::H4, config)
}

/// Basin check at a single frozen matrix.
pub fn check_matrix(a: &SquareMatrix, hypothesis: Hypothesis, config: &CheckConfig) -> HypothesisReport {
    check_path(&PiecewiseMatrixPath::constant(a.clone()), hypothesis, config)
}

/// Equilibrium data at one τ.
#[derive(Clone, Debug)]
struct Frozen {
    tau: f64,
    a: SquareMatrix,
    v: Vec<f64>,
    gap: f64,
}

/// Simple dominant eigenvalue with nonnegative eigenvector, or a witness.
/// For H4 the dominant eigenvalue must be 0.
fn frozen_equilibrium(
    a: &SquareMatrix,
    tau: f64,
    hypothesis: Hypothesis,
    config: &CheckConfig,
) -> std::result::Result<Frozen, Witness> {
    let spec = spectral_abscissa(a).map_err(|e| Witness {
        tau,
        kind: WitnessKind::IntegratorFailure,
        reason: e.to_string(),
        data: Vec::new(),
    })?;
    let re: Vec<f64> = spec.eigenvalues.iter().map(|e| e.0).collect();
    if !spec.simple {
        let reason = match hypothesis {
            Hypothesis::H4 => "0 is not a simple eigenvalue of L(τ)".to_string(),
            _ => format!("λ_max = {} is not a simple eigenvalue", spec.lambda_max),
        };
        return Err(Witness {
            tau,
            kind: WitnessKind::NonSimple,
            reason,
            data: re,
        });
    }
    let v = spec.eigvec.clone().ok_or_else(|| Witness {
        tau,
        kind: WitnessKind::NoNonnegativeEigenvector,
        reason: "dominant eigenvector is not nonnegative".into(),
        data: re.clone(),
    })?;
    let jac = tangent_jacobian(a, &v);
    if !jac.is_empty() {
        let k = jac.len();
        let flat: Vec<f64> = jac.concat();
        let tang = SquareMatrix::from_row_slice(k, &flat).and_then(|j| eigenvalues(&j));
        match tang {
            Ok(eigs) => {
                let worst = eigs.iter().map(|e| e.0).fold(f64::MIN, f64::max);
                if worst >= -config.stability_tol {
                    return Err(Witness {
                        tau,
                        kind: WitnessKind::NotLocallyStable,
                        reason: format!("tangent Jacobian has eigenvalue with real part {worst:e}"),
                        data: eigs.iter().map(|e| e.0).collect(),
                    });
                }
            }
            Err(e) => {
                return Err(Witness {
                    tau,
                    kind: WitnessKind::IntegratorFailure,
                    reason: e.to_string(),
                    data: Vec::new(),
                })
            }
        }
    }
    Ok(Frozen {
        tau,
        a: a.clone(),
        v,
        gap: spec.gap,
    })
}

fn horizon(gap: f64, config: &CheckConfig) -> f64 {
    (config.horizon_scale / gap).clamp(config.horizon_min, config.horizon_max)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

enum Outcome {
    Converged,
    Captured(Witness),
    Undecided(Witness),
}

/// Flows from `start` under the frozen matrix and classifies the endpoint.
fn attract(target: &Frozen, start: &[f64], kind: WitnessKind, config: &CheckConfig) -> Outcome {
    let tol = config.convergence_tol;
    let eq_tol = config.equilibrium_tol;
    let a = &target.a;
    let end = flow_until(a, start, horizon(target.gap, config), |y| {
        dist(y, &target.v) <= 0.1 * tol
            || simplex_field(a, y).iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-3 * eq_tol
    });
    let end = match end {
        Ok(e) => e,
        Err(e) => {
            return Outcome::Undecided(Witness {
                tau: target.tau,
                kind: WitnessKind::IntegratorFailure,
                reason: e.to_string(),
                data: start.to_vec(),
            })
        }
    };
    let d = dist(&end, &target.v);
    if d <= tol {
        return Outcome::Converged;
    }
    let speed = simplex_field(a, &end).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let data = [start, &end[..]].concat();
    if speed <= eq_tol {
        let rate: f64 = a.apply(&end).iter().sum();
        Outcome::Captured(Witness {
            tau: target.tau,
            kind,
            reason: format!(
                "flow from {start:?} settles at equilibrium {end:?} (eigenvalue {rate}), distance {d:e} from the dominant one"
            ),
            data,
        })
    } else {
        Outcome::Undecided(Witness {
            tau: target.tau,
            kind: WitnessKind::NoConvergence,
            reason: format!("flow from {start:?} did not settle within the horizon (distance {d:e})"),
            data,
        })
    }
}

/// Random point at sup-distance about `radius` from `v`, on the simplex.
fn perturb(v: &[f64], radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = v.len();
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let mut p: Vec<f64> = v
        .iter()
        .zip(&d)
        .map(|(vi, di)| (vi + radius * di / norm).max(0.0))
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

fn check_path(path: &PiecewiseMatrixPath, hypothesis: Hypothesis, config: &CheckConfig) -> HypothesisReport {
    let n = path.n();
    let points = path.sample_points(config.samples.max(1));
    let frozen: Vec<(usize, std::result::Result<Frozen, Witness>)> = points
        .par_iter()
        .map(|&(seg, tau)| (seg, frozen_equilibrium(&path.segment(seg).eval(tau), tau, hypothesis, config)))
        .collect();

    let mut witnesses = Vec::new();
    let mut inconclusive = Vec::new();
    for (_, f) in &frozen {
        if let Err(w) = f {
            if w.kind == WitnessKind::IntegratorFailure {
                inconclusive.push(w.clone());
            } else {
                witnesses.push(w.clone());
            }
        }
    }

    // handoff at each breakpoint, from the left limit of the previous piece
    let mut handoffs: Vec<(Frozen, Vec<f64>)> = Vec::new();
    if path.len() > 1 {
        for k in 0..path.len() {
            let tau = path.interval(k).0;
            let left = frozen_equilibrium(&path.left_limit(tau), tau, hypothesis, config);
            let right = frozen_equilibrium(&path.segment(k).eval(tau), tau, hypothesis, config);
            if let (Ok(l), Ok(r)) = (left, right) {
                handoffs.push((r, l.v));
            }
        }
    }

    let mut tasks: Vec<(Frozen, Vec<f64>, WitnessKind)> = handoffs
        .into_iter()
        .map(|(r, start)| (r, start, WitnessKind::HandoffCapture))
        .collect();
    if n > 1 {
        for (idx, (_, f)) in frozen.iter().enumerate() {
            if let Ok(f) = f {
                for j in 0..config.perturbations {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream((idx * config.perturbations + j) as u64);
                    let start = perturb(&f.v, config.radius, &mut rng);
                    tasks.push((f.clone(), start, WitnessKind::PerturbationCapture));
                }
            }
        }
    }

    let outcomes: Vec<Outcome> = tasks
        .par_iter()
        .map(|(target, start, kind)| attract(target, start, *kind, config))
        .collect();
    for o in outcomes {
        match o {
            Outcome::Converged => {}
            Outcome::Captured(w) => witnesses.push(w),
            Outcome::Undecided(w) => inconclusive.push(w),
        }
    }
    let verdict = if !witnesses.is_empty() {
        Verdict::Violated
    } else if !inconclusive.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::VerifiedSampled
    };
    HypothesisReport {
        hypothesis,
        verdict,
        m: None,
        witnesses,
        inconclusive,
        tau_samples: points.len(),
        flows: tasks.len(),
        config: config.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::perron_root;

    fn mat(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn field_vanishes_at_perron_vector() {
        let a = mat(&[&[-1.0, 2.0], &[1.0, -0.5]]);
        let p = perron_root(&a.shifted(2.0)).unwrap();
        let f = simplex_field(&a, &p.pi);
        assert!(f.iter().all(|v| v.abs() < 1e-14));
        let f = simplex_field(&SquareMatrix::identity(3).scaled(0.7), &[0.2, 0.3, 0.5]);
        assert!(f.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn two_patch_field_reduces_to_logistic_form() {
        let (a1, b2, m) = (1.0, -1.0, 0.5);
        let a = mat(&[&[a1 - m, 0.0], &[m, b2]]);
        for t2 in [0.1, 0.4, 0.9] {
            let f = simplex_field(&a, &[1.0 - t2, t2]);
            let expect = (1.0 - t2) * (m - (a1 - b2) * t2);
            assert!((f[1] - expect).abs() < 1e-14);
            assert!((f[0] + f[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn tangent_jacobian_spectrum_is_shifted() {
        let a = mat(&[&[0.0, 1.0, 0.0], &[1.0, -2.0, 0.0], &[0.0, 0.0, -1.0]]);
        let s = spectral_abscissa(&a).unwrap();
        let j = tangent_jacobian(&a, s.eigvec.as_ref().unwrap());
        let eig = eigenvalues(&SquareMatrix::from_rows(&j).unwrap()).unwrap();
        let mut got: Vec<f64> = eig.iter().map(|e| e.0).collect();
        got.sort_by(f64::total_cmp);
        let l = s.lambda_max;
        let mut expect = vec![-1.0 - l, -1.0 - 2f64.sqrt() - l];
        expect.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn flow_from_equilibrium_stays() {
        let a = mat(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let tr = frozen_flow(&a, &[0.5, 0.5], 10.0).unwrap();
        assert!(dist(&tr.end, &[0.5, 0.5]) < 1e-10);
    }

    #[test]
    fn saddle_on_invariant_face() {
        // b-patches 1, 2 exchange migrants, a-patch 3 is isolated
        let (a, b, m) = (1.0, -1.0, 1.0);
        let a1 = mat(&[&[b - m, m, 0.0], &[m, b - m, 0.0], &[0.0, 0.0, a]]);
        let tr = frozen_flow(&a1, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 60.0).unwrap();
        assert!(dist(&tr.end, &[0.0, 0.0, 1.0]) < 1e-10);
        let tr = frozen_flow(&a1, &[0.5, 0.5, 0.0], 60.0).unwrap();
        assert!(dist(&tr.end, &[0.5, 0.5, 0.0]) < 1e-12);
        for (_, th) in &tr.samples {
            assert!(th.iter().all(|&v| v >= -1e-12));
            assert!((th.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_off_simplex_start() {
        let a = SquareMatrix::identity(2);
        assert!(frozen_flow(&a, &[0.7, 0.7], 1.0).is_err());
        assert!(frozen_flow(&a, &[0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn autonomous_irreducible_matrix_is_verified() {
        let a = mat(&[&[-1.0, 2.0, 0.5], &[1.0, 0.3, 0.0], &[0.0, 0.5, -2.0]]);
        let r = check_matrix(&a, Hypothesis::H3, &CheckConfig::default());
        assert_eq!(r.verdict, Verdict::VerifiedSampled, "{r:?}");
        assert_eq!(r.flows, 16);
    }

    #[test]
    fn double_kernel_is_a_non_simple_witness() {
        let l1 = mat(&[&[-1.0, 1.0, 0.0], &[1.0, -1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let r = check_matrix(&l1, Hypothesis::H4, &CheckConfig::default());
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.witnesses[0].kind, WitnessKind::NonSimple);
        assert!(r.witnesses[0].reason.contains("not a simple eigenvalue"));
    }

    #[test]
    fn reports_serialize() {
        let a = mat(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let r = check_matrix(&a, Hypothesis::H4, &CheckConfig::default());
        let text = r.to_toml();
        assert!(text.contains("verdict = \"verified-sampled\""));
        let back: HypothesisReport = toml::from_str(&text).unwrap();
        assert_eq!(back.config, r.config);
    }
}
