//! Sink/source classification, dispersal-induced growth (DIG) and decay
//! (DID) scans, and the migration construction that drives `Λ` towards σ.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limits::{diagonal_crossings, lambda_inf_0, lambda_m_to_inf_formula, sigma_chi};
use crate::matrix::{is_irreducible, SquareMatrix};
use crate::monodromy::growth_rate;
use crate::path::{Breakpoint, ModelParameters, PatchModel, PiecewiseMatrixPath, Segment};
use crate::quadrature::integrate_gl32;
use crate::simplex::{check_h3, check_h4, CheckConfig, Verdict};
use crate::sweep::{with_jobs, SweepGrid};

/// Mean growth rates within this distance of 0 count as neutral.
pub const NEUTRAL_TOL: f64 = 1e-12;
/// `Λ` must clear 0 by this margin to count as a witness.
pub const WITNESS_TOL: f64 = 1e-9;
const ARGMIN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchLabel {
    Sink,
    Source,
    Neutral,
}

impl fmt::Display for PatchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchLabel::Sink => "sink",
            PatchLabel::Source => "source",
            PatchLabel::Neutral => "neutral",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchClassification {
    pub mean_growth: Vec<f64>,
    pub labels: Vec<PatchLabel>,
    pub sigma: f64,
    pub chi: f64,
}

impl PatchClassification {
    pub fn all(&self, label: PatchLabel) -> bool {
        self.labels.iter().all(|l| *l == label)
    }
}

fn label(r: f64) -> PatchLabel {
    if r.abs() <= NEUTRAL_TOL {
        PatchLabel::Neutral
    } else if r < 0.0 {
        PatchLabel::Sink
    } else {
        PatchLabel::Source
    }
}

fn classify_growth(growth: &PiecewiseMatrixPath) -> Result<PatchClassification> {
    let mean_growth = growth.average().diagonal_entries();
    let (sigma, chi) = sigma_of_growth(growth)?;
    Ok(PatchClassification {
        labels: mean_growth.iter().map(|&r| label(r)).collect(),
        mean_growth,
        sigma,
        chi,
    })
}

// σ and χ only depend on the growth path; pair it with a trivial migration
fn sigma_of_growth(growth: &PiecewiseMatrixPath) -> Result<(f64, f64)> {
    let l = PiecewiseMatrixPath::constant(SquareMatrix::zeros(growth.n()));
    sigma_chi(&PatchModel::new(growth.clone(), l)?)
}

pub fn classify(model: &PatchModel) -> Result<PatchClassification> {
    classify_growth(model.growth())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phenomenon {
    #[serde(rename = "DIG")]
    Dig,
    #[serde(rename = "DID")]
    Did,
}

impl fmt::Display for Phenomenon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phenomenon::Dig => "DIG",
            Phenomenon::Did => "DID",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    /// Guaranteed by a verified hypothesis.
    TheoryCertain,
    /// A grid point shows the phenomenon; no theoretical guarantee.
    FoundNumerically,
    /// A necessary condition fails.
    Impossible,
    /// No witness on the grid and no guarantee either way.
    NotFound,
}

impl fmt::Display for Feasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feasibility::TheoryCertain => "theory-certain",
            Feasibility::FoundNumerically => "found-numerically",
            Feasibility::Impossible => "impossible",
            Feasibility::NotFound => "not-found",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanWitness {
    pub m: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhenomenonResult {
    pub phenomenon: Phenomenon,
    pub feasibility: Feasibility,
    pub witness: Option<ScanWitness>,
    /// The theoretical check behind the verdict.
    pub gate: String,
    pub classification: PatchClassification,
    /// Every patch is a sink (DIG) or a source (DID), so a witness is the
    /// phenomenon in the strict sense.
    pub by_definition: bool,
    /// Grid points evaluated before the scan stopped.
    pub evaluated: usize,
    /// Grid points where the growth rate could not be computed.
    pub failed: usize,
    /// Large-`m` limit of the scanned model, when known (DID only).
    pub limit: Option<f64>,
    /// `ε Σ_{i∈I} ∫ rᵢ` over the first piece for a padded construction.
    pub epsilon_correction: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanOptions {
    pub check: CheckConfig,
    /// Migration strength at which H3 is probed for DIG.
    pub probe_m: f64,
    pub epsilon: f64,
    pub jobs: Option<usize>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            check: CheckConfig::default(),
            probe_m: 1e-2,
            epsilon: 1e-3,
            jobs: None,
        }
    }
}

struct GridSearch {
    witness: Option<ScanWitness>,
    evaluated: usize,
    failed: usize,
}

/// First grid point in `(m, T)` lexicographic order where `accept(Λ)`
/// holds. Points are evaluated in parallel; the answer does not depend on
/// scheduling.
fn search(model: &PatchModel, grid: &SweepGrid, jobs: Option<usize>, accept: impl Fn(f64) -> bool + Sync) -> Result<GridSearch> {
    let mut points = grid.points();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let evaluated = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let witness = with_jobs(jobs, || {
        points.par_iter().find_map_first(|&(m, t)| {
            evaluated.fetch_add(1, Ordering::Relaxed);
            let r = ModelParameters::new(m, t).and_then(|p| growth_rate(model, &p));
            match r {
                Ok(r) if accept(r.lambda) => Some(ScanWitness { m, t, lambda: r.lambda }),
                Ok(_) => None,
                Err(_) => {
                    failed.fetch_add(1, Ordering::Relaxed);
                    None
                }
            }
        })
    })?;
    Ok(GridSearch {
        witness,
        evaluated: evaluated.into_inner(),
        failed: failed.into_inner(),
    })
}

/// Looks for `Λ(m, T) > 0` on the grid. Impossible when `χ ≤ 0`; certain
/// when `χ > 0` and H3 holds at small `m`.
pub fn dig_scan(model: &PatchModel, grid: &SweepGrid, opts: &ScanOptions) -> Result<PhenomenonResult> {
    let classification = classify(model)?;
    let by_definition = classification.all(PatchLabel::Sink);
    let chi = classification.chi;
    let mut result = PhenomenonResult {
        phenomenon: Phenomenon::Dig,
        feasibility: Feasibility::Impossible,
        witness: None,
        gate: format!("χ = {chi} ≤ 0 bounds Λ above"),
        classification,
        by_definition,
        evaluated: 0,
        failed: 0,
        limit: None,
        epsilon_correction: None,
    };
    if chi <= 0.0 {
        return Ok(result);
    }
    let h3 = check_h3(model, opts.probe_m, &opts.check)?;
    let found = search(model, grid, opts.jobs, |l| l > WITNESS_TOL)?;
    result.gate = format!("χ = {chi} > 0; H3 at m = {} is {}", opts.probe_m, h3.verdict);
    result.evaluated = found.evaluated;
    result.failed = found.failed;
    result.witness = found.witness;
    result.feasibility = if h3.verdict == Verdict::VerifiedSampled {
        Feasibility::TheoryCertain
    } else if result.witness.is_some() {
        Feasibility::FoundNumerically
    } else {
        Feasibility::NotFound
    };
    Ok(result)
}

/// Piece of the period on which one patch attains the minimal growth rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizerPiece {
    pub start: Breakpoint,
    pub end: f64,
    /// Index of the growth segment containing the piece.
    pub segment: usize,
    /// Patch with the minimal rate, lowest index on ties.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizerPartition {
    pub pieces: Vec<MinimizerPiece>,
}

impl MinimizerPartition {
    pub fn index_at(&self, tau: f64) -> usize {
        let k = self
            .pieces
            .iter()
            .rposition(|p| p.start.value() <= tau)
            .unwrap_or(0);
        self.pieces[k].index
    }

    /// Patches that never attain the minimum.
    pub fn never_minimal(&self, n: usize) -> Vec<usize> {
        (0..n)
            .filter(|i| self.pieces.iter().all(|p| p.index != *i))
            .collect()
    }
}

fn argmin(r: &[f64]) -> usize {
    let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
    r.iter().position(|&v| v <= lo + ARGMIN_TOL).unwrap_or(0)
}

/// Splits each growth segment where the minimal patch changes. Smooth
/// segments are cut at the pairwise crossings of their rates.
pub fn minimizer_partition(growth: &PiecewiseMatrixPath) -> Result<MinimizerPartition> {
    let mut pieces: Vec<MinimizerPiece> = Vec::new();
    for k in 0..growth.len() {
        let (a, b) = growth.interval(k);
        let seg = growth.segment(k);
        let start = growth.breakpoints()[k];
        match seg {
            Segment::Constant(mat) => pieces.push(MinimizerPiece {
                start,
                end: b,
                segment: k,
                index: argmin(&mat.diagonal_entries()),
            }),
            Segment::Smooth { .. } => {
                let cuts = diagonal_crossings(seg, a, b, k)?;
                let first = pieces.len();
                for w in cuts.windows(2) {
                    let index = argmin(&seg.eval(0.5 * (w[0] + w[1])).diagonal_entries());
                    let opened = pieces.len() > first;
                    match pieces.last_mut() {
                        Some(p) if opened && p.index == index => p.end = w[1],
                        _ => pieces.push(MinimizerPiece {
                            start: if !opened {
                                start
                            } else {
                                Breakpoint::Float(w[0])
                            },
                            end: w[1],
                            segment: k,
                            index,
                        }),
                    }
                }
            }
        }
    }
    Ok(MinimizerPartition { pieces })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DidCase {
    /// Every patch is minimal somewhere.
    AllMinimal,
    /// These patches are never minimal and receive `ε` on the first piece.
    Padded { never_minimal: Vec<usize> },
}

#[derive(Clone, Debug)]
pub struct DidConstruction {
    pub model: PatchModel,
    pub partition: MinimizerPartition,
    pub case: DidCase,
    pub epsilon: f64,
    /// `ε Σ_{i∈I} ∫ rᵢ(τ) dτ` over the first piece (0 in the unpadded case).
    pub epsilon_correction: f64,
}

fn migration_to(n: usize, target: usize, padded: &[usize], epsilon: f64) -> SquareMatrix {
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        if j != target {
            m[(target, j)] = 1.0;
        }
        for &i in padded {
            if i != j {
                m[(i, j)] = epsilon;
            }
        }
    }
    for j in 0..n {
        let s: f64 = (0..n).filter(|&i| i != j).map(|i| m[(i, j)]).sum();
        m[(j, j)] = if s == 0.0 { 0.0 } else { -s };
    }
    SquareMatrix::from_dmatrix_unchecked(m)
}

/// Migration that sends everyone to the currently worst patch. When some
/// patches are never worst they receive migration `ε` on the first piece so
/// the averaged matrix stays irreducible.
pub fn did_construct(growth: &PiecewiseMatrixPath, epsilon: f64) -> Result<DidConstruction> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameters(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let n = growth.n();
    let partition = minimizer_partition(growth)?;
    let missing = partition.never_minimal(n);
    if !missing.is_empty() && epsilon == 0.0 {
        return Err(Error::InvalidParameters(format!(
            "patches {missing:?} never attain the minimum; a positive epsilon is required"
        )));
    }
    let mats: Vec<SquareMatrix> = partition
        .pieces
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let padded: &[usize] = if k == 0 { &missing } else { &[] };
            migration_to(n, p.index, padded, epsilon)
        })
        .collect();
    let starts = partition.pieces.iter().map(|p| p.start).collect();
    let migration = PiecewiseMatrixPath::piecewise_constant(starts, mats)?;
    let model = PatchModel::new(growth.clone(), migration)?;
    if !is_irreducible(&model.migration().average()) {
        return Err(Error::Construction("constructed migration is not irreducible on average".into()));
    }
    let first = &partition.pieces[0];
    let seg = growth.segment(first.segment);
    let (a, b) = (first.start.value(), first.end);
    let epsilon_correction = if missing.is_empty() {
        0.0
    } else {
        epsilon
            * missing
                .iter()
                .map(|&i| integrate_gl32(|t| seg.eval(t).get(i, i), a, b))
                .sum::<f64>()
    };
    let case = if missing.is_empty() {
        DidCase::AllMinimal
    } else {
        DidCase::Padded { never_minimal: missing }
    };
    Ok(DidConstruction {
        model,
        partition,
        case,
        epsilon,
        epsilon_correction,
    })
}

/// Result of a DID scan together with the model that was scanned.
#[derive(Clone, Debug)]
pub struct DidScan {
    pub result: PhenomenonResult,
    pub model: PatchModel,
    pub construction: Option<DidConstruction>,
}

/// Looks for `Λ(m, T) < 0`. Without `migration` the worst-patch
/// construction is used, for which `Λ(∞, T)` is σ up to the `ε` term.
pub fn did_scan(
    growth: &PiecewiseMatrixPath,
    migration: Option<&PiecewiseMatrixPath>,
    grid: &SweepGrid,
    opts: &ScanOptions,
) -> Result<DidScan> {
    let classification = classify_growth(growth)?;
    let by_definition = classification.all(PatchLabel::Source);
    let sigma = classification.sigma;
    let mut result = PhenomenonResult {
        phenomenon: Phenomenon::Did,
        feasibility: Feasibility::Impossible,
        witness: None,
        gate: format!("σ = {sigma} ≥ 0 bounds Λ below"),
        classification,
        by_definition,
        evaluated: 0,
        failed: 0,
        limit: None,
        epsilon_correction: None,
    };
    let (model, construction) = match migration {
        Some(l) => (PatchModel::new(growth.clone(), l.clone())?, None),
        None => {
            let c = did_construct(growth, opts.epsilon)?;
            (c.model.clone(), Some(c))
        }
    };
    if sigma >= 0.0 {
        return Ok(DidScan { result, model, construction });
    }
    if !model.satisfies_h2() {
        return Err(Error::Reducible);
    }

    let mut certain = false;
    if migration.is_some() && model.migration().is_piecewise_constant() && model.migration().len() == 1 {
        // time-independent migration: inf Λ = Σ qᵢ r̄ᵢ
        let inf = lambda_inf_0(&model)?;
        result.limit = Some(inf);
        if inf >= 0.0 {
            result.gate = format!("time-independent migration: inf Λ = Σ qᵢ r̄ᵢ = {inf} ≥ 0");
            return Ok(DidScan { result, model, construction });
        }
        result.gate = format!("time-independent migration: inf Λ = Σ qᵢ r̄ᵢ = {inf} < 0");
    } else {
        let h4 = check_h4(&model, &opts.check);
        let limit = lambda_m_to_inf_formula(&model)?;
        result.limit = Some(limit);
        let correction = construction.as_ref().map(|c| c.epsilon_correction);
        result.epsilon_correction = correction;
        let nominal = sigma + correction.unwrap_or(0.0);
        certain = h4.is_verified() && limit < 0.0 && (construction.is_none() || nominal < 0.0);
        result.gate = match correction {
            Some(c) => format!(
                "σ = {sigma} < 0; H4 {}; Λ(∞,T) = {limit} (σ + ε-term = {nominal}, ε-term {c})",
                h4.verdict
            ),
            None => format!("σ = {sigma} < 0; H4 {}; Λ(∞,T) = {limit}", h4.verdict),
        };
    }

    let found = search(&model, grid, opts.jobs, |l| l < -WITNESS_TOL)?;
    result.evaluated = found.evaluated;
    result.failed = found.failed;
    result.witness = found.witness;
    result.feasibility = if certain {
        Feasibility::TheoryCertain
    } else if result.witness.is_some() {
        Feasibility::FoundNumerically
    } else {
        Feasibility::NotFound
    };
    Ok(DidScan { result, model, construction })
}
