//! One-periodic piecewise-continuous matrix paths and patch models.
//!
//! Segments are half-open intervals `[τ_k, τ_{k+1})`; evaluation is
//! right-continuous and left limits are available through
//! [`PiecewiseMatrixPath::left_limit`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::matrix::{is_irreducible_with_threshold, is_metzler, SquareMatrix};
use crate::quadrature::{chebyshev_points, gl32_points};

/// Breakpoint position in [0, 1). Rationals keep values such as 1/3 exact
/// through file round-trips.
#[derive(Clone, Copy, Debug)]
pub enum Breakpoint {
    Exact(Rational64),
    Float(f64),
}

impl Breakpoint {
    pub fn zero() -> Self {
        Breakpoint::Exact(Rational64::from_integer(0))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Breakpoint::Exact(Rational64::new(num, den))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Breakpoint::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Breakpoint::Float(v) => v,
        }
    }
}

impl PartialEq for Breakpoint {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Breakpoint::Exact(a), Breakpoint::Exact(b)) => a == b,
            _ => self.value() == other.value(),
        }
    }
}

impl fmt::Display for Breakpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Breakpoint::Exact(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Breakpoint::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Breakpoint::Float(v) => write!(f, "{v}"),
        }
    }
}

/// Exact values serialize as `"p/q"` strings, floats as numbers.
impl serde::Serialize for Breakpoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Breakpoint::Exact(_) => s.serialize_str(&self.to_string()),
            Breakpoint::Float(v) => s.serialize_f64(*v),
        }
    }
}

impl FromStr for Breakpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p
                .trim()
                .parse()
                .map_err(|_| Error::InvalidPath(format!("bad rational numerator in `{s}`")))?;
            let q: i64 = q
                .trim()
                .parse()
                .map_err(|_| Error::InvalidPath(format!("bad rational denominator in `{s}`")))?;
            if q <= 0 {
                return Err(Error::InvalidPath(format!("nonpositive denominator in `{s}`")));
            }
            return Ok(Breakpoint::Exact(Rational64::new(p, q)));
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Breakpoint::Exact(Rational64::from_integer(i)));
        }
        s.parse::<f64>()
            .map(Breakpoint::Float)
            .map_err(|_| Error::InvalidPath(format!("cannot parse breakpoint `{s}`")))
    }
}

pub type MatrixFn = Arc<dyn Fn(f64) -> SquareMatrix + Send + Sync>;

/// Matrix evaluator on one continuity interval.
#[derive(Clone)]
pub enum Segment {
    Constant(SquareMatrix),
    /// Continuous on its half-open interval by contract. `lipschitz` is an
    /// optional bound on `|dA/dτ|` used for step control.
    Smooth { f: MatrixFn, lipschitz: Option<f64> },
}

impl Segment {
    pub fn smooth(f: impl Fn(f64) -> SquareMatrix + Send + Sync + 'static) -> Self {
        Segment::Smooth {
            f: Arc::new(f),
            lipschitz: None,
        }
    }

    pub fn eval(&self, tau: f64) -> SquareMatrix {
        match self {
            Segment::Constant(m) => m.clone(),
            Segment::Smooth { f, .. } => f(tau),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Segment::Constant(_))
    }

    pub fn as_constant(&self) -> Option<&SquareMatrix> {
        match self {
            Segment::Constant(m) => Some(m),
            Segment::Smooth { .. } => None,
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        match self {
            Segment::Constant(_) => Some(0.0),
            Segment::Smooth { lipschitz, .. } => *lipschitz,
        }
    }

    /// Pointwise `self + m * other`.
    fn combine(&self, other: &Segment, m: f64) -> Segment {
        match (self, other) {
            (Segment::Constant(a), Segment::Constant(b)) => {
                Segment::Constant(SquareMatrix::from_dmatrix_unchecked(
                    a.as_dmatrix() + b.as_dmatrix() * m,
                ))
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let lipschitz = match (a.lipschitz(), b.lipschitz()) {
                    (Some(x), Some(y)) => Some(x + m.abs() * y),
                    _ => None,
                };
                Segment::Smooth {
                    f: Arc::new(move |t| {
                        SquareMatrix::from_dmatrix_unchecked(
                            a.eval(t).as_dmatrix() + b.eval(t).as_dmatrix() * m,
                        )
                    }),
                    lipschitz,
                }
            }
        }
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Segment::Constant(a), Segment::Constant(b)) => a == b,
            (Segment::Smooth { f: a, .. }, Segment::Smooth { f: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Debug for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Segment::Smooth { lipschitz, .. } => f
                .debug_struct("Smooth")
                .field("lipschitz", lipschitz)
                .finish_non_exhaustive(),
        }
    }
}

/// 1-periodic matrix path, piecewise continuous on `[τ_k, τ_{k+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseMatrixPath {
    n: usize,
    starts: Vec<Breakpoint>,
    segments: Vec<Segment>,
}

/// Breakpoints closer than this are the same point.
const BREAK_EPS: f64 = 1e-15;

impl PiecewiseMatrixPath {
    pub fn new(n: usize, starts: Vec<Breakpoint>, segments: Vec<Segment>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPath("dimension must be at least 1".into()));
        }
        if starts.is_empty() || starts.len() != segments.len() {
            return Err(Error::InvalidPath(format!(
                "{} breakpoints for {} segments",
                starts.len(),
                segments.len()
            )));
        }
        if starts[0].value() != 0.0 {
            return Err(Error::InvalidPath(format!(
                "first breakpoint must be 0, got {}",
                starts[0]
            )));
        }
        for w in starts.windows(2) {
            if !(w[1].value() > w[0].value()) {
                return Err(Error::InvalidPath(format!(
                    "breakpoints must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(last) = starts.last() {
            if !(last.value() < 1.0) {
                return Err(Error::InvalidPath(format!("breakpoint {last} is not below 1")));
            }
        }
        for (k, seg) in segments.iter().enumerate() {
            let dim = seg.eval(starts[k].value()).n();
            if dim != n {
                return Err(Error::InvalidPath(format!(
                    "segment {k} has dimension {dim}, expected {n}"
                )));
            }
        }
        Ok(Self { n, starts, segments })
    }

    pub fn constant(m: SquareMatrix) -> Self {
        Self {
            n: m.n(),
            starts: vec![Breakpoint::zero()],
            segments: vec![Segment::Constant(m)],
        }
    }

    /// Piecewise-constant path with the given segment starts.
    pub fn piecewise_constant(starts: Vec<Breakpoint>, mats: Vec<SquareMatrix>) -> Result<Self> {
        let n = mats.first().map(|m| m.n()).unwrap_or(0);
        Self::new(n, starts, mats.into_iter().map(Segment::Constant).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.starts
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, k: usize) -> &Segment {
        &self.segments[k]
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        let a = self.starts[k].value();
        let b = self.starts.get(k + 1).map(|b| b.value()).unwrap_or(1.0);
        (a, b)
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.segments.iter().all(Segment::is_constant)
    }

    /// Segment index containing `tau` (reduced modulo 1).
    pub fn locate(&self, tau: f64) -> usize {
        let t = tau.rem_euclid(1.0);
        self.starts
            .iter()
            .rposition(|b| b.value() <= t)
            .unwrap_or(0)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, tau: f64) -> SquareMatrix {
        let t = tau.rem_euclid(1.0);
        self.segments[self.locate(t)].eval(t)
    }

    /// `lim_{s -> tau, s < tau} A(s)`, wrapping 0 to 1.
    pub fn left_limit(&self, tau: f64) -> SquareMatrix {
        let t = tau.rem_euclid(1.0);
        let k = self.locate(t);
        let (a, _) = self.interval(k);
        if (t - a).abs() <= BREAK_EPS {
            let prev = if k == 0 { self.len() - 1 } else { k - 1 };
            let (_, end) = self.interval(prev);
            self.segments[prev].eval(end)
        } else {
            self.segments[k].eval(t)
        }
    }

    /// Integral over one period: exact for constant segments, 32-point
    /// Gauss–Legendre per smooth segment.
    pub fn average(&self) -> SquareMatrix {
        let mut acc = nalgebra::DMatrix::<f64>::zeros(self.n, self.n);
        for (k, seg) in self.segments.iter().enumerate() {
            let (a, b) = self.interval(k);
            match seg {
                Segment::Constant(m) => acc += m.as_dmatrix() * (b - a),
                Segment::Smooth { f, .. } => {
                    for (t, w) in gl32_points(a, b) {
                        acc += f(t).as_dmatrix() * w;
                    }
                }
            }
        }
        SquareMatrix::from_dmatrix_unchecked(acc)
    }

    /// Path `τ ↦ A(τ) + c I`.
    pub fn shifted(&self, c: f64) -> Self {
        let id = Segment::Constant(SquareMatrix::identity(self.n));
        Self {
            n: self.n,
            starts: self.starts.clone(),
            segments: self.segments.iter().map(|s| s.combine(&id, c)).collect(),
        }
    }

    /// Sample points used for structural validation and hypothesis checks:
    /// one point for constant segments, `k` Chebyshev points otherwise.
    pub fn sample_points(&self, k: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (seg, s) in self.segments.iter().enumerate() {
            let (a, b) = self.interval(seg);
            if s.is_constant() {
                out.push((seg, a));
            } else {
                out.extend(chebyshev_points(a, b, k).into_iter().map(|t| (seg, t)));
            }
        }
        out
    }
}

/// Growth and migration segments aligned on a common breakpoint set; `m`
/// is bound later by [`CombinedPath::bind`].
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedPath {
    n: usize,
    starts: Vec<Breakpoint>,
    pieces: Vec<(Segment, Segment)>,
}

impl CombinedPath {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.starts
    }

    pub fn pieces(&self) -> &[(Segment, Segment)] {
        &self.pieces
    }

    pub fn bind(&self, m: f64) -> PiecewiseMatrixPath {
        PiecewiseMatrixPath {
            n: self.n,
            starts: self.starts.clone(),
            segments: self
                .pieces
                .iter()
                .map(|(g, l)| {
                    if m == 0.0 {
                        g.clone()
                    } else {
                        g.combine(l, m)
                    }
                })
                .collect(),
        }
    }
}

/// Aligns two paths on the union of their breakpoints.
pub fn merge_breakpoints(
    growth: &PiecewiseMatrixPath,
    migration: &PiecewiseMatrixPath,
) -> Result<CombinedPath> {
    if growth.n() != migration.n() {
        return Err(Error::DimensionMismatch {
            expected: growth.n(),
            found: migration.n(),
        });
    }
    let mut all: Vec<Breakpoint> = growth
        .breakpoints()
        .iter()
        .chain(migration.breakpoints())
        .copied()
        .collect();
    all.sort_by(|a, b| a.value().total_cmp(&b.value()));
    let mut starts: Vec<Breakpoint> = Vec::with_capacity(all.len());
    for b in all {
        match starts.last_mut() {
            Some(last) if (b.value() - last.value()).abs() <= BREAK_EPS => {
                if matches!(b, Breakpoint::Exact(_)) {
                    *last = b;
                }
            }
            _ => starts.push(b),
        }
    }
    let pieces = starts
        .iter()
        .map(|b| {
            let t = b.value();
            (
                growth.segment(growth.locate(t)).clone(),
                migration.segment(migration.locate(t)).clone(),
            )
        })
        .collect();
    Ok(CombinedPath {
        n: growth.n(),
        starts,
        pieces,
    })
}

/// Migration strength and period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParameters {
    pub m: f64,
    pub period: f64,
}

impl ModelParameters {
    pub fn new(m: f64, period: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameters(format!("m must be finite and >= 0, got {m}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "period must be finite and > 0, got {period}"
            )));
        }
        Ok(Self { m, period })
    }
}

/// Tolerance on migration column sums.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// `n` patches with diagonal growth path `R(τ)` and migration path `L(τ)`
/// (Metzler, zero column sums).
#[derive(Clone, Debug, PartialEq)]
pub struct PatchModel {
    growth: PiecewiseMatrixPath,
    migration: PiecewiseMatrixPath,
    combined: CombinedPath,
}

impl PatchModel {
    pub fn new(growth: PiecewiseMatrixPath, migration: PiecewiseMatrixPath) -> Result<Self> {
        let combined = merge_breakpoints(&growth, &migration)?;
        for (k, t) in growth.sample_points(9) {
            check_growth_sample(&growth.segment(k).eval(t))
                .map_err(|e| Error::InvalidModel(format!("growth segment {k} at τ={t}: {e}")))?;
        }
        for (k, t) in migration.sample_points(9) {
            check_migration_sample(&migration.segment(k).eval(t))
                .map_err(|e| Error::InvalidModel(format!("migration segment {k} at τ={t}: {e}")))?;
        }
        Ok(Self {
            growth,
            migration,
            combined,
        })
    }

    /// Piecewise-constant model sharing one breakpoint set.
    pub fn piecewise_constant(
        starts: Vec<Breakpoint>,
        rates: Vec<Vec<f64>>,
        migration: Vec<SquareMatrix>,
    ) -> Result<Self> {
        let growth = rates
            .iter()
            .map(|r| SquareMatrix::diagonal(r))
            .collect::<Result<Vec<_>>>()?;
        let g = PiecewiseMatrixPath::piecewise_constant(starts.clone(), growth)?;
        let l = PiecewiseMatrixPath::piecewise_constant(starts, migration)?;
        Self::new(g, l)
    }

    pub fn n(&self) -> usize {
        self.growth.n()
    }

    pub fn growth(&self) -> &PiecewiseMatrixPath {
        &self.growth
    }

    pub fn migration(&self) -> &PiecewiseMatrixPath {
        &self.migration
    }

    pub fn combined(&self) -> &CombinedPath {
        &self.combined
    }

    /// Mean growth rates `r̄_i`.
    pub fn mean_growth(&self) -> Vec<f64> {
        self.growth.average().diagonal_entries()
    }

    pub fn growth_rates_at(&self, tau: f64) -> Vec<f64> {
        self.growth.eval(tau).diagonal_entries()
    }

    /// Irreducibility of the averaged migration matrix. Averages produced by
    /// quadrature use a 1e-12 threshold, exact averages use `> 0`.
    pub fn satisfies_h2(&self) -> bool {
        let threshold = if self.migration.is_piecewise_constant() {
            0.0
        } else {
            1e-12
        };
        is_irreducible_with_threshold(&self.migration.average(), threshold)
    }

    /// Same model with every growth rate shifted by `c`.
    pub fn with_growth_shift(&self, c: f64) -> Self {
        let growth = self.growth.shifted(c);
        let combined = merge_breakpoints(&growth, &self.migration).expect("same dimension");
        Self {
            growth,
            migration: self.migration.clone(),
            combined,
        }
    }
}

fn check_growth_sample(m: &SquareMatrix) -> std::result::Result<(), String> {
    let n = m.n();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                return Err(format!("off-diagonal growth entry ({i}, {j}) = {}", m[(i, j)]));
            }
        }
    }
    Ok(())
}

fn check_migration_sample(m: &SquareMatrix) -> std::result::Result<(), String> {
    if !is_metzler(m) {
        return Err("migration matrix has a negative off-diagonal entry".into());
    }
    for (j, s) in m.column_sums().into_iter().enumerate() {
        if s.abs() > COLUMN_SUM_TOL {
            return Err(format!("migration column {j} sums to {s}, expected 0"));
        }
    }
    Ok(())
}

/// Concrete path `A(τ) = R(τ) + m L(τ)`.
pub fn bind(model: &PatchModel, params: &ModelParameters) -> PiecewiseMatrixPath {
    model.combined().bind(params.m)
}
