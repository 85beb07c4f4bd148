//! Asymptotic limits of the growth rate in `m` and `T`, the bounds σ and χ,
//! and difference diagnostics for the short-period profile `m ↦ Λ(m, 0)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{spectral_abscissa, SquareMatrix};
use crate::path::{PatchModel, PiecewiseMatrixPath, Segment};
use crate::quadrature::{gl32_points, integrate_gl32};
use crate::simplex::{check_h2, check_h3, check_h4, CheckConfig, Hypothesis, HypothesisReport, Verdict};

/// Maximum number of crossings located per smooth segment.
pub const CROSSING_CAP: usize = 1024;
const CROSSING_SAMPLES: usize = 64;

/// Roots of `f` on `[a, b)` found from sign changes on a uniform grid and
/// refined by bisection to 1e-12 relative.
fn sign_changes(f: impl Fn(f64) -> f64, a: f64, b: f64, segment: usize, out: &mut Vec<f64>) -> Result<()> {
    let k = CROSSING_SAMPLES;
    let ts: Vec<f64> = (0..=k)
        .map(|j| a + (b - a) * j as f64 / k as f64 * (1.0 - 1e-13))
        .collect();
    let vs: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    for j in 0..k {
        let (mut lo, mut hi) = (ts[j], ts[j + 1]);
        let (mut flo, fhi) = (vs[j], vs[j + 1]);
        if flo == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
        if out.len() > CROSSING_CAP {
            return Err(Error::CrossingCap {
                segment,
                cap: CROSSING_CAP,
            });
        }
    }
    Ok(())
}

/// Subdivision of `[a, b)` at the pairwise crossings of the diagonal
/// entries of a smooth segment.
pub(crate) fn diagonal_crossings(seg: &Segment, a: f64, b: f64, segment: usize) -> Result<Vec<f64>> {
    let n = seg.eval(a).n();
    let mut cuts = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            sign_changes(
                |t| {
                    let m = seg.eval(t);
                    m[(i, i)] - m[(j, j)]
                },
                a,
                b,
                segment,
                &mut cuts,
            )?;
            if cuts.len() > CROSSING_CAP {
                return Err(Error::CrossingCap {
                    segment,
                    cap: CROSSING_CAP,
                });
            }
        }
    }
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
    Ok(cuts)
}

/// `σ = ∫ minᵢ rᵢ` and `χ = ∫ maxᵢ rᵢ` over one period.
pub fn sigma_chi(model: &PatchModel) -> Result<(f64, f64)> {
    let g = model.growth();
    let (mut sigma, mut chi) = (0.0, 0.0);
    for k in 0..g.len() {
        let (a, b) = g.interval(k);
        let seg = g.segment(k);
        let lo = |t: f64| seg.eval(t).diagonal_entries().into_iter().fold(f64::INFINITY, f64::min);
        let hi = |t: f64| seg.eval(t).diagonal_entries().into_iter().fold(f64::NEG_INFINITY, f64::max);
        match seg {
            Segment::Constant(_) => {
                sigma += (b - a) * lo(a);
                chi += (b - a) * hi(a);
            }
            Segment::Smooth { .. } => {
                let cuts = diagonal_crossings(seg, a, b, k)?;
                for w in cuts.windows(2) {
                    sigma += integrate_gl32(lo, w[0], w[1]);
                    chi += integrate_gl32(hi, w[0], w[1]);
                }
            }
        }
    }
    Ok((sigma, chi))
}

/// `Λ(0, T) = maxᵢ r̄ᵢ`.
pub fn lambda_m_to_0(model: &PatchModel) -> f64 {
    model.mean_growth().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `Λ(m, 0) = λ_max(R̄ + m L̄)`.
pub fn lambda_t_to_0(model: &PatchModel, m: f64) -> Result<f64> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameters(format!("m must be >= 0, got {m}")));
    }
    if m == 0.0 {
        return Ok(lambda_m_to_0(model));
    }
    if !model.satisfies_h2() {
        return Err(Error::Reducible);
    }
    let avg = model.growth().average().plus(&model.migration().average().scaled(m))?;
    Ok(spectral_abscissa(&avg)?.lambda_max)
}

/// `∫ λ_max(A(τ)) dτ` for the path bound at `m`, without checking H3.
pub fn lambda_t_to_inf_formula(model: &PatchModel, m: f64) -> Result<f64> {
    integrate_abscissa(&model.combined().bind(m))
}

fn integrate_abscissa(path: &PiecewiseMatrixPath) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..path.len() {
        let (a, b) = path.interval(k);
        let seg = path.segment(k);
        match seg {
            Segment::Constant(mat) => total += (b - a) * spectral_abscissa(mat)?.lambda_max,
            Segment::Smooth { .. } => {
                let cuts = abscissa_kinks(seg, a, b)?;
                for w in cuts.windows(2) {
                    for (t, wt) in gl32_points(w[0], w[1]) {
                        total += wt * spectral_abscissa(&seg.eval(t))?.lambda_max;
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Points where the dominant eigenvalue changes branch: local minima of the
/// spectral gap that come close to zero, refined by golden-section search.
fn abscissa_kinks(seg: &Segment, a: f64, b: f64) -> Result<Vec<f64>> {
    let k = CROSSING_SAMPLES;
    let gap = |t: f64| -> Result<f64> { Ok(spectral_abscissa(&seg.eval(t))?.gap) };
    let ts: Vec<f64> = (0..=k)
        .map(|j| a + (b - a) * j as f64 / k as f64 * (1.0 - 1e-13))
        .collect();
    let gs = ts.iter().map(|&t| gap(t)).collect::<Result<Vec<_>>>()?;
    let scale = gs.iter().cloned().filter(|g| g.is_finite()).fold(0.0f64, f64::max);
    let mut cuts = vec![a, b];
    for j in 1..k {
        if gs[j] <= gs[j - 1] && gs[j] <= gs[j + 1] && gs[j] < 0.1 * scale {
            let (mut lo, mut hi) = (ts[j - 1], ts[j + 1]);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            while hi - lo > 1e-12 * (1.0 + lo.abs()) {
                let x1 = hi - phi * (hi - lo);
                let x2 = lo + phi * (hi - lo);
                if gap(x1)? < gap(x2)? {
                    hi = x2;
                } else {
                    lo = x1;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
    Ok(cuts)
}

/// Kernel vector of a migration matrix, normalized to the simplex.
fn kernel_vector(l: &SquareMatrix) -> Result<Vec<f64>> {
    let s = spectral_abscissa(l)?;
    s.eigvec
        .ok_or_else(|| Error::Construction("migration matrix has no nonnegative kernel vector".into()))
}

/// `Σᵢ ∫ pᵢ(τ) rᵢ(τ) dτ` with `p(τ)` the kernel vector of `L(τ)`, without
/// checking H4. When 0 is a multiple eigenvalue the canonical nonnegative
/// vector of the kernel is used.
pub fn lambda_m_to_inf_formula(model: &PatchModel) -> Result<f64> {
    let comb = model.combined();
    let mut total = 0.0;
    for (k, (g, l)) in comb.pieces().iter().enumerate() {
        let a = comb.breakpoints()[k].value();
        let b = comb.breakpoints().get(k + 1).map(|b| b.value()).unwrap_or(1.0);
        let integrand = |t: f64| -> Result<f64> {
            let p = kernel_vector(&l.eval(t))?;
            let r = g.eval(t).diagonal_entries();
            Ok(p.iter().zip(&r).map(|(p, r)| p * r).sum())
        };
        if g.is_constant() && l.is_constant() {
            total += (b - a) * integrand(a)?;
        } else {
            for (t, w) in gl32_points(a, b) {
                total += w * integrand(t)?;
            }
        }
    }
    Ok(total)
}

/// `Σᵢ qᵢ r̄ᵢ` with `q` the kernel vector of `L̄`.
pub fn lambda_inf_0(model: &PatchModel) -> Result<f64> {
    if !model.satisfies_h2() {
        return Err(Error::Reducible);
    }
    let q = kernel_vector(&model.migration().average())?;
    Ok(q.iter().zip(model.mean_growth()).map(|(q, r)| q * r).sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitOptions {
    /// Evaluate gated formulas even when their hypothesis is not verified.
    pub force: bool,
    pub check: CheckConfig,
    /// Migration strength used to probe H3 for the `m → 0, T → ∞` corner.
    pub probe_m: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            force: false,
            check: CheckConfig::default(),
            probe_m: 1e-2,
        }
    }
}

/// A limit whose formula needs a hypothesis.
#[derive(Clone, Debug, Serialize)]
pub struct LimitValue {
    pub value: Option<f64>,
    pub requires: Hypothesis,
    pub verdict: Verdict,
    /// The value was computed although the hypothesis was not verified.
    pub forced: bool,
    pub note: String,
}

impl LimitValue {
    fn gated(requires: Hypothesis, report: &HypothesisReport, force: bool, formula: impl FnOnce() -> Result<f64>) -> Result<Self> {
        let verified = report.is_verified();
        let value = if verified || force { Some(formula()?) } else { None };
        let note = if verified {
            String::new()
        } else if force {
            "formula value, hypothesis unverified".to_string()
        } else {
            report
                .witnesses
                .iter()
                .chain(&report.inconclusive)
                .next()
                .map(|w| format!("τ={}: {}", w.tau, w.reason))
                .unwrap_or_default()
        };
        Ok(Self {
            value,
            requires,
            verdict: report.verdict,
            forced: force && !verified,
            note,
        })
    }
}

/// `Λ(m, ∞)`, available when H3 holds at `m`.
pub fn lambda_t_to_inf(model: &PatchModel, m: f64, opts: &LimitOptions) -> Result<(LimitValue, HypothesisReport)> {
    let report = check_h3(model, m, &opts.check)?;
    let v = LimitValue::gated(Hypothesis::H3, &report, opts.force, || lambda_t_to_inf_formula(model, m))?;
    Ok((v, report))
}

/// `Λ(∞, T)`, available when H4 holds.
pub fn lambda_m_to_inf(model: &PatchModel, opts: &LimitOptions) -> Result<(LimitValue, HypothesisReport)> {
    let report = check_h4(model, &opts.check);
    let v = LimitValue::gated(Hypothesis::H4, &report, opts.force, || lambda_m_to_inf_formula(model))?;
    Ok((v, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct CornerLimits {
    pub lambda_00: f64,
    pub lambda_0inf: LimitValue,
    pub lambda_inf0: Option<f64>,
}

/// `Λ(0,0) = max r̄ᵢ`, `Λ(0,∞) = χ` (gated by H3 at a small probe `m`) and
/// `Λ(∞,0) = Σ qᵢ r̄ᵢ` (needs H2).
pub fn corner_limits(model: &PatchModel, opts: &LimitOptions) -> Result<CornerLimits> {
    let report = check_h3(model, opts.probe_m, &opts.check)?;
    let lambda_0inf = LimitValue::gated(Hypothesis::H3, &report, opts.force, || Ok(sigma_chi(model)?.1))?;
    let lambda_inf0 = match lambda_inf_0(model) {
        Ok(v) => Some(v),
        Err(Error::Reducible) => None,
        Err(e) => return Err(e),
    };
    Ok(CornerLimits {
        lambda_00: lambda_m_to_0(model),
        lambda_0inf,
        lambda_inf0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub m: f64,
    pub sigma: f64,
    pub chi: f64,
    pub lambda_0t: f64,
    pub lambda_m0: Option<f64>,
    pub lambda_minf: LimitValue,
    pub lambda_inft: LimitValue,
    pub lambda_00: f64,
    pub lambda_0inf: LimitValue,
    pub lambda_inf0: Option<f64>,
    pub h2: HypothesisReport,
    pub h3: HypothesisReport,
    pub h4: HypothesisReport,
}

impl LimitReport {
    /// Every value present in the report, by label.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("sigma", self.sigma),
            ("chi", self.chi),
            ("lambda_0T", self.lambda_0t),
            ("lambda_00", self.lambda_00),
        ];
        let opt = [
            ("lambda_m0", self.lambda_m0),
            ("lambda_mInf", self.lambda_minf.value),
            ("lambda_infT", self.lambda_inft.value),
            ("lambda_0inf", self.lambda_0inf.value),
            ("lambda_inf0", self.lambda_inf0),
        ];
        out.extend(opt.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        out
    }
}

/// All limits at migration strength `m > 0`.
pub fn limit_report(model: &PatchModel, m: f64, opts: &LimitOptions) -> Result<LimitReport> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameters(format!("m must be > 0, got {m}")));
    }
    let (sigma, chi) = sigma_chi(model)?;
    let h2 = check_h2(model);
    let lambda_m0 = if h2.is_verified() { Some(lambda_t_to_0(model, m)?) } else { None };
    let (lambda_minf, h3) = lambda_t_to_inf(model, m, opts)?;
    let (lambda_inft, h4) = lambda_m_to_inf(model, opts)?;
    let corners = corner_limits(model, opts)?;
    Ok(LimitReport {
        m,
        sigma,
        chi,
        lambda_0t: lambda_m_to_0(model),
        lambda_m0,
        lambda_minf,
        lambda_inft,
        lambda_00: corners.lambda_00,
        lambda_0inf: corners.lambda_0inf,
        lambda_inf0: corners.lambda_inf0,
        h2,
        h3,
        h4,
    })
}

/// Strictness threshold for the difference diagnostics.
pub const PROFILE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct M0Profile {
    pub m: Vec<f64>,
    pub values: Vec<f64>,
    /// Divided differences between consecutive grid points.
    pub first: Vec<f64>,
    /// Second divided differences at interior grid points.
    pub second: Vec<f64>,
    /// All mean growth rates coincide; the profile should be flat.
    pub equal_means: bool,
    pub decreasing: bool,
    pub convex: bool,
    pub constant: bool,
    /// Large-`m` limit `Σ qᵢ r̄ᵢ`.
    pub tail: f64,
}

/// `Λ(m, 0)` on a grid of positive `m` values with numeric monotonicity and
/// convexity checks.
pub fn lambda_m0_profile(model: &PatchModel, grid: &[f64]) -> Result<M0Profile> {
    let mut m: Vec<f64> = grid.to_vec();
    m.sort_by(f64::total_cmp);
    m.dedup();
    if m.is_empty() || m[0] <= 0.0 {
        return Err(Error::InvalidParameters("profile grid needs positive m values".into()));
    }
    let values = m.iter().map(|&x| lambda_t_to_0(model, x)).collect::<Result<Vec<_>>>()?;
    let first: Vec<f64> = (0..m.len().saturating_sub(1))
        .map(|k| (values[k + 1] - values[k]) / (m[k + 1] - m[k]))
        .collect();
    let second: Vec<f64> = (1..m.len().saturating_sub(1))
        .map(|k| 2.0 * (first[k] - first[k - 1]) / (m[k + 1] - m[k - 1]))
        .collect();
    let rbar = model.mean_growth();
    let equal_means = rbar.iter().all(|r| (r - rbar[0]).abs() <= 1e-12);
    Ok(M0Profile {
        decreasing: first.iter().all(|&d| d < -PROFILE_TOL),
        convex: second.iter().all(|&d| d > PROFILE_TOL),
        constant: values.iter().all(|v| (v - values[0]).abs() <= PROFILE_TOL),
        tail: lambda_inf_0(model)?,
        m,
        values,
        first,
        second,
        equal_means,
    })
}
