//! Dense linear algebra for small Metzler and nonnegative matrices.
//!
//! Indexing follows the population convention: entry `(i, j)` is the flow
//! into patch `i` from patch `j`, so column sums are per-patch totals.

use std::fmt;
use std::ops::Deref;

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square matrix with finite entries and `n >= 1`.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<f64>);

impl SquareMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some((k, v)) = m.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let n = m.nrows();
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) is not finite: {v}",
                k % n,
                k / n
            )));
        }
        Ok(Self(m))
    }

    /// Skips validation; callers guarantee squareness and finiteness.
    pub(crate) fn from_dmatrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() == m.ncols() && m.nrows() > 0);
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row {bad} has length {}, expected {n}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn plus(&self, other: &SquareMatrix) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn minus(&self, other: &SquareMatrix) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(&self.0 - &other.0))
    }

    /// `self * other`
    pub fn matmul(&self, other: &SquareMatrix) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.n() {
            m[(i, i)] += c;
        }
        Self(m)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.0.column(j).sum()).collect()
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n())
            .map(|j| self.0.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, other: &SquareMatrix) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(())
    }
}

impl Deref for SquareMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl Serialize for SquareMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SquareMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Spectral abscissa of a Metzler matrix with its dominant nonnegative eigenvector.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    pub lambda_max: f64,
    /// Simplex-normalized nonnegative eigenvector for `lambda_max`, if one was selected.
    pub eigvec: Option<Vec<f64>>,
    pub simple: bool,
    /// Distance from `lambda_max` to the next-largest real part (infinite for n = 1).
    pub gap: f64,
    /// All eigenvalues as (re, im), sorted by decreasing real part.
    pub eigenvalues: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerronResult {
    pub mu: f64,
    pub pi: Vec<f64>,
}

/// Relative gap below which the dominant eigenvalue counts as non-simple.
pub const SIMPLICITY_TOL: f64 = 1e-9;

pub fn is_metzler(m: &SquareMatrix) -> bool {
    let n = m.n();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= 0.0))
}

/// Strong connectivity of the graph with an edge `j -> i` whenever `M(i, j) > 0`.
pub fn is_irreducible(m: &SquareMatrix) -> bool {
    is_irreducible_with_threshold(m, 0.0)
}

/// Same as [`is_irreducible`] but edges require `M(i, j) > threshold`.
#[allow(clippy::needless_range_loop)]
pub fn is_irreducible_with_threshold(m: &SquareMatrix, threshold: f64) -> bool {
    let n = m.n();
    if n == 1 {
        return true;
    }
    let edge = |from: usize, to: usize| from != to && m[(to, from)] > threshold;
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let e = if forward { edge(u, v) } else { edge(v, u) };
                if e && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

pub(crate) fn eigenvalues(m: &SquareMatrix) -> Result<Vec<(f64, f64)>> {
    let n = m.n();
    if n == 1 {
        return Ok(vec![(m[(0, 0)], 0.0)]);
    }
    let schur = Schur::try_new(m.as_dmatrix().clone(), f64::EPSILON, 10_000 * n)
        .ok_or_else(|| Error::EigenSolver { matrix: m.clone() })?;
    let mut eigs: Vec<(f64, f64)> = schur
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect();
    if eigs.iter().any(|(re, im)| !re.is_finite() || !im.is_finite()) {
        return Err(Error::EigenSolver { matrix: m.clone() });
    }
    eigs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.abs().total_cmp(&b.1.abs()))
    });
    Ok(eigs)
}

/// Orthonormal basis (as columns) of the numerical null space of `m - lambda I`.
fn null_space(m: &SquareMatrix, lambda: f64, force_one: bool) -> Vec<Vec<f64>> {
    let n = m.n();
    let shifted = m.shifted(-lambda).into_inner();
    let svd = shifted.svd(false, true);
    let v_t = match svd.v_t {
        Some(v) => v,
        None => return Vec::new(),
    };
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let tol = 1e-8 * (1.0 + m.max_abs() * n as f64);
    let mut basis: Vec<Vec<f64>> = order
        .iter()
        .filter(|&&k| sv[k] <= tol)
        .map(|&k| v_t.row(k).iter().copied().collect())
        .collect();
    if basis.is_empty() && force_one {
        basis.push(v_t.row(order[0]).iter().copied().collect());
    }
    basis
}

/// Clips round-off negatives and normalizes to the simplex; `None` if the
/// vector has a genuinely negative entry or a nonpositive sum.
fn to_simplex(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let sum: f64 = v.iter().sum();
    if sum < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    if v.iter().any(|&x| x < -1e-9 * scale) {
        return None;
    }
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= total);
    Some(v)
}

/// Spectral abscissa of a Metzler matrix.
///
/// Eigenvalues come from a dense Schur decomposition of `M + rI`,
/// `r = 1 + max|M_ii|`, shifted back. When the dominant eigenvalue is
/// simple its eigenvector is returned normalized to the simplex. When it is
/// not, the uniform vector is projected onto the dominant eigenspace and
/// kept only if the projection is nonnegative.
pub fn spectral_abscissa(m: &SquareMatrix) -> Result<SpectralResult> {
    let n = m.n();
    let r = 1.0 + m.diagonal_entries().iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut eigs = eigenvalues(&m.shifted(r))?;
    for e in eigs.iter_mut() {
        e.0 -= r;
    }
    let lambda_max = eigs[0].0;
    let gap = if n == 1 {
        f64::INFINITY
    } else {
        (lambda_max - eigs[1].0).max(0.0)
    };
    let simple = gap > SIMPLICITY_TOL * (1.0 + lambda_max.abs());

    let eigvec = if simple {
        null_space(m, lambda_max, true)
            .into_iter()
            .next()
            .and_then(to_simplex)
    } else {
        let basis = null_space(m, lambda_max, true);
        let u = 1.0 / n as f64;
        let mut proj = vec![0.0; n];
        for b in &basis {
            let coeff: f64 = b.iter().map(|x| x * u).sum();
            for (p, x) in proj.iter_mut().zip(b) {
                *p += coeff * x;
            }
        }
        to_simplex(proj)
    };

    Ok(SpectralResult {
        lambda_max,
        eigvec,
        simple,
        gap,
        eigenvalues: eigs,
    })
}

/// Perron–Frobenius root and simplex-normalized vector of an irreducible
/// nonnegative matrix.
pub fn perron_root(nn: &SquareMatrix) -> Result<PerronResult> {
    if !nn.is_nonnegative() || !is_irreducible(nn) {
        return Err(Error::NotIrreducibleNonnegative);
    }
    dominant_nonnegative(nn)
}

/// Dominant eigenpair of a nonnegative matrix without the irreducibility
/// precondition. The vector may have zero entries when the matrix is reducible.
pub(crate) fn dominant_nonnegative(nn: &SquareMatrix) -> Result<PerronResult> {
    let n = nn.n();
    let eigs = eigenvalues(nn)?;
    let mu = eigs[0].0;
    if mu <= 0.0 {
        return Err(Error::NotIrreducibleNonnegative);
    }
    let mut pi = null_space(nn, mu, true)
        .into_iter()
        .next()
        .and_then(to_simplex)
        .unwrap_or_else(|| vec![1.0 / n as f64; n]);
    // Power steps keep the vector nonnegative and restore entries lost to
    // round-off without moving it off the dominant direction.
    for _ in 0..n {
        let next = nn.apply(&pi);
        let s: f64 = next.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            break;
        }
        pi = next.into_iter().map(|x| x / s).collect();
    }
    Ok(PerronResult { mu, pi })
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `exp(t M)` by scaling and squaring around a Padé(13) approximant.
pub fn matrix_exponential(m: &SquareMatrix, t: f64) -> Result<SquareMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidParameters(format!("non-finite time {t}")));
    }
    let n = m.n();
    if t == 0.0 || m.iter().all(|&v| v == 0.0) {
        return Ok(SquareMatrix::identity(n));
    }
    let a = m.as_dmatrix() * t;
    let norm = SquareMatrix::from_dmatrix_unchecked(a.clone()).norm1();
    if n == 1 {
        let v = a[(0, 0)].exp();
        if !v.is_finite() {
            return Err(Error::Overflow(norm));
        }
        return Ok(SquareMatrix::from_dmatrix_unchecked(DMatrix::from_element(1, 1, v)));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .ok_or(Error::Overflow(norm))?;
    for _ in 0..s {
        r = &r * &r;
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow(norm));
        }
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow(norm));
    }
    Ok(SquareMatrix::from_dmatrix_unchecked(r))
}

/// A matrix stored as `exp(log_scale) * mat`, used to carry propagators whose
/// entries would overflow.
#[derive(Clone, Debug)]
pub struct ScaledMatrix {
    pub mat: SquareMatrix,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            mat: SquareMatrix::identity(n),
            log_scale: 0.0,
        }
    }

    /// `self` applied after `first`, i.e. `self * first`, renormalized.
    pub fn after(&self, first: &ScaledMatrix) -> Self {
        let prod = self.mat.as_dmatrix() * first.mat.as_dmatrix();
        let mut out = Self {
            mat: SquareMatrix::from_dmatrix_unchecked(prod),
            log_scale: self.log_scale + first.log_scale,
        };
        out.normalize();
        out
    }

    pub fn normalize(&mut self) {
        let s = self.mat.max_abs();
        if s > 0.0 && s.is_finite() {
            self.mat = self.mat.scaled(1.0 / s);
            self.log_scale += s.ln();
        }
    }

    pub fn to_unscaled(&self) -> Result<SquareMatrix> {
        let f = self.log_scale.exp();
        let m = self.mat.scaled(f);
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow(self.log_scale));
        }
        Ok(m)
    }
}

/// `exp(t M)` as a scaled matrix: the exponent is shifted by the spectral
/// abscissa so the stored factor stays bounded for Metzler `M`.
pub fn matrix_exponential_scaled(m: &SquareMatrix, t: f64) -> Result<ScaledMatrix> {
    let shift = spectral_abscissa(m)
        .map(|s| s.lambda_max)
        .unwrap_or_else(|_| m.diagonal_entries().into_iter().fold(f64::MIN, f64::max));
    let e = matrix_exponential(&m.shifted(-shift), t)?;
    let mut out = ScaledMatrix {
        mat: e,
        log_scale: shift * t,
    };
    out.normalize();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn metzler_examples() {
        assert!(is_metzler(&mat(&[&[-1.0, 1.0], &[1.0, -1.0]])));
        assert!(!is_metzler(&mat(&[&[0.0, -0.1], &[1.0, 0.0]])));
        assert!(is_metzler(&SquareMatrix::identity(3)));
    }

    #[test]
    fn irreducibility_examples() {
        assert!(is_irreducible(&mat(&[&[-1.0, 1.0], &[1.0, -1.0]])));
        assert!(!is_irreducible(&mat(&[&[-1.0, 1.0], &[0.0, -1.0]])));
        let cycle = mat(&[&[-1.0, 0.0, 1.0], &[1.0, -1.0, 0.0], &[0.0, 1.0, -1.0]]).scaled(1.0 / 3.0);
        assert!(is_irreducible(&cycle));
        assert!(is_irreducible(&SquareMatrix::identity(1)));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SquareMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(SquareMatrix::from_rows(&[]).is_err());
        assert!(SquareMatrix::from_rows(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn spectral_abscissa_diagonal() {
        let s = spectral_abscissa(&SquareMatrix::diagonal(&[-0.5, 0.5]).unwrap()).unwrap();
        assert!((s.lambda_max - 0.5).abs() < 1e-14);
        assert!(s.simple);
        let v = s.eigvec.unwrap();
        assert!(v[0].abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_abscissa_two_by_two_block() {
        let a1 = mat(&[&[0.0, 1.0, 0.0], &[1.0, -2.0, 0.0], &[0.0, 0.0, -1.0]]);
        let s = spectral_abscissa(&a1).unwrap();
        assert!((s.lambda_max - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!(s.simple);
    }

    #[test]
    fn spectral_abscissa_with_secondary_nonnegative_eigenvector() {
        // b-patches 1,2 share symmetric migration, a-patch 3 isolated
        let (a, b, m) = (1.0, -1.0, 1.0);
        let a1 = mat(&[&[b - m, m, 0.0], &[m, b - m, 0.0], &[0.0, 0.0, a]]);
        let s = spectral_abscissa(&a1).unwrap();
        assert!((s.lambda_max - a).abs() < 1e-12);
        assert!(s.simple);
        assert!((s.gap - (a - b)).abs() < 1e-12);
        let v = s.eigvec.unwrap();
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_simple_selects_projection_of_uniform() {
        let l1 = mat(&[&[-1.0, 1.0, 0.0], &[1.0, -1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let s = spectral_abscissa(&l1).unwrap();
        assert!(s.lambda_max.abs() < 1e-12);
        assert!(!s.simple);
        let v = s.eigvec.unwrap();
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn perron_examples() {
        let p = perron_root(&mat(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((p.mu - 1.0).abs() < 1e-14);
        assert!((p.pi[0] - 0.5).abs() < 1e-12);

        // closed form: mu = (3 + sqrt(1 + 4e-8)) / 2, pi ∝ (mu - 1, 1e-4)
        let p = perron_root(&mat(&[&[2.0, 1e-4], &[1e-4, 1.0]])).unwrap();
        let mu = (3.0 + (1.0f64 + 4e-8).sqrt()) / 2.0;
        assert!((p.mu - mu).abs() < 1e-14);
        let (x, y) = (mu - 1.0, 1e-4);
        assert!((p.pi[0] - x / (x + y)).abs() < 1e-12);
        assert!((p.pi[1] - y / (x + y)).abs() < 1e-12);

        let c = 0.7f64;
        let p = perron_root(&mat(&[&[c.exp()]])).unwrap();
        assert!((p.mu - c.exp()).abs() < 1e-15);
        assert_eq!(p.pi, vec![1.0]);
    }

    #[test]
    fn perron_rejects_reducible() {
        let e = perron_root(&mat(&[&[1.0, 1.0], &[0.0, 1.0]])).unwrap_err();
        assert!(e.to_string().contains("requires irreducible nonnegative matrix"));
    }

    #[test]
    fn exponential_examples() {
        let z = matrix_exponential(&SquareMatrix::zeros(3), 5.0).unwrap();
        assert_eq!(z, SquareMatrix::identity(3));
        let d = matrix_exponential(&SquareMatrix::diagonal(&[1.0, -1.0]).unwrap(), 2f64.ln()).unwrap();
        assert!((d[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((d[(1, 1)] - 0.5).abs() < 1e-14);
        assert_eq!(d[(0, 1)], 0.0);
        let e = matrix_exponential(&SquareMatrix::identity(2), 0.0).unwrap();
        assert_eq!(e, SquareMatrix::identity(2));
    }

    #[test]
    fn exponential_against_series() {
        let m = mat(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let e = matrix_exponential(&m, 1.0).unwrap();
        // Taylor series oracle
        let mut term = DMatrix::<f64>::identity(2, 2);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * m.as_dmatrix() / k as f64;
            sum += &term;
        }
        let e2 = (-2.0f64).exp();
        let closed = [(1.0 + e2) / 2.0, (1.0 - e2) / 2.0];
        for i in 0..2 {
            for j in 0..2 {
                assert!((e[(i, j)] - sum[(i, j)]).abs() < 1e-14);
                let c = if i == j { closed[0] } else { closed[1] };
                assert!((e[(i, j)] - c).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exponential_overflow_is_an_error() {
        let e = matrix_exponential(&SquareMatrix::diagonal(&[1.0, 0.0]).unwrap(), 1000.0);
        assert!(matches!(e, Err(Error::Overflow(_))));
    }

    #[test]
    fn scaled_exponential_survives_overflow() {
        let m = SquareMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let s = matrix_exponential_scaled(&m, 1000.0).unwrap();
        assert!((s.log_scale - 1000.0).abs() < 1e-9);
        assert!((s.mat[(0, 0)] - 1.0).abs() < 1e-12);
    }
}
