//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use patchgrowth::path::PiecewiseMatrixPath;
use patchgrowth::{Breakpoint, PatchModel, SquareMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random Metzler matrix with zero column sums. Each off-diagonal entry is
/// zero with probability `sparsity`, otherwise uniform on (0, 2).
#[allow(clippy::needless_range_loop)]
pub fn random_migration(rng: &mut ChaCha8Rng, n: usize, sparsity: f64) -> SquareMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j && !rng.gen_bool(sparsity) {
                *v = rng.gen_range(0.0..2.0);
            }
        }
    }
    for j in 0..n {
        let s: f64 = (0..n).filter(|&i| i != j).map(|i| rows[i][j]).sum();
        rows[j][j] = -s;
    }
    SquareMatrix::from_rows(&rows).unwrap()
}

/// Sorted breakpoints `0 = t₀ < … < t_{k-1} < 1` with gaps of at least 0.05.
pub fn random_breakpoints(rng: &mut ChaCha8Rng, k: usize) -> Vec<Breakpoint> {
    loop {
        let mut t: Vec<f64> = (1..k).map(|_| rng.gen_range(0.05..0.95)).collect();
        t.push(0.0);
        t.sort_by(f64::total_cmp);
        if t.windows(2).all(|w| w[1] - w[0] >= 0.05) {
            return t.into_iter().map(|x| if x == 0.0 { Breakpoint::zero() } else { Breakpoint::Float(x) }).collect();
        }
    }
}

/// Random piecewise-constant model with `n` patches and `k` segments,
/// growth rates on [-2, 2]; redrawn until the averaged migration is
/// irreducible.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, k: usize) -> PatchModel {
    loop {
        let starts = random_breakpoints(rng, k);
        let rates: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let mig: Vec<SquareMatrix> = (0..k).map(|_| random_migration(rng, n, 0.5)).collect();
        let model = PatchModel::piecewise_constant(starts, rates, mig).unwrap();
        if model.satisfies_h2() {
            return model;
        }
    }
}

/// Log-uniform sample on `[lo, hi]`.
pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Monodromy of `dX/dt = A(t/T) X` with classical RK4 at a step no larger
/// than `h`, landing exactly on every breakpoint.
pub fn rk4_monodromy(a: &PiecewiseMatrixPath, period: f64, h: f64) -> Vec<Vec<f64>> {
    let n = a.n();
    let mut x = vec![vec![0.0; n]; n];
    for (i, row) in x.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mul = |m: &SquareMatrix, x: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| m.get(i, k) * x[k][j]).sum()).collect())
            .collect()
    };
    let axpy = |x: &[Vec<f64>], s: f64, k: &[Vec<f64>]| -> Vec<Vec<f64>> {
        x.iter()
            .zip(k)
            .map(|(r, kr)| r.iter().zip(kr).map(|(a, b)| a + s * b).collect())
            .collect()
    };
    for seg in 0..a.len() {
        let (t0, t1) = a.interval(seg);
        let s = a.segment(seg);
        let len = (t1 - t0) * period;
        let steps = (len / h).ceil().max(1.0) as usize;
        let dt = len / steps as f64;
        for j in 0..steps {
            let t = t0 * period + j as f64 * dt;
            let at = |tt: f64| s.eval(tt / period);
            let k1 = mul(&at(t), &x);
            let k2 = mul(&at(t + 0.5 * dt), &axpy(&x, 0.5 * dt, &k1));
            let k3 = mul(&at(t + 0.5 * dt), &axpy(&x, 0.5 * dt, &k2));
            let k4 = mul(&at(t + dt), &axpy(&x, dt, &k3));
            for i in 0..n {
                for c in 0..n {
                    x[i][c] += dt / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
                }
            }
        }
    }
    x
}
