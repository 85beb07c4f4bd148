use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// Nodes of the 32-point rule mapped onto [a, b] with their weights.
pub fn gl32_points(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gl32();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(w.iter()).map(move |(xi, wi)| (mid + half * xi, half * wi))
}

pub fn integrate_gl32(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    gl32_points(a, b).map(|(t, w)| w * f(t)).sum()
}

/// `k` Chebyshev points of the first kind inside (a, b); the midpoint when k = 1.
pub fn chebyshev_points(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..k)
        .map(|j| {
            let c = (std::f64::consts::PI * (j as f64 + 0.5) / k as f64).cos();
            a + 0.5 * (b - a) * (1.0 - c)
        })
        .collect()
}
