//! Growth rate over a grid of `(m, T)` values.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::monodromy::growth_rate;
use crate::path::{ModelParameters, PatchModel};

/// Values along one grid axis: an explicit list or a log-spaced range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridAxis(pub Vec<f64>);

impl GridAxis {
    /// `k` log-spaced values from `lo` to `hi` inclusive.
    pub fn log(lo: f64, hi: f64, k: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) || k == 0 {
            return Err(Error::InvalidParameters(format!(
                "log range needs 0 < lo <= hi and k >= 1, got {lo}:{hi}:{k}"
            )));
        }
        if k == 1 {
            return Ok(Self(vec![lo]));
        }
        let (a, b) = (lo.log10(), hi.log10());
        Ok(Self(
            (0..k)
                .map(|j| 10f64.powf(a + (b - a) * j as f64 / (k - 1) as f64))
                .collect(),
        ))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Parses `log:lo:hi:k` or a comma-separated list.
impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::InvalidParameters(format!("expected log:lo:hi:k, got `{s}`")));
            }
            let num = |p: &str| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameters(format!("bad number `{p}` in `{s}`")))
            };
            let k = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameters(format!("bad count `{}` in `{s}`", parts[2])))?;
            return Self::log(num(parts[0])?, num(parts[1])?, k);
        }
        let vals = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameters(format!("bad grid value `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self(vals))
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|v| format!("{v}")).collect();
        write!(f, "{}", s.join(","))
    }
}

/// Grid of migration strengths and periods.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub m: Vec<f64>,
    pub t: Vec<f64>,
}

impl SweepGrid {
    pub fn new(m: GridAxis, t: GridAxis) -> Result<Self> {
        if m.0.is_empty() || t.0.is_empty() {
            return Err(Error::InvalidParameters("grid axes must be nonempty".into()));
        }
        if let Some(v) = m.0.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameters(format!("grid m values must be >= 0, got {v}")));
        }
        if let Some(v) = t.0.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameters(format!("grid T values must be > 0, got {v}")));
        }
        Ok(Self { m: m.0, t: t.0 })
    }

    /// 13 log-spaced values from 1e-2 to 1e3 on both axes.
    pub fn default_log() -> Self {
        let axis = GridAxis::log(1e-2, 1e3, 13).expect("valid range");
        Self {
            m: axis.0.clone(),
            t: axis.0,
        }
    }

    /// Grid points with `m` as the outer index.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.m
            .iter()
            .flat_map(|&m| self.t.iter().map(move |&t| (m, t)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.m.len() * self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub lambda: f64,
    pub mu: f64,
    pub decoupled: bool,
}

/// Runs `f` on a pool of `jobs` threads, or the global pool when `None`.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidParameters("jobs must be at least 1".into())),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::InvalidParameters(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// `Λ` and `μ` at every grid point, in grid order.
pub fn sweep(model: &PatchModel, grid: &SweepGrid, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    let points = grid.points();
    with_jobs(jobs, || {
        points
            .par_iter()
            .map(|&(m, t)| {
                let r = growth_rate(model, &ModelParameters::new(m, t)?)?;
                Ok(SweepRow {
                    m,
                    t,
                    lambda: r.lambda,
                    mu: r.mu,
                    decoupled: r.decoupled,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}
