use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use patchgrowth::simplex::CheckConfig;
use patchgrowth::sweep::GridAxis;

#[derive(Parser, Debug)]
#[command(name = "patchgrowth", version, about = "Growth rates of periodic patch models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Growth rate Λ, Perron root μ and eigenvector π at one (m, T)
    Eval(EvalArgs),
    /// Every asymptotic limit at migration strength m, with hypothesis flags
    Limits(LimitsArgs),
    /// Hypothesis reports H2, H3 (at m) and H4; exits 4 unless all are verified
    Check(CheckCmdArgs),
    /// Λ over an (m, T) grid as CSV
    Sweep(SweepArgs),
    /// Search for dispersal-induced growth
    Dig(DigArgs),
    /// Search for dispersal-induced decay, constructing a migration if none is given
    Did(DidArgs),
    /// Per-period samples of a trajectory as CSV
    Trajectory(TrajectoryArgs),
    /// Built-in example models
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model file (TOML)
    pub model: PathBuf,
    /// Migration strength
    #[arg(long, allow_hyphen_values = true)]
    pub m: f64,
    /// Period
    #[arg(long = "T", visible_alias = "period", allow_hyphen_values = true)]
    pub t: f64,
}

#[derive(Args, Debug)]
pub struct LimitsArgs {
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub m: f64,
    /// Evaluate limit formulas even when their hypothesis is not verified
    #[arg(long)]
    pub force: bool,
    /// Migration strength used to probe H3 for the m → 0, T → ∞ corner
    #[arg(long, default_value_t = 1e-2)]
    pub probe_m: f64,
    #[command(flatten)]
    pub check: CheckArgs,
}

#[derive(Args, Debug)]
pub struct CheckCmdArgs {
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub m: f64,
    #[command(flatten)]
    pub check: CheckArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// m values: comma list or log:lo:hi:k
    #[arg(long, default_value = "log:0.01:1000:13")]
    pub m_grid: GridAxis,
    /// T values: comma list or log:lo:hi:k
    #[arg(long = "T-grid", visible_alias = "t-grid", default_value = "log:0.01:1000:13")]
    pub t_grid: GridAxis,
    /// Worker threads (defaults to PATCHGROWTH_JOBS, then all cores)
    #[arg(long, env = "PATCHGROWTH_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output CSV (stdout when omitted)
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DigArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Migration strength at which H3 is probed
    #[arg(long, default_value_t = 1e-2)]
    pub probe_m: f64,
    #[command(flatten)]
    pub check: CheckArgs,
}

#[derive(Args, Debug)]
pub struct DidArgs {
    /// Model file; `L` may be omitted from every segment
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Migration given to never-worst patches on the first piece
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Scan the migration given in the file instead of constructing one
    #[arg(long)]
    pub use_migration: bool,
    /// Write the scanned model to this file
    #[arg(long)]
    pub emit: Option<PathBuf>,
    #[command(flatten)]
    pub check: CheckArgs,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub m: f64,
    #[arg(long = "T", visible_alias = "period", allow_hyphen_values = true)]
    pub t: f64,
    /// Initial state, comma separated (uniform when omitted)
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    pub periods: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CatalogCommand {
    /// Names, sizes and parameters of the built-in models
    List,
    /// Write a built-in model as a model file
    Export {
        name: String,
        /// Parameter override, e.g. `--param a=2`
        #[arg(long = "param", value_parser = parse_binding)]
        params: Vec<(String, f64)>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Overrides for the sampling parameters of the basin checks.
#[derive(Args, Debug, Clone, Default)]
pub struct CheckArgs {
    /// τ samples per smooth segment
    #[arg(long)]
    pub samples: Option<usize>,
    /// Perturbed starts per sample
    #[arg(long)]
    pub perturbations: Option<usize>,
    /// Perturbation radius
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon_scale: Option<f64>,
    #[arg(long)]
    pub horizon_min: Option<f64>,
    #[arg(long)]
    pub horizon_max: Option<f64>,
    #[arg(long)]
    pub convergence_tol: Option<f64>,
    #[arg(long)]
    pub stability_tol: Option<f64>,
    #[arg(long)]
    pub equilibrium_tol: Option<f64>,
}

impl CheckArgs {
    pub fn config(&self) -> CheckConfig {
        let mut c = CheckConfig::default();
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.perturbations {
            c.perturbations = v;
        }
        if let Some(v) = self.radius {
            c.radius = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.horizon_scale {
            c.horizon_scale = v;
        }
        if let Some(v) = self.horizon_min {
            c.horizon_min = v;
        }
        if let Some(v) = self.horizon_max {
            c.horizon_max = v;
        }
        if let Some(v) = self.convergence_tol {
            c.convergence_tol = v;
        }
        if let Some(v) = self.stability_tol {
            c.stability_tol = v;
        }
        if let Some(v) = self.equilibrium_tol {
            c.equilibrium_tol = v;
        }
        c
    }
}
