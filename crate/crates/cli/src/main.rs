mod args;
mod report;

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde::Serialize;

use patchgrowth::catalog::{catalog, find, Bindings};
use patchgrowth::digdid::{classify, did_scan, dig_scan, ScanOptions};
use patchgrowth::limits::{limit_report, sigma_chi, LimitOptions};
use patchgrowth::modelfile::{read_growth, read_model, to_toml, ModelMetadata};
use patchgrowth::monodromy::{growth_rate, trajectory_lyapunov};
use patchgrowth::simplex::{check_h2, check_h3, check_h4};
use patchgrowth::sweep::{sweep, SweepGrid};
use patchgrowth::{Error, ModelParameters};

use args::{CatalogCommand, Cli, Command, GridArgs};
use report::{echo, Section};

/// Exit status for a check that found violations.
const EXIT_VIOLATIONS: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<io::Error>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Reducible) => 3,
        Some(
            Error::ModelFile(_)
            | Error::InvalidMatrix(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidPath(_)
            | Error::InvalidModel(_)
            | Error::InvalidParameters(_)
            | Error::Domain(_)
            | Error::UnknownEntry(_),
        ) => 2,
        Some(_) => 5,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Eval(a) => eval(a),
        Command::Limits(a) => limits(a),
        Command::Check(a) => check(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Dig(a) => dig(a),
        Command::Did(a) => did(a),
        Command::Trajectory(a) => trajectory(a),
        Command::Catalog(c) => catalog_cmd(c),
    }
}

fn grid(g: &GridArgs) -> Result<SweepGrid> {
    Ok(SweepGrid::new(g.m_grid.clone(), g.t_grid.clone())?)
}

/// CSV goes to `out` or stdout; the config echo goes wherever the CSV does not.
fn csv_sink(out: Option<&Path>) -> Result<(Box<dyn Write>, bool)> {
    Ok(match out {
        Some(p) => (
            Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
            false,
        ),
        None => (Box::new(io::stdout().lock()), true),
    })
}

#[derive(Serialize)]
struct EvalResult {
    lambda: f64,
    mu: f64,
    log_mu: f64,
    pi: Vec<f64>,
    sigma: f64,
    chi: f64,
    decoupled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

fn eval(a: args::EvalArgs) -> Result<u8> {
    let file = read_model(&a.model)?;
    let params = ModelParameters::new(a.m, a.t)?;
    let mut config = Section::new("config");
    config.put("model", a.model.display().to_string()).put("m", a.m).put("T", a.t);
    echo(&config);
    let r = growth_rate(&file.model, &params)?;
    let (sigma, chi) = sigma_chi(&file.model)?;
    let note = r
        .decoupled
        .then(|| "decoupled: m = 0, patches grow independently and Λ = max mean growth".to_string());
    report::print_toml("result", &EvalResult {
        lambda: r.lambda,
        mu: r.mu,
        log_mu: r.log_mu,
        pi: r.pi,
        sigma,
        chi,
        decoupled: r.decoupled,
        note,
    })?;
    Ok(0)
}

fn limits(a: args::LimitsArgs) -> Result<u8> {
    let file = read_model(&a.model)?;
    let opts = LimitOptions {
        force: a.force,
        check: a.check.config(),
        probe_m: a.probe_m,
    };
    let mut config = Section::new("config");
    config
        .put("model", a.model.display().to_string())
        .put("m", a.m)
        .put("force", a.force)
        .put("probe_m", a.probe_m);
    echo(&config);
    report::print_toml("config.check", &opts.check)?;
    let rep = limit_report(&file.model, a.m, &opts)?;
    println!();
    print!("{}", report::limit_table(&rep));
    Ok(0)
}

#[derive(Serialize)]
struct CheckOutput {
    h2: patchgrowth::simplex::HypothesisReport,
    h3: patchgrowth::simplex::HypothesisReport,
    h4: patchgrowth::simplex::HypothesisReport,
}

fn check(a: args::CheckCmdArgs) -> Result<u8> {
    let file = read_model(&a.model)?;
    let cfg = a.check.config();
    let mut config = Section::new("config");
    config.put("model", a.model.display().to_string()).put("m", a.m);
    echo(&config);
    report::print_toml("config.check", &cfg)?;
    let out = CheckOutput {
        h2: check_h2(&file.model),
        h3: check_h3(&file.model, a.m, &cfg)?,
        h4: check_h4(&file.model, &cfg),
    };
    println!();
    for r in [&out.h2, &out.h3, &out.h4] {
        println!("{:?}: {}", r.hypothesis, r.verdict);
    }
    println!();
    print!("{}", report::reports_toml(&[&out.h2, &out.h3, &out.h4])?);
    let all = [&out.h2, &out.h3, &out.h4].iter().all(|r| r.is_verified());
    Ok(if all { 0 } else { EXIT_VIOLATIONS })
}

fn sweep_cmd(a: args::SweepArgs) -> Result<u8> {
    let file = read_model(&a.model)?;
    let g = grid(&a.grid)?;
    let mut config = Section::new("config");
    config
        .put("model", a.model.display().to_string())
        .put("m_grid", a.grid.m_grid.to_string())
        .put("T_grid", a.grid.t_grid.to_string())
        .put("jobs", jobs_value(a.grid.jobs))
        .put("points", g.len() as i64);
    let rows = sweep(&file.model, &g, a.grid.jobs)?;
    let (sink, to_stdout) = csv_sink(a.out.as_deref())?;
    if to_stdout {
        eprint!("{config}");
    } else {
        echo(&config);
    }
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(0)
}

fn jobs_value(jobs: Option<usize>) -> toml::Value {
    match jobs {
        Some(j) => toml::Value::Integer(j as i64),
        None => toml::Value::String("auto".into()),
    }
}

fn scan_options(check: &args::CheckArgs, g: &GridArgs, probe_m: f64, epsilon: f64) -> ScanOptions {
    ScanOptions {
        check: check.config(),
        probe_m,
        epsilon,
        jobs: g.jobs,
    }
}

fn dig(a: args::DigArgs) -> Result<u8> {
    let file = read_model(&a.model)?;
    let g = grid(&a.grid)?;
    let opts = scan_options(&a.check, &a.grid, a.probe_m, 0.0);
    let mut config = Section::new("config");
    config
        .put("model", a.model.display().to_string())
        .put("m_grid", a.grid.m_grid.to_string())
        .put("T_grid", a.grid.t_grid.to_string())
        .put("probe_m", a.probe_m)
        .put("jobs", jobs_value(a.grid.jobs));
    echo(&config);
    report::print_toml("config.check", &opts.check)?;
    let r = dig_scan(&file.model, &g, &opts)?;
    println!();
    report::print_toml("result", &r)?;
    Ok(0)
}

#[derive(Serialize)]
struct ConstructionSummary {
    case: String,
    never_minimal: Vec<usize>,
    epsilon: f64,
    epsilon_correction: f64,
    /// `(start, end, worst patch)` per piece.
    pieces: Vec<(f64, f64, usize)>,
}

fn did(a: args::DidArgs) -> Result<u8> {
    let file = read_growth(&a.model)?;
    let g = grid(&a.grid)?;
    let opts = scan_options(&a.check, &a.grid, 0.0, a.epsilon);
    let migration = if a.use_migration {
        Some(
            file.migration
                .as_ref()
                .ok_or_else(|| Error::ModelFile("--use-migration needs L in every segment".into()))?,
        )
    } else {
        None
    };
    let mut config = Section::new("config");
    config
        .put("model", a.model.display().to_string())
        .put("m_grid", a.grid.m_grid.to_string())
        .put("T_grid", a.grid.t_grid.to_string())
        .put("epsilon", a.epsilon)
        .put("use_migration", a.use_migration)
        .put("jobs", jobs_value(a.grid.jobs));
    echo(&config);
    report::print_toml("config.check", &opts.check)?;
    let scan = did_scan(&file.growth, migration, &g, &opts)?;
    println!();
    report::print_toml("result", &scan.result)?;
    if let Some(c) = &scan.construction {
        let never_minimal = match &c.case {
            patchgrowth::digdid::DidCase::AllMinimal => Vec::new(),
            patchgrowth::digdid::DidCase::Padded { never_minimal } => never_minimal.clone(),
        };
        println!();
        report::print_toml("construction", &ConstructionSummary {
            case: if never_minimal.is_empty() { "all-minimal" } else { "padded" }.into(),
            never_minimal,
            epsilon: c.epsilon,
            epsilon_correction: c.epsilon_correction,
            pieces: c.partition.pieces.iter().map(|p| (p.start.value(), p.end, p.index)).collect(),
        })?;
    }
    if let Some(path) = &a.emit {
        let meta = ModelMetadata {
            name: Some(format!(
                "{}-did",
                file.metadata.name.as_deref().unwrap_or("model")
            )),
            description: Some("migration toward the patch with the lowest growth rate".into()),
        };
        std::fs::write(path, to_toml(&scan.model, &meta)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("\nemitted = {:?}", path.display().to_string());
    }
    Ok(0)
}

fn trajectory(a: args::TrajectoryArgs) -> Result<u8> {
    let file = read_model(&a.model)?;
    let n = file.model.n();
    let params = ModelParameters::new(a.m, a.t)?;
    let x0 = a.x0.clone().unwrap_or_else(|| vec![1.0; n]);
    let mut config = Section::new("config");
    config
        .put("model", a.model.display().to_string())
        .put("m", a.m)
        .put("T", a.t)
        .put("x0", x0.clone())
        .put("periods", a.periods as i64);
    let est = trajectory_lyapunov(&file.model, &params, &x0, a.periods)?;
    let (sink, to_stdout) = csv_sink(a.out.as_deref())?;
    if to_stdout {
        eprint!("{config}");
    } else {
        echo(&config);
        let mut s = Section::new("estimate");
        s.put("shared", est.shared).put("per_patch", est.per_patch.clone());
        echo(&s);
    }
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("log_norm".into());
    w.write_record(&header)?;
    for s in &est.samples {
        let mut rec = vec![format!("{:?}", s.t)];
        rec.extend(s.x.iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", s.log_norm));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(0)
}

fn catalog_cmd(c: CatalogCommand) -> Result<u8> {
    match c {
        CatalogCommand::List => {
            for e in catalog() {
                let model = e.default_model();
                let labels = classify(&model)?.labels;
                let params: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let labels: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                println!(
                    "{:<26} n={} [{}] ({})  {}",
                    e.name,
                    model.n(),
                    params.join(", "),
                    labels.join(","),
                    e.description
                );
            }
            Ok(0)
        }
        CatalogCommand::Export { name, params, out } => {
            let entry = find(&name)?;
            let mut overrides = Bindings::new();
            for (k, v) in &params {
                overrides.set(k, *v);
            }
            let b = entry.bind(&overrides)?;
            let model = entry.model(&b)?;
            let meta = ModelMetadata {
                name: Some(entry.name.to_string()),
                description: Some(format!("{} ({b})", entry.description)),
            };
            let text = to_toml(&model, &meta)?;
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}
