use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patchgrowth::catalog::{catalog, find};
use patchgrowth::modelfile::{parse_model, read_model};
use patchgrowth::monodromy::growth_rate;
use patchgrowth::ModelParameters;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchgrowth"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("PATCHGROWTH_JOBS").output().expect("runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn export(dir: &Path, name: &str, params: &[&str]) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let mut args = vec!["catalog", "export", name, "-o", path.to_str().unwrap()];
    for p in params {
        args.extend(["--param", p]);
    }
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

/// Value of `key = <number>` in a `[result]` block.
fn field(text: &str, key: &str) -> f64 {
    let prefix = format!("{key} = ");
    text.lines()
        .skip_while(|l| *l != "[result]")
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
        .parse()
        .unwrap()
}

const CONSTANT: &str = r#"
n = 2
breakpoints = ["0"]

[[segments]]
r = [0.5, -1.0]
L = [[-1.0, 2.0], [1.0, -2.0]]
"#;

#[test]
fn catalog_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for e in catalog() {
        let path = export(dir.path(), e.name, &[]);
        assert_eq!(read_model(&path).unwrap().model, e.default_model(), "{}", e.name);
    }
    let o = run(&["catalog", "list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), catalog().len());
}

#[test]
fn eval_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = export(dir.path(), "three-patch-ab-symmetric", &[]);
    let o = run(&["eval", path.to_str().unwrap(), "--m", "1", "--T", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("[config]\n"), "{text}");
    let model = find("three-patch-ab-symmetric").unwrap().default_model();
    let want = growth_rate(&model, &ModelParameters::new(1.0, 100.0).unwrap()).unwrap();
    assert_eq!(field(&text, "lambda"), want.lambda);
    assert_eq!(field(&text, "sigma"), -1.0);
    assert_eq!(field(&text, "chi"), 1.0);
}

#[test]
fn eval_decoupled_and_equal_growth() {
    let dir = tempfile::tempdir().unwrap();
    let path = export(dir.path(), "two-patch-worst", &[]);
    let o = run(&["eval", path.to_str().unwrap(), "--m", "0", "--T", "3"]);
    let text = stdout(&o);
    assert_eq!(field(&text, "lambda"), 0.5);
    assert!(text.contains("decoupled = true") && text.contains("note = \"decoupled"));

    let equal = dir.path().join("equal.toml");
    std::fs::write(
        &equal,
        "n = 2\nbreakpoints = [\"0\", \"1/3\"]\n[[segments]]\nr = [0.3, 0.3]\nL = [[-1.0, 1.0], [1.0, -1.0]]\n\
         [[segments]]\nr = [-0.6, -0.6]\nL = [[-2.0, 0.5], [2.0, -0.5]]\n",
    )
    .unwrap();
    for (m, t) in [("0.5", "0.1"), ("2", "7"), ("10", "40")] {
        let text = stdout(&run(&["eval", equal.to_str().unwrap(), "--m", m, "--T", t]));
        assert!((field(&text, "lambda") + 0.3).abs() < 1e-10, "{text}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    };
    let bad = p("bad.toml", "n = 2\nbreakpoints = [\"0\"]\n");
    let o = run(&["eval", &bad, "--m", "1", "--T", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("segments: missing"));
    assert_eq!(run(&["eval", "/nonexistent.toml", "--m", "1", "--T", "1"]).status.code(), Some(2));
    let good = p("good.toml", CONSTANT);
    assert_eq!(run(&["eval", &good, "--m", "-1", "--T", "1"]).status.code(), Some(2));

    let reducible = p(
        "reducible.toml",
        "n = 2\nbreakpoints = [\"0\"]\n[[segments]]\nr = [1.0, 0.0]\nL = [[0.0, 0.0], [0.0, 0.0]]\n",
    );
    assert_eq!(run(&["eval", &reducible, "--m", "1", "--T", "1"]).status.code(), Some(3));
    assert_eq!(run(&["eval", &reducible, "--m", "0", "--T", "1"]).status.code(), Some(0));

    let o = run(&["check", &good, "--m", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let ab = export(dir.path(), "three-patch-ab-symmetric", &[]);
    let o = run(&["check", ab.to_str().unwrap(), "--m", "1", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(4));
    let text = stdout(&o);
    assert!(text.contains("H4: violated") && text.contains("samples = 5"), "{text}");
    assert_eq!(run(&["catalog", "export", "nope"]).status.code(), Some(2));
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = export(dir.path(), "two-patch-best", &[]);
    let outs: Vec<String> = ["1", "3"]
        .iter()
        .map(|jobs| {
            let out = dir.path().join(format!("sweep{jobs}.csv"));
            let o = run(&[
                "sweep",
                model.to_str().unwrap(),
                "--m-grid",
                "0,0.5,2",
                "--T-grid",
                "log:0.1:10:3",
                "--jobs",
                jobs,
                "-o",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success());
            assert!(stdout(&o).contains(&format!("jobs = {jobs}")));
            std::fs::read_to_string(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let lines: Vec<&str> = outs[0].lines().collect();
    assert_eq!(lines[0], "m,T,lambda,mu,decoupled");
    assert_eq!(lines.len(), 10);
    assert!(lines[1].starts_with("0.0,0.1") && lines[1].ends_with("true"));
    assert!(lines[4].starts_with("0.5,0.1"));

    let o = bin()
        .args(["sweep", model.to_str().unwrap(), "--m-grid", "1", "--T-grid", "1"])
        .env("PATCHGROWTH_JOBS", "2")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains("jobs = 2"));
    assert!(stdout(&o).starts_with("m,T,lambda,mu,decoupled\n1.0,1.0,"));
}

#[test]
fn did_emits_constructed_model() {
    let dir = tempfile::tempdir().unwrap();
    let growth = dir.path().join("growth.toml");
    std::fs::write(
        &growth,
        "n = 2\nbreakpoints = [\"0\", \"1/2\"]\n[[segments]]\nr = [2.0, -1.0]\n[[segments]]\nr = [-1.0, 2.0]\n",
    )
    .unwrap();
    let emit = dir.path().join("did.toml");
    let o = run(&[
        "did",
        growth.to_str().unwrap(),
        "--m-grid",
        "log:0.1:10:5",
        "--T-grid",
        "log:0.1:10:5",
        "--emit",
        emit.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("feasibility = \"theory-certain\""), "{text}");
    assert!(field(&text, "limit") == -1.0);
    let model = read_model(&emit).unwrap().model;
    let want = parse_model(
        "n = 2\nbreakpoints = [\"0\", \"1/2\"]\n\
         [[segments]]\nr = [2.0, -1.0]\nL = [[-1.0, 0.0], [1.0, 0.0]]\n\
         [[segments]]\nr = [-1.0, 2.0]\nL = [[0.0, 1.0], [0.0, -1.0]]\n",
    )
    .unwrap()
    .model;
    assert_eq!(model, want);
}

#[test]
fn trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = export(dir.path(), "three-patch-bb-symmetric", &[]);
    let o = run(&["trajectory", model.to_str().unwrap(), "--m", "1", "--T", "1", "--x0", "1,0,0", "--periods", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,x3,log_norm");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0.0,1.0,0.0,0.0,0.0"));
    assert_eq!(run(&["trajectory", model.to_str().unwrap(), "--m", "1", "--T", "1", "--x0", "1,0"]).status.code(), Some(2));
}
