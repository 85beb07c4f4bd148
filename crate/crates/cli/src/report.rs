//! Structured-text (TOML) output.

use std::fmt;

use anyhow::Result;
use patchgrowth::limits::{LimitReport, LimitValue};
use patchgrowth::simplex::HypothesisReport;
use serde::Serialize;
use toml::{Table, Value};

/// Ordered `key = value` block under a `[name]` header.
pub struct Section {
    name: String,
    table: Table,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            table: Table::new(),
        }
    }

    pub fn put(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.table.insert(key.to_string(), v.into());
        self
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.name)?;
        write!(f, "{}", toml::to_string(&self.table).map_err(|_| fmt::Error)?)
    }
}

pub fn echo(s: &Section) {
    print!("{s}");
}

/// Nests `value` under the dotted `path` and renders the whole document.
pub fn render<T: Serialize>(path: &str, value: &T) -> Result<String> {
    let mut v = Value::try_from(value)?;
    for key in path.rsplit('.') {
        let mut t = Table::new();
        t.insert(key.to_string(), v);
        v = Value::Table(t);
    }
    Ok(toml::to_string(&v)?)
}

pub fn print_toml<T: Serialize>(path: &str, value: &T) -> Result<()> {
    print!("{}", render(path, value)?);
    Ok(())
}

pub fn reports_toml(reports: &[&HypothesisReport]) -> Result<String> {
    let mut t = Table::new();
    for r in reports {
        t.insert(format!("{:?}", r.hypothesis).to_lowercase(), Value::try_from(*r)?);
    }
    Ok(toml::to_string(&t)?)
}

fn gated(v: &LimitValue) -> (String, String, String, String) {
    let value = v.value.map(fmt_value).unwrap_or_else(|| "-".into());
    let value = if v.forced { format!("{value}*") } else { value };
    (value, format!("{:?}", v.requires), v.verdict.to_string(), v.note.clone())
}

fn fmt_value(x: f64) -> String {
    format!("{x:.12}")
}

fn plain(v: Option<f64>, requires: &str, note: &str) -> (String, String, String, String) {
    (
        v.map(fmt_value).unwrap_or_else(|| "-".into()),
        requires.into(),
        String::new(),
        note.into(),
    )
}

/// One row per limit; `*` marks a forced value.
pub fn limit_table(r: &LimitReport) -> String {
    let h2 = r.h2.verdict.to_string();
    let reducible = if r.h2.is_verified() { "" } else { "average migration reducible" };
    let rows = [
        ("sigma", plain(Some(r.sigma), "", "")),
        ("chi", plain(Some(r.chi), "", "")),
        ("Λ(0,T)", plain(Some(r.lambda_0t), "", "")),
        (
            "Λ(m,0)",
            {
                let mut row = plain(r.lambda_m0, "H2", reducible);
                row.2 = h2.clone();
                row
            },
        ),
        ("Λ(m,∞)", gated(&r.lambda_minf)),
        ("Λ(∞,T)", gated(&r.lambda_inft)),
        ("Λ(0,0)", plain(Some(r.lambda_00), "", "")),
        ("Λ(0,∞)", gated(&r.lambda_0inf)),
        (
            "Λ(∞,0)",
            {
                let mut row = plain(r.lambda_inf0, "H2", reducible);
                row.2 = h2;
                row
            },
        ),
    ];
    let mut out = format!("m = {}\n", r.m);
    out.push_str(&format!(
        "{:<8} {:>18}  {:<8} {:<16} {}\n",
        "limit", "value", "requires", "verdict", "note"
    ));
    for (name, (v, req, verdict, note)) in rows {
        out.push_str(
            format!("{name:<8} {v:>18}  {req:<8} {verdict:<16} {note}")
                .trim_end(),
        );
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_render() {
        #[derive(Serialize)]
        struct S {
            a: f64,
        }
        let s = render("config.check", &S { a: 1.5 }).unwrap();
        assert!(s.contains("[config.check]"), "{s}");
        assert!(s.contains("a = 1.5"));
    }

    #[test]
    fn section_order() {
        let mut s = Section::new("config");
        s.put("m", 1.0).put("T", 2.0);
        let text = s.to_string();
        assert!(text.starts_with("[config]\n"));
        assert!(text.contains("m = 1.0") && text.contains("T = 2.0"));
    }
}
