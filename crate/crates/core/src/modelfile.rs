//! TOML model files for piecewise-constant models.
//!
//! ```toml
//! n = 2
//! breakpoints = ["0", "1/2"]
//!
//! [metadata]
//! name = "example"
//!
//! [[segments]]
//! r = [1.0, -1.0]
//! L = [[-1.0, 0.0], [1.0, 0.0]]
//! ```
//!
//! Breakpoints are decimals or `"p/q"` strings; rationals are kept exact.

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::path::{Breakpoint, PatchModel, PiecewiseMatrixPath};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelMetadata {
    pub name: Option<String>,
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: PatchModel,
    pub metadata: ModelMetadata,
}

fn err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::ModelFile(format!("{path}: {msg}"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    let x = match v {
        Value::Float(x) => *x,
        Value::Integer(i) => *i as f64,
        other => return Err(err(path, format!("expected a number, found {}", other.type_str()))),
    };
    if !x.is_finite() {
        return Err(err(path, "value is not finite"));
    }
    Ok(x)
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| err(path, format!("expected an array, found {}", v.type_str())))
}

fn vector(v: &Value, n: usize, path: &str) -> Result<Vec<f64>> {
    let a = array(v, path)?;
    if a.len() != n {
        return Err(err(path, format!("expected {n} entries, found {}", a.len())));
    }
    a.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn breakpoint(v: &Value, path: &str) -> Result<Breakpoint> {
    let b = match v {
        Value::String(s) => s.parse::<Breakpoint>().map_err(|e| err(path, e))?,
        Value::Integer(i) => Breakpoint::ratio(*i, 1),
        Value::Float(x) => Breakpoint::Float(*x),
        other => {
            return Err(err(
                path,
                format!("expected a number or \"p/q\" string, found {}", other.type_str()),
            ))
        }
    };
    let x = b.value();
    if !(0.0..1.0).contains(&x) {
        return Err(err(path, format!("breakpoint {b} is outside [0, 1)")));
    }
    Ok(b)
}

fn optional_string(t: &Table, key: &str, path: &str) -> Result<Option<String>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(err(
            &format!("{path}.{key}"),
            format!("expected a string, found {}", other.type_str()),
        )),
    }
}

struct RawModel {
    n: usize,
    starts: Vec<Breakpoint>,
    rates: Vec<Vec<f64>>,
    /// `None` when no segment carries `L`.
    migration: Option<Vec<SquareMatrix>>,
    metadata: ModelMetadata,
}

fn parse_raw(text: &str, require_l: bool) -> Result<RawModel> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| Error::ModelFile(e.to_string()))?;
    let n = match doc.get("n") {
        Some(Value::Integer(n)) if *n >= 1 => *n as usize,
        Some(v) => return Err(err("n", format!("expected a positive integer, found {v}"))),
        None => return Err(err("n", "missing")),
    };
    let bps = array(doc.get("breakpoints").ok_or_else(|| err("breakpoints", "missing"))?, "breakpoints")?;
    let starts = bps
        .iter()
        .enumerate()
        .map(|(k, v)| breakpoint(v, &format!("breakpoints[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    if starts.first().map(|b| b.value()) != Some(0.0) {
        return Err(err("breakpoints[0]", "first breakpoint must be 0"));
    }
    for k in 1..starts.len() {
        if !(starts[k].value() > starts[k - 1].value()) {
            return Err(err(
                &format!("breakpoints[{k}]"),
                format!("breakpoints must increase ({} then {})", starts[k - 1], starts[k]),
            ));
        }
    }
    let segs = array(doc.get("segments").ok_or_else(|| err("segments", "missing"))?, "segments")?;
    if segs.len() != starts.len() {
        return Err(err(
            "segments",
            format!("{} segments for {} breakpoints", segs.len(), starts.len()),
        ));
    }
    let mut rates = Vec::with_capacity(n);
    let mut migration = Vec::with_capacity(n);
    let mut has_l = None;
    for (k, seg) in segs.iter().enumerate() {
        let path = format!("segments[{k}]");
        let t = seg
            .as_table()
            .ok_or_else(|| err(&path, format!("expected a table, found {}", seg.type_str())))?;
        let r = vector(t.get("r").ok_or_else(|| err(&format!("{path}.r"), "missing"))?, n, &format!("{path}.r"))?;
        let lpath = format!("{path}.L");
        let here = t.contains_key("L");
        if require_l && !here {
            return Err(err(&lpath, "missing"));
        }
        if *has_l.get_or_insert(here) != here {
            return Err(err(&lpath, "either every segment or no segment may give L"));
        }
        let growth = PiecewiseMatrixPath::constant(SquareMatrix::diagonal(&r).map_err(|e| err(&path, e))?);
        if here {
            let rows = array(&t["L"], &lpath)?;
            if rows.len() != n {
                return Err(err(&lpath, format!("expected {n} rows, found {}", rows.len())));
            }
            let rows = rows
                .iter()
                .enumerate()
                .map(|(i, row)| vector(row, n, &format!("{lpath}[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let l = SquareMatrix::from_rows(&rows).map_err(|e| err(&lpath, e))?;
            // per-segment validation so the error points at the segment
            PatchModel::new(growth, PiecewiseMatrixPath::constant(l.clone())).map_err(|e| err(&path, e))?;
            migration.push(l);
        }
        rates.push(r);
    }
    let metadata = match doc.get("metadata") {
        None => ModelMetadata::default(),
        Some(Value::Table(t)) => ModelMetadata {
            name: optional_string(t, "name", "metadata")?,
            description: optional_string(t, "description", "metadata")?,
        },
        Some(v) => return Err(err("metadata", format!("expected a table, found {}", v.type_str()))),
    };
    Ok(RawModel {
        n,
        starts,
        rates,
        migration: if has_l == Some(true) { Some(migration) } else { None },
        metadata,
    })
}

/// Parses a model file, reporting the first violated invariant with its
/// location in the document.
pub fn parse_model(text: &str) -> Result<ModelFile> {
    let raw = parse_raw(text, true)?;
    let migration = raw.migration.unwrap_or_default();
    let model = PatchModel::piecewise_constant(raw.starts, raw.rates, migration).map_err(|e| err("model", e))?;
    Ok(ModelFile {
        model,
        metadata: raw.metadata,
    })
}

/// Growth data of a model file in which `L` is optional.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFile {
    pub growth: PiecewiseMatrixPath,
    pub migration: Option<PiecewiseMatrixPath>,
    pub metadata: ModelMetadata,
}

/// Like [`parse_model`] but segments may omit `L` (all of them or none).
pub fn parse_growth(text: &str) -> Result<GrowthFile> {
    let raw = parse_raw(text, false)?;
    let diag = raw
        .rates
        .iter()
        .map(|r| SquareMatrix::diagonal(r))
        .collect::<Result<Vec<_>>>()?;
    let growth = PiecewiseMatrixPath::piecewise_constant(raw.starts.clone(), diag).map_err(|e| err("model", e))?;
    let migration = match raw.migration {
        Some(ls) => Some(PiecewiseMatrixPath::piecewise_constant(raw.starts, ls).map_err(|e| err("model", e))?),
        None => None,
    };
    debug_assert_eq!(growth.n(), raw.n);
    Ok(GrowthFile {
        growth,
        migration,
        metadata: raw.metadata,
    })
}

fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))
}

pub fn read_growth(path: &std::path::Path) -> Result<GrowthFile> {
    parse_growth(&read_text(path)?)
}

pub fn read_model(path: &std::path::Path) -> Result<ModelFile> {
    parse_model(&read_text(path)?)
}

fn breakpoint_value(b: &Breakpoint) -> Value {
    match b {
        Breakpoint::Exact(_) => Value::String(b.to_string()),
        Breakpoint::Float(x) => Value::Float(*x),
    }
}

fn row_values(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

/// Serializes a piecewise-constant model on the union of its growth and
/// migration breakpoints.
pub fn to_toml(model: &PatchModel, metadata: &ModelMetadata) -> Result<String> {
    let comb = model.combined();
    let mut doc = Table::new();
    doc.insert("n".into(), Value::Integer(model.n() as i64));
    doc.insert(
        "breakpoints".into(),
        Value::Array(comb.breakpoints().iter().map(breakpoint_value).collect()),
    );
    let mut meta = Table::new();
    if let Some(name) = &metadata.name {
        meta.insert("name".into(), Value::String(name.clone()));
    }
    if let Some(d) = &metadata.description {
        meta.insert("description".into(), Value::String(d.clone()));
    }
    if !meta.is_empty() {
        doc.insert("metadata".into(), Value::Table(meta));
    }
    let mut segs = Vec::new();
    for (k, (g, l)) in comb.pieces().iter().enumerate() {
        let (Some(g), Some(l)) = (g.as_constant(), l.as_constant()) else {
            return Err(Error::ModelFile(format!(
                "segment {k} is not constant; model files hold piecewise-constant models only"
            )));
        };
        let mut t = Table::new();
        t.insert("r".into(), row_values(&g.diagonal_entries()));
        t.insert("L".into(), Value::Array(l.rows().iter().map(|r| row_values(r)).collect()));
        segs.push(Value::Table(t));
    }
    doc.insert("segments".into(), Value::Array(segs));
    toml::to_string(&doc).map_err(|e| Error::ModelFile(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog;

    const TWO: &str = r#"
n = 2
breakpoints = ["0", "1/2"]

[metadata]
name = "worst"

[[segments]]
r = [1.0, -1]
L = [[-1.0, 0.0], [1.0, 0.0]]

[[segments]]
r = [-2.0, 2.0]
L = [[0.0, 1.0], [0.0, -1.0]]
"#;

    #[test]
    fn parse_two_patch() {
        let f = parse_model(TWO).unwrap();
        assert_eq!(f.metadata.name.as_deref(), Some("worst"));
        assert_eq!(f.model.n(), 2);
        assert_eq!(f.model.growth().breakpoints()[1], Breakpoint::ratio(1, 2));
        assert_eq!(f.model.mean_growth(), vec![-0.5, 0.5]);
    }

    #[test]
    fn thirds_stay_exact() {
        let text = TWO.replace("\"1/2\"", "\"1/3\"");
        let f = parse_model(&text).unwrap();
        assert!(matches!(f.model.growth().breakpoints()[1], Breakpoint::Exact(r) if *r.denom() == 3));
        let again = parse_model(&to_toml(&f.model, &f.metadata).unwrap()).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn errors_name_the_location() {
        let cases = [
            (TWO.replace("n = 2", "n = 0"), "n:"),
            (TWO.replace("\"0\", \"1/2\"", "\"0\", \"1/0\""), "breakpoints[1]"),
            (TWO.replace("\"0\", \"1/2\"", "\"1/4\", \"1/2\""), "breakpoints[0]"),
            (TWO.replace("\"0\", \"1/2\"", "\"0\", \"3/2\""), "breakpoints[1]"),
            (TWO.replace("r = [1.0, -1]", "r = [1.0]"), "segments[0].r"),
            (TWO.replace("[[-1.0, 0.0], [1.0, 0.0]]", "[[-1.0, 0.0], [2.0, 0.0]]"), "segments[0]"),
            (TWO.replace("[[0.0, 1.0], [0.0, -1.0]]", "[[0.0, 1.0], [0.0, \"x\"]]"), "segments[1].L[1][1]"),
            (TWO.replace("[[0.0, 1.0], [0.0, -1.0]]", "[[0.0, -1.0], [0.0, 1.0]]"), "segments[1]"),
            ("n = 2\nbreakpoints = [\"0\"]\n".to_string(), "segments: missing"),
        ];
        for (text, needle) in cases {
            let e = parse_model(&text).unwrap_err().to_string();
            assert!(e.contains(needle), "{needle} not in {e}");
        }
        assert!(parse_model("n = ").is_err());
    }

    #[test]
    fn growth_only() {
        let text = "n = 2\nbreakpoints = [\"0\", \"1/2\"]\n[[segments]]\nr = [2.0, -1.0]\n[[segments]]\nr = [-1.0, 2.0]\n";
        let g = parse_growth(text).unwrap();
        assert!(g.migration.is_none());
        assert_eq!(g.growth.average().diagonal_entries(), vec![0.5, 0.5]);
        assert!(parse_model(text).unwrap_err().to_string().contains("segments[0].L: missing"));
        let g = parse_growth(TWO).unwrap();
        assert_eq!(g.migration.unwrap(), *parse_model(TWO).unwrap().model.migration());
        let mixed = TWO.replace("L = [[0.0, 1.0], [0.0, -1.0]]", "");
        assert!(parse_growth(&mixed).unwrap_err().to_string().contains("segments[1].L"));
    }

    #[test]
    fn catalog_round_trip() {
        for e in catalog() {
            let model = e.default_model();
            let meta = ModelMetadata {
                name: Some(e.name.to_string()),
                description: Some(e.description.to_string()),
            };
            let text = to_toml(&model, &meta).unwrap();
            let back = parse_model(&text).unwrap();
            assert_eq!(back.model, model, "{}", e.name);
            assert_eq!(back.metadata, meta);
        }
    }
}
