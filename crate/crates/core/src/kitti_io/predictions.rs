use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDepth {
    pub name: String,
    pub z: f64,
    pub sigma: f64,
}

impl BranchDepth {
    pub fn new(name: impl Into<String>, z: f64, sigma: f64) -> Self {
        Self { name: name.into(), z, sigma }
    }
}

/// Branch depths predicted for one object, keyed by `(frame, index)` where
/// `index` is the object's row in the frame's label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthEnsemble {
    pub frame: String,
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_star: Option<f64>,
    /// Ground elevation used by the global-clue branches, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_glo: Option<f64>,
    pub branches: Vec<BranchDepth>,
    /// Branches that could not be evaluated for this object.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invalid: Vec<String>,
}

impl DepthEnsemble {
    pub fn branch(&self, name: &str) -> Option<&BranchDepth> {
        self.branches.iter().find(|b| b.name == name)
    }

    pub fn branch_mut(&mut self, name: &str) -> Option<&mut BranchDepth> {
        self.branches.iter_mut().find(|b| b.name == name)
    }

    /// `(z, sigma)` pairs in branch order.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.branches.iter().map(|b| (b.z, b.sigma)).collect()
    }
}

const TOP_LEVEL_KEYS: [&str; 6] = ["frame", "index", "z_star", "y_glo", "branches", "invalid"];

struct LineCtx {
    line: usize,
}

impl LineCtx {
    fn err(&self, path: impl Into<String>, reason: impl Into<String>) -> ParseError {
        ParseError::Schema { line: self.line, path: path.into(), reason: reason.into() }
    }

    fn finite(&self, v: &Value, path: &str) -> Result<f64, ParseError> {
        v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| self.err(path, "expected a finite number"))
    }

    fn opt_finite(&self, obj: &Map<String, Value>, key: &str) -> Result<Option<f64>, ParseError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => self.finite(v, key).map(Some),
        }
    }
}

fn parse_record(text: &str, ctx: &LineCtx) -> Result<DepthEnsemble, ParseError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ctx.err("$", e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| ctx.err("$", "expected a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
        return Err(ctx.err(k.clone(), "unknown field"));
    }

    let frame = obj
        .get("frame")
        .ok_or_else(|| ctx.err("frame", "missing"))?
        .as_str()
        .ok_or_else(|| ctx.err("frame", "expected a string"))?
        .to_string();
    let index = obj
        .get("index")
        .ok_or_else(|| ctx.err("index", "missing"))?
        .as_u64()
        .ok_or_else(|| ctx.err("index", "expected a non-negative integer"))? as usize;
    let z_star = ctx.opt_finite(obj, "z_star")?;
    let y_glo = ctx.opt_finite(obj, "y_glo")?;

    let raw = obj
        .get("branches")
        .ok_or_else(|| ctx.err("branches", "missing"))?
        .as_array()
        .ok_or_else(|| ctx.err("branches", "expected an array"))?;
    let mut seen = HashSet::new();
    let mut branches = Vec::with_capacity(raw.len());
    for (i, b) in raw.iter().enumerate() {
        let at = |f: &str| format!("branches[{i}].{f}");
        let bo = b.as_object().ok_or_else(|| ctx.err(format!("branches[{i}]"), "expected an object"))?;
        if let Some(k) = bo.keys().find(|k| !matches!(k.as_str(), "name" | "z" | "sigma")) {
            return Err(ctx.err(at(k), "unknown field"));
        }
        let name = bo
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| ctx.err(at("name"), "expected a string"))?
            .to_string();
        if !seen.insert(name.clone()) {
            return Err(ctx.err(at("name"), format!("duplicate branch name {name:?}")));
        }
        let z = ctx.finite(bo.get("z").unwrap_or(&Value::Null), &at("z"))?;
        let sigma = match bo.get("sigma") {
            None | Some(Value::Null) => 1.0,
            Some(v) => ctx.finite(v, &at("sigma"))?,
        };
        if !(sigma > 0.0) {
            return Err(ctx.err(at("sigma"), format!("sigma must be positive, got {sigma}")));
        }
        branches.push(BranchDepth { name, z, sigma });
    }

    let invalid = match obj.get("invalid") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str().map(str::to_string).ok_or_else(|| ctx.err(format!("invalid[{i}]"), "expected a string"))
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(ctx.err("invalid", "expected an array")),
    };

    Ok(DepthEnsemble { frame, index, z_star, y_glo, branches, invalid })
}

/// Blank lines and `#` comment lines (run headers) are ignored.
fn skip_line(l: &str) -> bool {
    let t = l.trim();
    t.is_empty() || t.starts_with('#')
}

pub fn read_predictions_str(text: &str) -> Result<Vec<DepthEnsemble>, ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !skip_line(l))
        .map(|(i, l)| parse_record(l, &LineCtx { line: i + 1 }))
        .collect()
}

pub fn read_predictions(reader: impl BufRead) -> Result<Vec<DepthEnsemble>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| ParseError::Io { path: "<predictions>".into(), source })?;
        if skip_line(&line) {
            continue;
        }
        out.push(parse_record(&line, &LineCtx { line: i + 1 })?);
    }
    Ok(out)
}

/// One JSON object per line, fields in schema order, floats in shortest
/// round-trip form.
pub fn write_predictions(ensembles: &[DepthEnsemble]) -> String {
    let mut out = String::new();
    for e in ensembles {
        out.push_str(&serde_json::to_string(e).expect("ensemble serializes"));
        out.push('\n');
    }
    out
}
