//! Model strings: `name:key=val,...` for builtins, `file:path` for
//! microstate tables in JSON.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use contactotherm_core::{Ensemble, Microstate, SymTensor2};
use serde::Deserialize;
use serde_json::{json, Value};

pub struct Builtin {
    pub name: &'static str,
    pub params: &'static [(&'static str, &'static str)],
    pub example: &'static str,
    pub description: &'static str,
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "two_level",
        params: &[("eps", "1")],
        example: "two_level:eps=2",
        description: "two states with observable 0 and eps",
    },
    Builtin {
        name: "ising_ring",
        params: &[("N", "4"), ("J", "1"), ("h", "0")],
        example: "ising_ring:N=4,J=1,h=0",
        description: "periodic Ising chain, observables (energy, magnetization), enumerated exactly",
    },
    Builtin {
        name: "quadratic",
        params: &[("C", "[[1,0],[0,1]]"), ("b", "zeros")],
        example: "quadratic:C=[[2,1],[1,2]],b=[0,0]",
        description: "analytic potential 1/2 I.C.I + b.I with C positive definite",
    },
    Builtin {
        name: "file",
        params: &[],
        example: "file:path/to/model.json",
        description: "microstate table from a JSON file",
    },
];

/// A parsed model together with the string it came from.
#[derive(Clone)]
pub struct Model {
    pub spec: String,
    pub ensemble: Ensemble,
}

impl Model {
    pub fn n(&self) -> usize {
        self.ensemble.n()
    }

    /// The `model` object of a report.
    pub fn describe(&self) -> Value {
        let e = &self.ensemble;
        let mut v = json!({
            "spec": self.spec,
            "label": e.label(),
            "kind": if e.is_enumerated() { "enumerated" } else { "analytic" },
            "n": e.n(),
            "observables": e.names(),
        });
        if let Ok(count) = e.microstate_count() {
            v["microstates"] = json!(count);
        }
        v
    }

    /// Parses `--at`-style points against this model's dimension.
    pub fn point(&self, text: &str) -> Result<Vec<f64>> {
        let p = parse_point(text)?;
        if p.len() != self.n() {
            bail!(
                "point '{text}' has {} components but model {} has n = {}",
                p.len(),
                self.ensemble.label(),
                self.n()
            );
        }
        Ok(p)
    }
}

/// Comma-separated finite numbers.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    let p: Vec<f64> = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("malformed point '{text}': '{s}' is not a finite number (use e.g. 0.1,-0.2)"))
        })
        .collect::<Result<_>>()?;
    Ok(p)
}

/// Splits `key=val,key=val` at top-level commas, so bracketed values may
/// contain commas.
fn split_params(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = text.as_bytes();
    for i in 0..=bytes.len() {
        let c = bytes.get(i).copied();
        match c {
            Some(b'[') => depth += 1,
            Some(b']') => depth -= 1,
            Some(b',') | None if depth == 0 => {
                let item = text[start..i].trim();
                if !item.is_empty() {
                    let (k, v) = item
                        .split_once('=')
                        .ok_or_else(|| anyhow!("model parameter '{item}' must look like key=value"))?;
                    out.push((k.trim().to_string(), v.trim().to_string()));
                }
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            bail!("unbalanced brackets in model parameters '{text}'");
        }
    }
    if depth != 0 {
        bail!("unbalanced brackets in model parameters '{text}'");
    }
    Ok(out)
}

fn number(name: &str, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| anyhow!("{name}: parameter {key}='{v}' is not a finite number"))
}

pub fn parse_model(spec: &str) -> Result<Model> {
    let spec = spec.trim();
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let ensemble = match name {
        "file" => {
            if rest.is_empty() {
                bail!("file model needs a path, e.g. file:model.json");
            }
            load_model_file(Path::new(rest))?
        }
        _ if rest.is_empty() && name.ends_with(".json") => load_model_file(Path::new(name))?,
        "two_level" | "ising_ring" | "quadratic" => builtin(name, rest)?,
        _ => bail!("unknown model '{name}'; run `contactotherm models list` for the available models"),
    };
    Ok(Model { spec: spec.to_string(), ensemble })
}

fn builtin(name: &str, rest: &str) -> Result<Ensemble> {
    let params = split_params(rest)?;
    let known = BUILTINS.iter().find(|b| b.name == name).expect("name matched above");
    for (k, _) in &params {
        if !known.params.iter().any(|(p, _)| p == k) {
            let allowed: Vec<_> = known.params.iter().map(|(p, _)| *p).collect();
            bail!("{name}: unknown parameter '{k}' (allowed: {})", allowed.join(", "));
        }
    }
    let get = |key: &str| params.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let ens = match name {
        "two_level" => {
            let eps = get("eps").map_or(Ok(1.0), |v| number(name, "eps", v))?;
            Ensemble::two_level(eps)
        }
        "ising_ring" => {
            let spins = match get("N") {
                None => 4,
                Some(v) => v.parse::<u32>().map_err(|_| anyhow!("ising_ring: N='{v}' must be a positive integer"))?,
            };
            let j = get("J").map_or(Ok(1.0), |v| number(name, "J", v))?;
            let h = get("h").map_or(Ok(0.0), |v| number(name, "h", v))?;
            Ensemble::ising_ring(spins, j, h)
        }
        _ => {
            let c: Vec<Vec<f64>> = match get("C") {
                None => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                Some(v) => serde_json::from_str(v)
                    .map_err(|_| anyhow!("quadratic: C='{v}' must be a square matrix like [[2,1],[1,2]]"))?,
            };
            let n = c.len();
            if n == 0 || c.iter().any(|r| r.len() != n) {
                bail!("quadratic: C must be a non-empty square matrix");
            }
            for a in 0..n {
                for b in 0..a {
                    if c[a][b] != c[b][a] {
                        bail!("quadratic: C must be symmetric (C[{a}][{b}] != C[{b}][{a}])");
                    }
                }
            }
            let b: Vec<f64> = match get("b") {
                None => vec![0.0; n],
                Some(v) => {
                    serde_json::from_str(v).map_err(|_| anyhow!("quadratic: b='{v}' must be a vector like [0,0]"))?
                }
            };
            if b.len() != n {
                bail!("quadratic: b has {} entries but C is {n}x{n}", b.len());
            }
            Ensemble::quadratic(SymTensor2::from_fn(n, |i, j| c[i][j]), b)
        }
    };
    ens.map_err(|e| anyhow!("{name}: {e}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    #[serde(default)]
    names: Option<Vec<String>>,
    #[serde(default)]
    label: Option<String>,
    microstates: Vec<StateEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    #[serde(rename = "H")]
    h: Vec<f64>,
    #[serde(default)]
    log_g: f64,
}

pub fn load_model_file(path: &Path) -> Result<Ensemble> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read model file {}", path.display()))?;
    parse_model_json(&text, &path.display().to_string())
}

/// Parses the model JSON schema `{"n", "names"?, "label"?, "microstates": [{"H": [..], "log_g"?}]}`.
pub fn parse_model_json(text: &str, origin: &str) -> Result<Ensemble> {
    let file: ModelFile = serde_json::from_str(text).with_context(|| format!("malformed model file {origin}"))?;
    let names = file.names.unwrap_or_else(|| (1..=file.n).map(|i| format!("H{i}")).collect());
    if names.len() != file.n {
        bail!("model file {origin}: {} names for n = {}", names.len(), file.n);
    }
    let mut states = Vec::with_capacity(file.microstates.len());
    for (k, s) in file.microstates.into_iter().enumerate() {
        if s.h.len() != file.n {
            bail!("model file {origin}: microstate {k} has {} observables, expected n = {}", s.h.len(), file.n);
        }
        states.push(Microstate::with_log_degeneracy(s.h, s.log_g));
    }
    let label = file.label.unwrap_or_else(|| format!("file:{origin}"));
    Ensemble::from_microstates(label, names, states).map_err(|e| anyhow!("model file {origin}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_grammar() {
        let m = parse_model("quadratic:C=[[2,1],[1,2]],b=[0.5,-0.25]").unwrap();
        assert_eq!(m.n(), 2);
        let (c, b) = m.ensemble.quadratic_coefficients().unwrap();
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(b, &[0.5, -0.25]);
        assert_eq!(parse_model("ising_ring:N=6").unwrap().ensemble.microstate_count().unwrap(), 64);
        assert_eq!(parse_model("two_level").unwrap().n(), 1);
    }

    #[test]
    fn bad_specs_have_actionable_messages() {
        let e = |s: &str| parse_model(s).err().unwrap().to_string();
        assert!(e("potts:q=3").contains("models list"));
        assert!(e("two_level:eps=x").contains("eps"));
        assert!(e("ising_ring:K=1").contains("allowed"));
        assert!(e("quadratic:C=[[1,2]").contains("unbalanced"));
        assert!(e("quadratic:C=[[1,2],[3,1]]").contains("symmetric"));
    }

    #[test]
    fn points() {
        assert_eq!(parse_point("0.5, -1e-3").unwrap(), vec![0.5, -1e-3]);
        assert!(parse_point("1,,2").is_err());
        assert!(parse_point("nan").is_err());
    }

    #[test]
    fn model_json() {
        let text = r#"{"n": 1, "names": ["H"], "microstates": [{"H": [0]}, {"H": [2], "log_g": 0.0}]}"#;
        let ens = parse_model_json(text, "inline").unwrap();
        assert_eq!(ens.microstate_count().unwrap(), 2);
        assert!(parse_model_json(r#"{"n": 2, "microstates": [{"H": [0]}]}"#, "x").is_err());
    }
}
