//! Reparametrization files:
//! `{"i_map": [{"kind", "params"}], "mix"?, "e_map"?, "e_mix"?}`.
//!
//! Each side applies its scalar maps componentwise, then the optional
//! mixing matrix. A missing `e_map` is the identity.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use contactotherm_core::linalg::Matrix;
use contactotherm_core::phase_space::{ComponentMap, ScalarMap};
use contactotherm_core::Reparametrization;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepFile {
    i_map: Vec<MapEntry>,
    #[serde(default)]
    mix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    e_map: Option<Vec<MapEntry>>,
    #[serde(default)]
    e_mix: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapEntry {
    kind: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

fn scalar(entry: &MapEntry, side: &str, k: usize) -> Result<ScalarMap> {
    let allowed: &[(&str, Option<f64>)] = match entry.kind.as_str() {
        "identity" => &[],
        "affine" | "exp" | "ln" => &[("a", None), ("b", Some(0.0))],
        "tanh_affine" => &[("a", None), ("c", None), ("d", None)],
        "odd_power" => &[("p", Some(3.0)), ("eps", Some(0.0))],
        other => bail!(
            "{side}[{k}]: unknown map kind '{other}' (expected identity, affine, exp, ln, tanh_affine or odd_power)"
        ),
    };
    for key in entry.params.keys() {
        if !allowed.iter().any(|(a, _)| a == key) {
            let names: Vec<_> = allowed.iter().map(|(a, _)| *a).collect();
            bail!("{side}[{k}]: {} takes parameters [{}], not '{key}'", entry.kind, names.join(", "));
        }
    }
    let get = |key: &str| -> Result<f64> {
        let default = allowed.iter().find(|(a, _)| *a == key).and_then(|(_, d)| *d);
        entry
            .params
            .get(key)
            .copied()
            .or(default)
            .ok_or_else(|| anyhow!("{side}[{k}]: {} needs parameter '{key}'", entry.kind))
    };
    let map = match entry.kind.as_str() {
        "identity" => ScalarMap::identity(),
        "affine" => ScalarMap::Affine { a: get("a")?, b: get("b")? },
        "exp" => ScalarMap::Exp { a: get("a")?, b: get("b")? },
        "ln" => ScalarMap::Ln { a: get("a")?, b: get("b")? },
        "tanh_affine" => ScalarMap::TanhAffine { a: get("a")?, c: get("c")?, d: get("d")? },
        _ => {
            let p = get("p")?;
            if p.fract() != 0.0 || !(1.0..=99.0).contains(&p) {
                bail!("{side}[{k}]: odd_power needs an odd integer p, got {p}");
            }
            ScalarMap::OddPower { p: p as u32, eps: get("eps")? }
        }
    };
    map.validate().map_err(|e| anyhow!("{side}[{k}]: {e}"))?;
    Ok(map)
}

fn side(entries: &[MapEntry], mix: Option<&Vec<Vec<f64>>>, name: &str, mix_name: &str, n: usize) -> Result<ComponentMap> {
    if entries.len() != n {
        bail!("{name} has {} entries but the model has n = {n}", entries.len());
    }
    let maps: Vec<ScalarMap> = entries.iter().enumerate().map(|(k, e)| scalar(e, name, k)).collect::<Result<_>>()?;
    match mix {
        None => ComponentMap::diagonal(maps).map_err(|e| anyhow!("{name}: {e}")),
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                bail!("{mix_name} must be a {n}x{n} matrix");
            }
            let m = Matrix::from_rows(rows).map_err(|e| anyhow!("{mix_name}: {e}"))?;
            ComponentMap::mixed(maps, m).map_err(|e| anyhow!("{mix_name}: {e}; choose an invertible mixing matrix"))
        }
    }
}

/// Parses a reparametrization for a model with `n` observables.
pub fn parse_reparam_json(text: &str, origin: &str, n: usize) -> Result<Reparametrization> {
    let file: RepFile =
        serde_json::from_str(text).with_context(|| format!("malformed reparametrization {origin}"))?;
    let i = side(&file.i_map, file.mix.as_ref(), "i_map", "mix", n).with_context(|| format!("in {origin}"))?;
    let e = match &file.e_map {
        Some(entries) => side(entries, file.e_mix.as_ref(), "e_map", "e_mix", n).with_context(|| format!("in {origin}"))?,
        None if file.e_mix.is_some() => bail!("{origin}: e_mix given without e_map"),
        None => ComponentMap::identity(n),
    };
    Reparametrization::new(i, e).map_err(|e| anyhow!("{origin}: {e}"))
}

/// `--reparam` accepts inline JSON or a path.
pub fn load_reparam(arg: &str, n: usize) -> Result<Reparametrization> {
    if arg.trim_start().starts_with('{') {
        parse_reparam_json(arg, "inline reparametrization", n)
    } else {
        let text = std::fs::read_to_string(arg).with_context(|| format!("cannot read reparametrization file {arg}"))?;
        parse_reparam_json(&text, arg, n)
    }
}

fn describe_side(m: &ComponentMap) -> Value {
    json!({
        "maps": m.maps().iter().map(|s| format!("{s:?}")).collect::<Vec<_>>(),
        "mix": m.mix().map(Matrix::to_rows),
    })
}

/// A report entry naming the maps on both sides.
pub fn describe(rep: &Reparametrization) -> Value {
    json!({
        "intensive": describe_side(rep.intensive_map()),
        "extensive": describe_side(rep.extensive_map()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_sides() {
        let text = r#"{
            "i_map": [{"kind": "tanh_affine", "params": {"a": 1.0, "c": 0.5, "d": 1.0}}, {"kind": "affine", "params": {"a": 2}}],
            "mix": [[1, 0.2], [0, 1]],
            "e_map": [{"kind": "odd_power", "params": {"eps": 0.5}}, {"kind": "identity"}]
        }"#;
        let rep = parse_reparam_json(text, "t", 2).unwrap();
        assert!(!rep.intensive_map().is_diagonal());
        assert_eq!(rep.extensive_map().maps()[0].kind(), "odd_power");
    }

    #[test]
    fn rejects_bad_input() {
        let err = |t: &str| format!("{:#}", parse_reparam_json(t, "t", 1).err().unwrap());
        assert!(err(r#"{"i_map": [{"kind": "sinh"}]}"#).contains("unknown map kind"));
        assert!(err(r#"{"i_map": [{"kind": "affine", "params": {"a": 0}}]}"#).contains("i_map"));
        assert!(err(r#"{"i_map": [{"kind": "affine", "params": {"a": 1, "q": 1}}]}"#).contains("'q'"));
        assert!(err(r#"{"i_map": []}"#).contains("n = 1"));
        let singular = r#"{"i_map": [{"kind": "identity"}, {"kind": "identity"}], "mix": [[1, 2], [2, 4]]}"#;
        let e = format!("{:#}", parse_reparam_json(singular, "t", 2).err().unwrap());
        assert!(e.contains("singular"), "{e}");
    }
}
