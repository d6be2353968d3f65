//! The subcommands, each producing a [`Report`].

use anyhow::{anyhow, bail, Context, Result};
use contactotherm_core::ensemble::Ensemble;
use contactotherm_core::linalg::{determinant, Matrix};
use contactotherm_core::maxent::{MaxEntProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};
use contactotherm_core::phase_space::{
    christoffel_symbols, contact_distribution_signature, contact_volume, curvature_scalar, embed, eta1,
    legendre_contact_residual, legendre_jacobian, legendre_transform, metric_g, pullback_form,
    random_reparametrization, ruppeiner_at_extensive, verify_invariance_chain, RandomRepOptions,
    FIRST_LAW_TOL, INVARIANCE_TOL, RUPPEINER_TOL,
};
use contactotherm_core::{LegendrePartition, PhasePoint, Reparametrization, SymTensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::model::{Model, BUILTINS};
use crate::parallel::par_map;
use crate::reparam_spec;
use crate::report::Report;

/// Default agreement required between the Hessian, the covariance and the
/// pulled-back metric when no reparametrization is involved.
pub const METRIC_TOL: f64 = 1e-10;
/// Threshold factor for `|η∧(dη)ⁿ|` relative to `n!`.
pub const CONTACT_VOLUME_FACTOR: f64 = 0.5;
pub const MIN_LAMBDA_DET: f64 = 0.1;
pub const LEGENDRE_TOL: f64 = 1e-12;

fn sym(t: &SymTensor2) -> Value {
    json!(t.to_rows())
}

/// The RNG for point `index` of a sweep: one ChaCha stream per point, so a
/// point's draws do not depend on how the sweep is split across threads.
pub fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, ranges: &[(f64, f64)]) -> Vec<f64> {
    ranges.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text.split_once(':').ok_or_else(|| anyhow!("range '{text}' must look like lo:hi"))?;
    let lo: f64 = a.trim().parse().map_err(|_| anyhow!("range '{text}': '{a}' is not a number"))?;
    let hi: f64 = b.trim().parse().map_err(|_| anyhow!("range '{text}': '{b}' is not a number"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        bail!("range '{text}' needs finite lo < hi");
    }
    Ok((lo, hi))
}

/// `lo:hi:steps`, endpoints included.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("grid '{text}' must look like lo:hi:steps");
    }
    let (lo, hi) = parse_range(&format!("{}:{}", parts[0], parts[1]))?;
    let steps: usize =
        parts[2].trim().parse().map_err(|_| anyhow!("grid '{text}': steps '{}' is not a positive integer", parts[2]))?;
    match steps {
        0 => bail!("grid '{text}' needs at least one step"),
        1 => Ok(vec![lo]),
        _ => Ok((0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()),
    }
}

pub fn models_list() -> Report {
    let mut r = Report::new("models list", Value::Null);
    r.points = BUILTINS
        .iter()
        .map(|b| {
            let params: Map<String, Value> = b.params.iter().map(|(k, d)| (k.to_string(), json!(d))).collect();
            json!({ "name": b.name, "example": b.example, "defaults": params, "description": b.description })
        })
        .collect();
    r
}

pub fn metric(model: &Model, points: &[Vec<f64>], rep: Option<&Reparametrization>, tol: Option<f64>, threads: usize) -> Result<Report> {
    let ens = &model.ensemble;
    let tol = tol.unwrap_or(if rep.is_some() { INVARIANCE_TOL } else { METRIC_TOL });
    let records = collect(par_map(points, threads, |_, at| -> Result<(Value, f64, bool)> {
        let ctx = || format!("at I = {at:?}");
        let (phi, e, _) = ens.potential_hessian(at).with_context(ctx)?;
        let mut rec = json!({ "intensive": at, "phi": phi, "extensive": e });
        let mut g = Map::new();
        let mut deltas = Map::new();
        let (max_delta, ok) = match rep {
            None => {
                let emb = embed(ens, at).with_context(ctx)?;
                let mut ms = vec![("hessian", ens.potential_hessian(at)?.2)];
                if ens.is_enumerated() {
                    ms.push(("covariance", ens.covariance_metric(at)?));
                }
                ms.push(("pullback", emb.pullback_metric(&metric_g(&emb.point, None)?)?));
                let mut worst = 0.0f64;
                for i in 0..ms.len() {
                    for j in i + 1..ms.len() {
                        let d = ms[i].1.max_abs_diff(&ms[j].1);
                        worst = worst.max(d);
                        deltas.insert(format!("{}_{}", ms[i].0, ms[j].0), json!(d));
                    }
                }
                for (name, t) in &ms {
                    g.insert(name.to_string(), sym(t));
                }
                (worst, worst <= tol)
            }
            Some(rep) => {
                let r = verify_invariance_chain(ens, at, rep).with_context(ctx)?;
                for (name, t) in &r.metrics {
                    g.insert(name.to_string(), sym(t));
                }
                for &(i, j, d) in &r.pairwise {
                    deltas.insert(format!("{}_{}", r.metrics[i].0, r.metrics[j].0), json!(d));
                }
                rec["eta1_residual"] = json!(r.eta1_residual);
                rec["eta2_residual"] = json!(r.eta2_residual);
                rec["chart_term"] = json!(r.chart_term);
                rec["chart_corrected_delta"] = json!(r.chart_corrected_delta);
                (r.max_delta, r.passes(tol, FIRST_LAW_TOL))
            }
        };
        rec["g"] = Value::Object(g);
        rec["deltas"] = Value::Object(deltas);
        rec["max_delta"] = json!(max_delta);
        rec["pass"] = json!(ok);
        Ok((rec, max_delta, ok))
    }))?;
    let mut r = Report::new("metric", model.describe());
    r.max_delta = Some(records.iter().map(|x| x.1).fold(0.0, f64::max));
    r.pass = Some(records.iter().all(|x| x.2));
    r.points = records.into_iter().map(|x| x.0).collect();
    r.tolerances.push(("metric", tol));
    if rep.is_some() {
        r.tolerances.push(("first_law", FIRST_LAW_TOL));
    }
    Ok(r)
}

pub struct InvarianceOptions {
    pub points: usize,
    pub seed: u64,
    pub intensive_box: (f64, f64),
    pub affine_intensive_only: bool,
    pub tol: f64,
    pub first_law_tol: f64,
}

impl Default for InvarianceOptions {
    fn default() -> Self {
        Self {
            points: 100,
            seed: 0,
            intensive_box: (-1.0, 1.0),
            affine_intensive_only: false,
            tol: INVARIANCE_TOL,
            first_law_tol: FIRST_LAW_TOL,
        }
    }
}

pub fn verify_invariance(model: &Model, rep: Option<&Reparametrization>, o: &InvarianceOptions, threads: usize) -> Result<Report> {
    let ens = &model.ensemble;
    let n = ens.n();
    let ranges = vec![o.intensive_box; n];
    let bounds = ens.observable_bounds();
    let opts = RandomRepOptions { affine_intensive_only: o.affine_intensive_only, ..Default::default() };
    let idx: Vec<usize> = (0..o.points).collect();
    let records = collect(par_map(&idx, threads, |_, &k| -> Result<(Value, f64, bool)> {
        let mut rng = point_rng(o.seed, k);
        let at = uniform(&mut rng, &ranges);
        let random = rep.is_none();
        let drawn;
        let rep = match rep {
            Some(r) => r,
            None => {
                drawn = random_reparametrization(&mut rng, n, &ranges, bounds.as_deref(), &opts);
                &drawn
            }
        };
        let r = verify_invariance_chain(ens, &at, rep).with_context(|| format!("point {k} at I = {at:?}"))?;
        let ok = r.passes(o.tol, o.first_law_tol);
        let pairwise: Map<String, Value> = r
            .pairwise
            .iter()
            .map(|&(i, j, d)| (format!("{}_{}", r.metrics[i].0, r.metrics[j].0), json!(d)))
            .collect();
        let mut rec = json!({
            "index": k,
            "intensive": at,
            "max_delta": r.max_delta,
            "pairwise": pairwise,
            "eta1_residual": r.eta1_residual,
            "eta2_residual": r.eta2_residual,
            "one_form_law_delta": r.one_form_law_delta,
            "chart_term": r.chart_term,
            "chart_corrected_delta": r.chart_corrected_delta,
            "lambda_det": r.jacobian_det,
            "pass": ok,
        });
        if random {
            rec["reparametrization"] = reparam_spec::describe(rep);
        }
        Ok((rec, r.max_delta, ok))
    }))?;
    let mut r = Report::new("verify invariance", model.describe());
    r.max_delta = Some(records.iter().map(|x| x.1).fold(0.0, f64::max));
    r.pass = Some(records.iter().all(|x| x.2));
    r.points = records.into_iter().map(|x| x.0).collect();
    r.tolerances = vec![("invariance", o.tol), ("first_law", o.first_law_tol)];
    r.seed = Some(o.seed);
    Ok(r)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Draws a random reparametrization whose intensive Jacobian at `at` has
/// `|det Λ| ≥ min_det`.
fn draw_rep_with_det(rng: &mut ChaCha8Rng, at: &PhasePoint, ranges: &[(f64, f64)], min_det: f64) -> Result<Reparametrization> {
    let n = at.n();
    for _ in 0..1000 {
        let rep = random_reparametrization(rng, n, ranges, Some(ranges), &RandomRepOptions::default());
        if let Ok(l) = rep.intensive_jacobian(&at.intensive) {
            if determinant(&l)?.abs() >= min_det {
                return Ok(rep);
            }
        }
    }
    bail!("could not draw a reparametrization with |det Λ| ≥ {min_det} at I = {:?}", at.intensive)
}

pub struct ContactOptions {
    pub points: usize,
    pub seed: u64,
    pub coordinate_box: (f64, f64),
    pub min_lambda_det: f64,
}

impl Default for ContactOptions {
    fn default() -> Self {
        Self { points: 100, seed: 0, coordinate_box: (-2.0, 2.0), min_lambda_det: MIN_LAMBDA_DET }
    }
}

/// Non-integrability of `η₁` and `η₂` at random phase-space points, and
/// the split signature of `G` on the contact distribution.
pub fn verify_contact(model: Value, n: usize, rep: Option<&Reparametrization>, o: &ContactOptions, threads: usize) -> Result<Report> {
    let threshold = CONTACT_VOLUME_FACTOR * factorial(n);
    let ranges = vec![o.coordinate_box; n];
    let idx: Vec<usize> = (0..o.points).collect();
    let records = collect(par_map(&idx, threads, |_, &k| -> Result<(Value, bool)> {
        let mut rng = point_rng(o.seed, k);
        let coords = uniform(&mut rng, &vec![o.coordinate_box; 2 * n + 1]);
        let p = PhasePoint::from_coords(n, &coords)?;
        let ctx = || format!("point {k} at {coords:?}");
        let vol1 = contact_volume(&p, None).with_context(ctx)?;
        let sig1 = contact_distribution_signature(&p, None, 1e-10).with_context(ctx)?;
        let random = rep.is_none();
        let rep = match rep {
            Some(r) => r.clone(),
            None => draw_rep_with_det(&mut rng, &p, &ranges, o.min_lambda_det)?,
        };
        let lambda_det = determinant(&rep.intensive_jacobian(&p.intensive).with_context(ctx)?)?;
        let e_det = determinant(&rep.extensive_jacobian(&p.extensive).with_context(ctx)?)?;
        let vol2 = contact_volume(&p, Some(&rep)).with_context(ctx)?;
        let sig2 = contact_distribution_signature(&p, Some(&rep), 1e-10).with_context(ctx)?;
        let checked = lambda_det.abs() >= o.min_lambda_det;
        let ok1 = vol1.abs() >= threshold && sig1 == (n, n);
        let ok2 = !checked || (vol2.abs() >= threshold && sig2 == (n, n));
        let mut rec = json!({
            "index": k,
            "point": coords,
            "eta1_volume": vol1,
            "eta1_signature": [sig1.0, sig1.1],
            "eta2_volume": vol2,
            "eta2_signature": [sig2.0, sig2.1],
            "lambda_det": lambda_det,
            "extensive_jacobian_det": e_det,
            "eta2_checked": checked,
            "pass": ok1 && ok2,
        });
        if random {
            rec["reparametrization"] = reparam_spec::describe(&rep);
        }
        Ok((rec, ok1 && ok2))
    }))?;
    let mut r = Report::new("verify contact", model);
    r.pass = Some(records.iter().all(|x| x.1));
    r.points = records.into_iter().map(|x| x.0).collect();
    r.tolerances = vec![("min_volume", threshold), ("min_lambda_det", o.min_lambda_det)];
    r.seed = Some(o.seed);
    Ok(r)
}

pub struct LegendreOptions {
    pub points: usize,
    pub seed: u64,
    pub coordinate_box: (f64, f64),
    pub tol: f64,
}

impl Default for LegendreOptions {
    fn default() -> Self {
        Self { points: 100, seed: 0, coordinate_box: (-4.0, 4.0), tol: LEGENDRE_TOL }
    }
}

/// `max |ι*η₁|` on the image of the equilibrium manifold under `part`.
fn submanifold_residual(ens: &Ensemble, at: &[f64], part: &LegendrePartition) -> Result<f64> {
    let emb = embed(ens, at)?;
    let jac: Matrix = legendre_jacobian(&emb.point, part)?;
    let image = legendre_transform(&emb.point, part)?;
    let tangent = jac.matmul(&emb.tangent)?;
    let pulled = pullback_form(&eta1(&image), &tangent)?;
    Ok(pulled.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Contact invariance of every partial Legendre transformation, the
/// twice-applied transformation, and (with a model) the image of the
/// equilibrium manifold.
pub fn verify_legendre(model: Option<&Model>, n: usize, o: &LegendreOptions, threads: usize) -> Result<Report> {
    let parts = LegendrePartition::all(n)?;
    let total = LegendrePartition::total(n)?;
    let idx: Vec<usize> = (0..o.points).collect();
    let records = collect(par_map(&idx, threads, |_, &k| -> Result<(Value, f64, bool)> {
        let mut rng = point_rng(o.seed, k);
        let coords = uniform(&mut rng, &vec![o.coordinate_box; 2 * n + 1]);
        let p = PhasePoint::from_coords(n, &coords)?;
        let mut worst = 0.0f64;
        let mut worst_mask = 0;
        for part in &parts {
            let d = legendre_contact_residual(&p, part)?;
            if d > worst {
                worst = d;
                worst_mask = part.mask();
            }
        }
        let twice = legendre_transform(&legendre_transform(&p, &total)?, &total)?;
        let negated = twice.extensive.iter().zip(&p.extensive).all(|(a, b)| *a == -b)
            && twice.intensive.iter().zip(&p.intensive).all(|(a, b)| *a == -b);
        let mut rec = json!({
            "index": k,
            "point": coords,
            "contact_residual": worst,
            "worst_partition": worst_mask,
            "twice_negates_pairs": negated,
            "twice_phi_delta": (twice.phi - p.phi).abs(),
        });
        let mut ok = worst <= o.tol && negated;
        let mut delta = worst;
        if let Some(m) = model {
            let at = uniform(&mut rng, &vec![(-1.0, 1.0); n]);
            let mut sub = 0.0f64;
            for part in &parts {
                sub = sub.max(submanifold_residual(&m.ensemble, &at, part).with_context(|| format!("at I = {at:?}"))?);
            }
            rec["intensive"] = json!(at);
            rec["submanifold_residual"] = json!(sub);
            ok &= sub <= o.tol;
            delta = delta.max(sub);
        }
        rec["pass"] = json!(ok);
        Ok((rec, delta, ok))
    }))?;
    let desc = model.map_or_else(|| json!({ "spec": null, "n": n }), Model::describe);
    let mut r = Report::new("verify legendre", desc);
    r.max_delta = Some(records.iter().map(|x| x.1).fold(0.0, f64::max));
    r.pass = Some(records.iter().all(|x| x.2));
    r.points = records.into_iter().map(|x| x.0).collect();
    r.tolerances = vec![("contact", o.tol)];
    r.seed = Some(o.seed);
    Ok(r)
}

pub fn maxent(model: &Model, targets: &[f64], initial: Option<&[f64]>, tol: Option<f64>, max_iter: Option<usize>) -> Result<Report> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let mut problem = MaxEntProblem::new(&model.ensemble, targets)?
        .with_tol(tol)
        .with_max_iter(max_iter.unwrap_or(DEFAULT_MAX_ITER));
    if let Some(x0) = initial {
        problem = problem.with_initial(x0)?;
    }
    let s = problem.solve()?;
    let mut r = Report::new("maxent", model.describe());
    r.points.push(json!({
        "targets": targets,
        "intensive": s.intensive,
        "phi": s.phi,
        "entropy": s.entropy,
        "iterations": s.iterations,
        "residual": s.residual,
        "dual_history": s.dual_history,
    }));
    r.tolerances.push(("residual", tol));
    Ok(r)
}

pub fn sample(model: &Model, at: &[f64], samples: usize, seed: u64) -> Result<Report> {
    let ens = &model.ensemble;
    let mc = ens.mc_covariance(at, samples, seed)?;
    let exact = if ens.is_enumerated() { ens.covariance_metric(at)? } else { ens.potential_hessian(at)?.2 };
    let n = ens.n();
    let mut z = 0.0f64;
    for a in 0..n {
        for b in 0..=a {
            let se = mc.std_error.get(a, b);
            if se > 0.0 {
                z = z.max((mc.covariance.get(a, b) - exact.get(a, b)).abs() / se);
            }
        }
    }
    let mut r = Report::new("sample", model.describe());
    r.points.push(json!({
        "intensive": at,
        "samples": samples,
        "covariance": sym(&mc.covariance),
        "std_error": sym(&mc.std_error),
        "exact": sym(&exact),
        "max_z": z,
    }));
    r.seed = Some(seed);
    Ok(r)
}

pub fn curvature(model: &Model, points: &[Vec<f64>], threads: usize) -> Result<Report> {
    let ens = &model.ensemble;
    let records = collect(par_map(points, threads, |_, at| -> Result<Value> {
        let ctx = || format!("at I = {at:?}");
        let g = ens.potential_hessian(at).with_context(ctx)?.2;
        let r = curvature_scalar(ens, at).with_context(ctx)?;
        let gamma = christoffel_symbols(ens, at).with_context(ctx)?;
        Ok(json!({ "intensive": at, "scalar_curvature": r, "metric": sym(&g), "christoffel": gamma }))
    }))?;
    let mut r = Report::new("curvature", model.describe());
    r.points = records;
    Ok(r)
}

pub fn ruppeiner(model: &Model, extensive: &[Vec<f64>], tol: Option<f64>, threads: usize) -> Result<Report> {
    let ens = &model.ensemble;
    let tol = tol.unwrap_or(RUPPEINER_TOL);
    let records = collect(par_map(extensive, threads, |_, e| -> Result<(Value, f64, bool)> {
        let rep = ruppeiner_at_extensive(ens, e, None).with_context(|| format!("at E = {e:?}"))?;
        let ok = rep.passes(tol);
        let rec = json!({
            "extensive": rep.extensive,
            "intensive": rep.intensive,
            "transported": sym(&rep.transported),
            "entropy_hessian": sym(&rep.entropy_hessian),
            "max_rel_dev": rep.max_rel_dev,
            "step": rep.step,
            "pass": ok,
        });
        Ok((rec, rep.max_rel_dev, ok))
    }))?;
    let mut r = Report::new("ruppeiner", model.describe());
    r.max_delta = Some(records.iter().map(|x| x.1).fold(0.0, f64::max));
    r.pass = Some(records.iter().all(|x| x.2));
    r.points = records.into_iter().map(|x| x.0).collect();
    r.tolerances.push(("relative", tol));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use contactotherm_core::phase_space::CHAIN_LABELS;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.5:1:1").unwrap(), vec![0.5]);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn point_streams_are_independent_of_order() {
        let a: f64 = point_rng(7, 3).gen();
        let _: f64 = point_rng(7, 2).gen();
        assert_eq!(a, point_rng(7, 3).gen::<f64>());
        assert_ne!(a, point_rng(7, 4).gen::<f64>());
    }

    #[test]
    fn two_level_metric_is_one_at_origin() {
        let m = parse_model("two_level:eps=2").unwrap();
        let r = metric(&m, &[vec![0.0]], None, None, 1).unwrap();
        let g = &r.points[0]["g"];
        for key in ["hessian", "covariance", "pullback"] {
            assert!((g[key][0][0].as_f64().unwrap() - 1.0).abs() <= 1e-15, "{key}");
        }
        assert_eq!(r.pass, Some(true));
    }

    #[test]
    fn chain_labels_cover_metric_keys() {
        let m = parse_model("ising_ring:N=4").unwrap();
        let rep = Reparametrization::identity(2);
        let r = metric(&m, &[vec![0.1, -0.2]], Some(&rep), None, 1).unwrap();
        for l in CHAIN_LABELS {
            assert!(r.points[0]["g"].get(l).is_some(), "{l}");
        }
    }
}
