//! Acceptance criteria, one PASS/FAIL line each. End-to-end criteria drive
//! the shipped binary; the rest call the engine directly.

use std::process::Command;
use std::time::{Duration, Instant};

use contactotherm_core::maxent::MaxEntProblem;
use contactotherm_core::phase_space::ruppeiner_at_extensive;
use contactotherm_core::{Ensemble, Error, SymTensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_contactotherm");
const QUADRATIC: &str = "quadratic:C=[[2,1],[1,2]],b=[0.5,-0.25]";

/// Criteria whose failure is explained by an analysis in the project notes.
/// They are still run and reported.
/// 2: a metric built in a chart with a nonlinear intensive map carries the
///    extra term Ẽ·∂²Ĩ.
/// 5: |η₂∧(dη₂)ⁿ| = n!·|det Λ·det Jᴱ|, which |det Λ| ≥ 0.1 does not bound
///    below by 0.5·n!.
const KNOWN_BLOCKED: &[u32] = &[2, 5];

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, notes: Vec::new() }
    }
}

fn model_specs() -> Vec<String> {
    let mut v = vec!["two_level:eps=2".to_string()];
    v.extend((4..=12).map(|n| format!("ising_ring:N={n},J=1,h=0")));
    v.push(QUADRATIC.into());
    v
}

fn ensemble(spec: &str) -> Ensemble {
    contactotherm::model::parse_model(spec).expect("acceptance models parse").ensemble
}

fn threads() -> String {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8).to_string()
}

fn cli(args: &[&str]) -> (i32, Vec<u8>, String) {
    let out = Command::new(BIN).args(args).env_remove("CONTACTOTHERM_THREADS").output().expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout, String::from_utf8_lossy(&out.stderr).into_owned())
}

fn cli_json(args: &[&str]) -> Result<(i32, Value), String> {
    let (code, out, err) = cli(args);
    if code == 1 {
        return Err(format!("{args:?} failed: {}", err.trim()));
    }
    serde_json::from_slice(&out).map(|v| (code, v)).map_err(|e| format!("bad report from {args:?}: {e}"))
}

fn points(v: &Value) -> &Vec<Value> {
    v["results"]["points"].as_array().expect("report has points")
}

fn max_field(v: &Value, key: &str) -> f64 {
    points(v).iter().map(|p| p[key].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Covariance of the Gibbs distribution: exact summation for tables, `C`
/// for the Gaussian family behind the quadratic potential.
fn covariance(ens: &Ensemble, at: &[f64]) -> SymTensor2 {
    match ens.quadratic_coefficients() {
        Some((c, _)) => c.clone(),
        None => ens.covariance_metric(at).unwrap(),
    }
}

/// `∂φ/∂I` without jets: direct means for tables, `C I + b` for quadratics.
fn gradient_oracle(ens: &Ensemble, at: &[f64]) -> Vec<f64> {
    match ens.quadratic_coefficients() {
        Some((c, b)) => (0..at.len()).map(|i| b[i] + (0..at.len()).map(|j| c.get(i, j) * at[j]).sum::<f64>()).collect(),
        None => ens.mean_observables(at).unwrap(),
    }
}

fn within(budget: Duration, t: Duration) -> bool {
    t <= budget
}

fn c1_fisher() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (m, spec) in model_specs().iter().enumerate() {
        let ens = ensemble(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + m as u64);
        for _ in 0..100 {
            let at = random_point(&mut rng, ens.n());
            let h = ens.potential_hessian(&at).unwrap().2;
            worst = worst.max(h.max_abs_diff(&covariance(&ens, &at)));
        }
    }
    let t = start.elapsed();
    Outcome::new(
        worst <= 1e-10 && within(Duration::from_secs(10), t),
        format!("max |Hess φ − Cov| = {worst:.3e} over 11 models × 100 points (≤ 1e-10), {:.2} s (≤ 10 s)", t.as_secs_f64()),
    )
}

/// Runs the invariance sweeps once; criteria 2 and 3 read the same reports.
fn invariance_reports(extra: &[&str]) -> Result<(Vec<(String, Value)>, Duration), String> {
    let start = Instant::now();
    let th = threads();
    let mut out = Vec::new();
    for spec in model_specs() {
        let mut args = vec!["verify", "invariance", "--model", &spec, "--points", "100", "--seed", "2024", "--threads", &th];
        args.extend_from_slice(extra);
        out.push((spec.clone(), cli_json(&args)?.1));
    }
    Ok((out, start.elapsed()))
}

fn c2_invariance(reports: &Result<(Vec<(String, Value)>, Duration), String>) -> Outcome {
    let (reports, t) = match reports {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.clone()),
    };
    let worst = reports.iter().map(|(_, v)| v["max_delta"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let passing: usize = reports.iter().map(|(_, v)| points(v).iter().filter(|p| p["pass"] == true).count()).sum();
    let total: usize = reports.iter().map(|(_, v)| points(v).len()).sum();
    let corrected = reports.iter().map(|(_, v)| max_field(v, "chart_corrected_delta")).fold(0.0, f64::max);
    let chart = reports.iter().map(|(_, v)| max_field(v, "chart_term")).fold(0.0, f64::max);
    let mut o = Outcome::new(
        worst <= 1e-9 && within(Duration::from_secs(30), *t),
        format!(
            "max pairwise delta = {worst:.3e} (≤ 1e-9); {passing}/{total} draws agree; {:.2} s (≤ 30 s)",
            t.as_secs_f64()
        ),
    );
    o.notes.push(format!(
        "largest chart term |Ẽ·∂²Ĩ| = {chart:.3e}; pullback_G2 + Ẽ·∂²Ĩ vs pullback_G1: max delta {corrected:.3e}"
    ));
    match invariance_reports(&["--affine-intensive"]) {
        Ok((aff, _)) => {
            let w = aff.iter().map(|(_, v)| v["max_delta"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
            let all = aff.iter().all(|(_, v)| v["pass"] == true);
            o.notes.push(format!("affine intensive maps only (E-side maps and mixes unrestricted): max delta {w:.3e}, all pass = {all}"));
        }
        Err(e) => o.notes.push(e),
    }
    o
}

fn c3_first_law(reports: &Result<(Vec<(String, Value)>, Duration), String>) -> Outcome {
    let (reports, _) = match reports {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.clone()),
    };
    let e1 = reports.iter().map(|(_, v)| max_field(v, "eta1_residual")).fold(0.0, f64::max);
    let e2 = reports.iter().map(|(_, v)| max_field(v, "eta2_residual")).fold(0.0, f64::max);
    Outcome::new(
        e1 <= 1e-12 && e2 <= 1e-12,
        format!("max |ι*η₁| = {e1:.3e}, max |ι̃*η₂| = {e2:.3e} over the criterion 2 draws (≤ 1e-12)"),
    )
}

fn c4_legendre() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut ok = true;
    for n in 1..=4 {
        let ns = n.to_string();
        match cli_json(&["verify", "legendre", "--n", &ns, "--points", "100", "--seed", "44"]) {
            Ok((code, v)) => {
                ok &= code == 0;
                worst = worst.max(v["max_delta"].as_f64().unwrap_or(f64::INFINITY));
            }
            Err(e) => return Outcome::new(false, e),
        }
    }
    let t = start.elapsed();
    Outcome::new(
        ok && worst <= 1e-12 && within(Duration::from_secs(5), t),
        format!("max |f*η₁ − η₁| = {worst:.3e} over all 2ⁿ partitions, n = 1..4, 100 points each (≤ 1e-12), {:.2} s (≤ 5 s)", t.as_secs_f64()),
    )
}

fn c5_contact() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    let mut notes = Vec::new();
    for n in 1..=4usize {
        let ns = n.to_string();
        let v = match cli_json(&["verify", "contact", "--n", &ns, "--points", "100", "--seed", "55"]) {
            Ok((_, v)) => v,
            Err(e) => return Outcome::new(false, e),
        };
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let pts = points(&v);
        let min1 = pts.iter().map(|p| p["eta1_volume"].as_f64().unwrap().abs()).fold(f64::INFINITY, f64::min);
        let checked: Vec<&Value> = pts.iter().filter(|p| p["eta2_checked"] == true).collect();
        let min2 = checked.iter().map(|p| p["eta2_volume"].as_f64().unwrap().abs()).fold(f64::INFINITY, f64::min);
        let pass = v["pass"] == true;
        ok &= pass;
        details.push(format!("n={n}: min|η₁∧(dη₁)ⁿ|/n! = {:.3}, min|η₂∧(dη₂)ⁿ|/n! = {:.3}", min1 / fact, min2 / fact));
        // |top(η₂)| = n!·|det Λ|·|det Jᴱ| exactly
        let ident = checked
            .iter()
            .map(|p| {
                let expect = fact * (p["lambda_det"].as_f64().unwrap() * p["extensive_jacobian_det"].as_f64().unwrap()).abs();
                (p["eta2_volume"].as_f64().unwrap().abs() - expect).abs() / expect.max(1.0)
            })
            .fold(0.0, f64::max);
        let below = checked.iter().filter(|p| p["eta2_volume"].as_f64().unwrap().abs() < 0.5 * fact).count();
        notes.push(format!("n={n}: {below}/{} η₂ draws below 0.5·n!; |top| vs n!·|det Λ·det Jᴱ| max rel dev {ident:.2e}", checked.len()));
    }
    let mut o = Outcome::new(ok, format!("{} (threshold 0.5; η₂ with |det Λ| ≥ 0.1)", details.join("; ")));
    o.notes = notes;
    o
}

fn c6_maxent() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (m, spec) in model_specs().iter().enumerate() {
        let ens = ensemble(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(600 + m as u64);
        for _ in 0..50 {
            let i0 = random_point(&mut rng, ens.n());
            let target = gradient_oracle(&ens, &i0);
            match MaxEntProblem::new(&ens, &target).and_then(|p| p.solve()) {
                Ok(s) => {
                    let d = s.intensive.iter().zip(&i0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    worst = worst.max(d);
                }
                Err(e) => failures.push(format!("{spec} at {i0:?}: {e}")),
            }
        }
    }
    let boundary = MaxEntProblem::new(&ensemble("two_level:eps=2"), &[2.0]).unwrap().solve();
    let infeasible = matches!(boundary, Err(Error::InfeasibleTarget(_)));
    let mut o = Outcome::new(
        failures.is_empty() && worst <= 1e-8 && infeasible,
        format!(
            "max ‖I* − I₀‖∞ = {worst:.3e} over 11 models × 50 targets (≤ 1e-8); {} solver failures; E* = 2 on two_level infeasible: {infeasible}",
            failures.len()
        ),
    );
    o.notes.extend(failures.into_iter().take(3));
    o
}

fn c7_ruppeiner() -> Outcome {
    let ens = ensemble("two_level:eps=2");
    let mut worst = 0.0f64;
    let mut worst_fd = 0.0f64;
    for k in 0..50 {
        let e = 0.05 + 1.9 * k as f64 / 49.0;
        let closed = 1.0 / (e * (2.0 - e));
        match ruppeiner_at_extensive(&ens, &[e], None) {
            Ok(r) => {
                worst = worst.max((r.transported.get(0, 0) - closed).abs() / closed);
                worst_fd = worst_fd.max((r.entropy_hessian.get(0, 0) - closed).abs() / closed);
            }
            Err(err) => return Outcome::new(false, format!("E = {e}: {err}")),
        }
    }
    let mut o = Outcome::new(
        worst <= 1e-4,
        format!("max rel |transported − 1/(E(ε−E))| = {worst:.3e} on 50 points of [0.05, 1.95] (≤ 1e-4)"),
    );
    o.notes.push(format!("finite-difference −∂²S/∂E² vs closed form: max rel dev {worst_fd:.3e}"));
    o
}

fn c8_autodiff() -> Outcome {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (m, spec) in model_specs().iter().enumerate() {
        let ens = ensemble(spec);
        let n = ens.n();
        let mut rng = ChaCha8Rng::seed_from_u64(800 + m as u64);
        for _ in 0..100 {
            let at = random_point(&mut rng, n);
            let hess = ens.potential_hessian(&at).unwrap().2;
            let mut err = 0.0f64;
            for b in 0..n {
                let mut up = at.clone();
                let mut dn = at.clone();
                up[b] += h;
                dn[b] -= h;
                let (gu, gd) = (gradient_oracle(&ens, &up), gradient_oracle(&ens, &dn));
                for a in 0..n {
                    err = err.max(((gu[a] - gd[a]) / (2.0 * h) - hess.get(a, b)).abs());
                }
            }
            worst = worst.max(err / hess.max_abs());
        }
    }
    Outcome::new(worst <= 1e-6, format!("max rel |Hess φ − central FD| = {worst:.3e} over 11 models × 100 points (≤ 1e-6)"))
}

fn c9_monte_carlo() -> Outcome {
    let start = Instant::now();
    let tl = ensemble("two_level:eps=2");
    let big = tl.mc_covariance(&[0.0], 1_000_000, 9).unwrap();
    let (c, se) = (big.covariance.get(0, 0), big.std_error.get(0, 0));
    let z = (c - 1.0).abs() / se;
    let median = |samples: usize| {
        let mut errs: Vec<f64> =
            (0..20).map(|s| (tl.mc_covariance(&[0.0], samples, 900 + s).unwrap().covariance.get(0, 0) - 1.0).abs()).collect();
        errs.sort_by(f64::total_cmp);
        0.5 * (errs[9] + errs[10])
    };
    let (m1, m4) = (median(250_000), median(1_000_000));
    let ratio = m1 / m4;
    let t = start.elapsed();
    Outcome::new(
        z <= 5.0 && ratio >= 1.4 && within(Duration::from_secs(20), t),
        format!(
            "10⁶ samples: cov = {c:.6}, |cov − 1| = {:.2} SE (≤ 5); median error 2.5e5 → 1e6 samples shrinks {ratio:.2}× (≥ 1.4), {:.2} s (≤ 20 s)",
            z,
            t.as_secs_f64()
        ),
    )
}

fn c10_determinism() -> Outcome {
    let runs: [&[&str]; 3] = [
        &["verify", "invariance", "--model", "ising_ring:N=6,J=1,h=0", "--points", "50", "--seed", "10", "--threads", "1"],
        &["verify", "contact", "--n", "3", "--points", "50", "--seed", "10", "--threads", "1"],
        &["verify", "legendre", "--model", QUADRATIC, "--points", "50", "--seed", "10", "--threads", "1"],
    ];
    let mut same = 0;
    for args in runs {
        let (c1, a, _) = cli(args);
        let (c2, b, _) = cli(args);
        if c1 != 1 && c1 == c2 && !a.is_empty() && a == b {
            same += 1;
        }
    }
    Outcome::new(same == runs.len(), format!("{same}/{} verification commands byte-identical on repeat with T = 1", runs.len()))
}

fn main() {
    let invariance = invariance_reports(&[]);
    let criteria: Vec<(u32, &str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        (1, "Fisher three-way identity", Box::new(c1_fisher)),
        (2, "metric invariance under reparametrization", Box::new(|| c2_invariance(&invariance))),
        (3, "first law on both embeddings", Box::new(|| c3_first_law(&invariance))),
        (4, "contact invariance of Legendre transformations", Box::new(c4_legendre)),
        (5, "non-integrability of η₁ and η₂", Box::new(c5_contact)),
        (6, "maximum-entropy round trip", Box::new(c6_maxent)),
        (7, "Ruppeiner consistency", Box::new(c7_ruppeiner)),
        (8, "AD Hessian vs finite differences", Box::new(c8_autodiff)),
        (9, "Monte-Carlo fluctuations", Box::new(c9_monte_carlo)),
        (10, "determinism", Box::new(c10_determinism)),
    ];
    let mut passed = 0;
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let o = run();
        println!("{} criterion {id:>2} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        for note in &o.notes {
            println!("     note: {note}");
        }
        if o.pass {
            passed += 1;
        } else if !KNOWN_BLOCKED.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("{passed}/10 criteria passed");
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
