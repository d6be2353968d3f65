//! Library results checked against independent direct computations.

use contactotherm_core::ensemble::Microstate;
use contactotherm_core::maxent;
use contactotherm_core::phase_space::{self, curvature_scalar, ruppeiner_at_extensive};
use contactotherm_core::{Ensemble, Jet, SymTensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force `(φ, mean, covariance)` of an Ising ring from the spin
/// configurations.
fn ising_brute_force(n: usize, j: f64, h: f64, at: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let mut states = Vec::new();
    for mask in 0..1usize << n {
        let s: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let pairs: f64 = (0..n).map(|i| s[i] * s[(i + 1) % n]).sum();
        let m: f64 = s.iter().sum();
        states.push([-j * pairs - h * m, m]);
    }
    let w: Vec<f64> = states.iter().map(|o| at[0] * o[0] + at[1] * o[1]).collect();
    let top = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = w.iter().map(|x| (x - top).exp()).sum();
    let phi = top + z.ln();
    let p: Vec<f64> = w.iter().map(|x| (x - phi).exp()).collect();
    let mut mean = [0.0; 2];
    for (pk, o) in p.iter().zip(&states) {
        mean[0] += pk * o[0];
        mean[1] += pk * o[1];
    }
    let mut cov = [[0.0; 2]; 2];
    for (pk, o) in p.iter().zip(&states) {
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] += pk * (o[a] - mean[a]) * (o[b] - mean[b]);
            }
        }
    }
    (phi, mean, cov)
}

#[test]
fn ising_matches_brute_force_enumeration() {
    for (n, j, h) in [(3, 1.0, 0.0), (4, 1.0, 0.0), (6, -0.5, 0.3), (9, 1.0, 0.0)] {
        let ens = Ensemble::ising_ring(n as u32, j, h).unwrap();
        for at in [[-0.3, 0.1], [0.2, -0.4], [0.0, 0.0]] {
            let (phi, mean, cov) = ising_brute_force(n, j, h, at);
            let (p, g, hess) = ens.potential_hessian(&at).unwrap();
            assert!((p - phi).abs() < 1e-12 * phi.abs().max(1.0));
            for a in 0..2 {
                assert!((g[a] - mean[a]).abs() < 1e-11);
                for b in 0..2 {
                    assert!((hess.get(a, b) - cov[a][b]).abs() < 1e-10, "N={n} {at:?}");
                }
            }
        }
    }
}

#[test]
fn ising_zero_field_partition_function() {
    // Z = (2 cosh βJ)^N + (2 sinh βJ)^N with I₁ = −β
    for n in [4u32, 7, 12] {
        let ens = Ensemble::ising_ring(n, 1.0, 0.0).unwrap();
        let beta: f64 = 0.35;
        let z = (2.0 * beta.cosh()).powi(n as i32) + (2.0 * beta.sinh()).powi(n as i32);
        let phi = ens.log_partition_value(&[-beta, 0.0]).unwrap();
        assert!((phi - z.ln()).abs() < 1e-12);
    }
}

fn covariance_metric_fd(ens: &Ensemble, at: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    // dg[c][a][b] = ∂_c g_ab from central differences of the covariance
    (0..at.len())
        .map(|c| {
            let mut p = at.to_vec();
            let mut m = at.to_vec();
            p[c] += h;
            m[c] -= h;
            let gp = ens.covariance_metric(&p).unwrap();
            let gm = ens.covariance_metric(&m).unwrap();
            (0..at.len())
                .map(|a| (0..at.len()).map(|b| (gp.get(a, b) - gm.get(a, b)) / (2.0 * h)).collect())
                .collect()
        })
        .collect()
}

fn inverse2(g: &SymTensor2) -> [[f64; 2]; 2] {
    let det = g.get(0, 0) * g.get(1, 1) - g.get(0, 1) * g.get(1, 0);
    [[g.get(1, 1) / det, -g.get(0, 1) / det], [-g.get(1, 0) / det, g.get(0, 0) / det]]
}

/// Christoffel symbols of the covariance metric from finite differences only.
fn christoffel_fd(ens: &Ensemble, at: &[f64], h: f64) -> [[[f64; 2]; 2]; 2] {
    let dg = covariance_metric_fd(ens, at, h);
    let gi = inverse2(&ens.covariance_metric(at).unwrap());
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                gamma[a][b][c] = (0..2)
                    .map(|d| 0.5 * gi[a][d] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]))
                    .sum();
            }
        }
    }
    gamma
}

fn curvature_fd(ens: &Ensemble, at: [f64; 2]) -> f64 {
    let h = 1e-3;
    let gamma = christoffel_fd(ens, &at, h);
    let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
    for e in 0..2 {
        let mut p = at;
        let mut m = at;
        p[e] += h;
        m[e] -= h;
        let (gp, gm) = (christoffel_fd(ens, &p, h), christoffel_fd(ens, &m, h));
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    dgamma[e][a][b][c] = (gp[a][b][c] - gm[a][b][c]) / (2.0 * h);
                }
            }
        }
    }
    let gi = inverse2(&ens.covariance_metric(&at).unwrap());
    let mut r = 0.0;
    for b in 0..2 {
        for d in 0..2 {
            let mut ricci = 0.0;
            for a in 0..2 {
                ricci += dgamma[a][a][d][b] - dgamma[d][a][a][b];
                for e in 0..2 {
                    ricci += gamma[a][a][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][a][b];
                }
            }
            r += gi[b][d] * ricci;
        }
    }
    r
}

#[test]
fn ising_curvature_matches_fd_pipeline() {
    let ens = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
    let at = [-0.3, 0.1];
    let r = curvature_scalar(&ens, &at).unwrap();
    let oracle = curvature_fd(&ens, at);
    assert!((r - oracle).abs() <= 1e-4 * oracle.abs(), "{r} vs {oracle}");
}

#[test]
fn three_state_simplex_has_constant_curvature() {
    // the Fisher metric of a 3-outcome categorical family is a round sphere
    // of radius 2: R = 2/r² = ½
    let states = vec![
        Microstate::new(vec![1.0, 0.0]),
        Microstate::new(vec![0.0, 1.0]),
        Microstate::new(vec![0.0, 0.0]),
    ];
    let ens = Ensemble::from_microstates("simplex".into(), vec!["a".into(), "b".into()], states).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let at = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let r = curvature_scalar(&ens, &at).unwrap();
        assert!((r - 0.5).abs() < 1e-6, "{at:?}: {r}");
        assert!((curvature_fd(&ens, at) - 0.5).abs() < 1e-4);
    }
}

#[test]
fn two_level_ruppeiner_on_grid() {
    let eps = 2.0;
    let tl = Ensemble::two_level(eps).unwrap();
    for k in 1..=20 {
        let e = eps * k as f64 / 21.0;
        let r = ruppeiner_at_extensive(&tl, &[e], None).unwrap();
        // S(E) = −p ln p − (1−p) ln(1−p), p = E/ε ⇒ −S'' = 1/(E(ε−E))
        let exact = 1.0 / (e * (eps - e));
        assert!((r.transported.get(0, 0) - exact).abs() <= 1e-10 * exact);
        assert!((r.entropy_hessian.get(0, 0) - exact).abs() <= 1e-4 * exact, "E={e}");
    }
}

#[test]
fn maxent_solution_beats_feasible_perturbations() {
    let ens = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
    let targets = ens.equations_of_state(&[-0.4, 0.25]).unwrap();
    let sol = maxent::solve(&ens, &targets).unwrap();
    let state = ens.gibbs_state(&sol.intensive).unwrap();
    let p = state.probs().to_vec();
    let k = p.len();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let o = ens.microstate(i).unwrap().observables;
            vec![1.0, o[0], o[1]]
        })
        .collect();
    let entropy = |q: &[f64]| -> f64 { -q.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>() };
    let s_star = entropy(&p);
    assert!((s_star - sol.entropy).abs() < 1e-10);

    // Gram–Schmidt basis of the constraint rows, then project random
    // directions onto its orthogonal complement.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in 0..3 {
        let mut v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mut d: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let dot: f64 = d.iter().zip(b).map(|(x, y)| x * y).sum();
            d.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = rng.gen_range(1e-5..1e-3) / norm;
        let q: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + scale * b).collect();
        assert!(q.iter().all(|&x| x >= 0.0));
        assert!(entropy(&q) <= s_star + 1e-9);
    }
}

#[test]
fn gradient_matches_direct_mean() {
    let ens = Ensemble::ising_ring(5, 1.0, 0.2).unwrap();
    let at = [0.3, -0.6];
    let g = ens.equations_of_state(&at).unwrap();
    let m = ens.gibbs_state(&at).unwrap().averages().unwrap();
    for (a, b) in g.iter().zip(&m) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn analytic_model_jets_match_closed_form() {
    // φ(I) = ln(1 + e^{I₀}) + ln(1 + e^{I₁}) + ½ I₀ I₁
    let ens = Ensemble::analytic(
        "softplus_pair".into(),
        vec!["x".into(), "y".into()],
        std::sync::Arc::new(|x: &[Jet]| -> contactotherm_core::Result<Jet> {
            let a = (&x[0].exp() + 1.0).ln()?;
            let b = (&x[1].exp() + 1.0).ln()?;
            Ok(&(&a + &b) + &(&(&x[0] * &x[1]) * 0.5))
        }),
        None,
    )
    .unwrap();
    let at = [0.2, -0.5];
    let (_, g, h) = ens.potential_hessian(&at).unwrap();
    let sig = |t: f64| 1.0 / (1.0 + (-t).exp());
    assert!((g[0] - (sig(0.2) + 0.5 * -0.5)).abs() < 1e-14);
    assert!((h.get(0, 0) - sig(0.2) * (1.0 - sig(0.2))).abs() < 1e-14);
    assert!((h.get(0, 1) - 0.5).abs() < 1e-15);
    let emb = phase_space::embed(&ens, &at).unwrap();
    assert!(emb.pullback_form(&phase_space::eta1(&emb.point)).unwrap().iter().all(|v| v.abs() <= 1e-12));
}
