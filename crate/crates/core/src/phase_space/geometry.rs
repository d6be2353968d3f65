//! Ruppeiner metric via the total Legendre transformation, and the scalar
//! curvature of the Hessian metric `g = ∂²φ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{embed, metric_g, LegendrePartition};
use crate::autodiff::Jet;
use crate::ensemble::Ensemble;
use crate::error::{fmt_point, Error, Result};
use crate::linalg::{symmetric_eigenvalues, Cholesky, SymTensor2};
use crate::maxent::MaxEntProblem;

pub const RUPPEINER_TOL: f64 = 1e-4;
/// `det ∂²φ` below this makes `E(I)` non-invertible.
const SINGULAR_HESSIAN: f64 = 1e-12;
/// Entropy finite-difference step as a fraction of the smallest standard
/// deviation of the observables.
const FD_STEP: f64 = 1e-3;
const CURVATURE_STEP: f64 = 1e-4;

fn singular_hessian(intensive: &[f64], det: f64) -> Error {
    Error::Singular { what: "Hessian of the potential", at: fmt_point(intensive), det }
}

fn checked_cholesky(hess: &SymTensor2, intensive: &[f64]) -> Result<Cholesky> {
    let det = hess.determinant();
    if !(det >= SINGULAR_HESSIAN) {
        return Err(singular_hessian(intensive, det));
    }
    Cholesky::new(hess, 0.0).map_err(|_| singular_hessian(intensive, det))
}

/// `S(E) = φ(I(E)) − I(E)·E` with `I(E)` from the maximum-entropy solver.
pub fn entropy_at(ens: &Ensemble, extensive: &[f64], initial: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let mut problem = MaxEntProblem::new(ens, extensive)?.with_tol(1e-13).with_max_iter(200);
    if let Some(x0) = initial {
        problem = problem.with_initial(x0)?;
    }
    let s = problem.solve()?;
    Ok((s.entropy, s.intensive))
}

#[derive(Debug, Clone)]
pub struct RuppeinerReport {
    pub intensive: Vec<f64>,
    pub extensive: Vec<f64>,
    /// `ι*G₁` re-expressed along the Legendre-dual coordinates `I' = −E`.
    pub transported: SymTensor2,
    /// `−∂²S/∂E²` by central differences.
    pub entropy_hessian: SymTensor2,
    /// `max |transported − entropy_hessian| / max |entropy_hessian|`
    pub max_rel_dev: f64,
    pub step: f64,
}

impl RuppeinerReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_dev <= tol
    }
}

/// Ruppeiner check at the multipliers `I`.
pub fn ruppeiner_check(ens: &Ensemble, intensive: &[f64]) -> Result<RuppeinerReport> {
    let n = ens.n();
    if intensive.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: intensive.len() });
    }
    let emb = embed(ens, intensive)?;
    let g = ens.potential_hessian(intensive)?.2;
    let g_inv = checked_cholesky(&g, intensive)?.inverse();

    // The total Legendre transformation makes I' = −E the coordinates of the
    // same submanifold; ∂I/∂I' = −g⁻¹.
    let total = LegendrePartition::total(n)?;
    debug_assert!(total.is_total());
    let d_i = g_inv.to_matrix();
    let reparam = crate::linalg::Matrix::from_fn(n, n, |r, c| -d_i[(r, c)]);
    let tangent = emb.tangent.matmul(&reparam)?;
    let transported = metric_g(&emb.point, None)?.congruence(&tangent)?;

    let e = emb.point.extensive.clone();
    let sigma = libm::sqrt(symmetric_eigenvalues(&g).first().copied().unwrap_or(0.0).max(0.0));
    let h = FD_STEP * sigma;
    let s = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut x = e.clone();
        for &(k, d) in shift {
            x[k] += d;
        }
        Ok(entropy_at(ens, &x, Some(intensive))?.0)
    };
    let s0 = s(&[])?;
    let mut minus_hess = SymTensor2::zeros(n);
    for a in 0..n {
        let d2 = (s(&[(a, h)])? - 2.0 * s0 + s(&[(a, -h)])?) / (h * h);
        minus_hess.set(a, a, -d2);
        for b in 0..a {
            let d2 = (s(&[(a, h), (b, h)])? - s(&[(a, h), (b, -h)])? - s(&[(a, -h), (b, h)])?
                + s(&[(a, -h), (b, -h)])?)
                / (4.0 * h * h);
            minus_hess.set(a, b, -d2);
        }
    }
    let max_rel_dev = transported.max_abs_diff(&minus_hess) / minus_hess.max_abs();
    Ok(RuppeinerReport { intensive: intensive.to_vec(), extensive: e, transported, entropy_hessian: minus_hess, max_rel_dev, step: h })
}

/// Ruppeiner check at the extensive values `E`, solving for `I(E)` first.
pub fn ruppeiner_at_extensive(ens: &Ensemble, extensive: &[f64], initial: Option<&[f64]>) -> Result<RuppeinerReport> {
    let (_, intensive) = entropy_at(ens, extensive, initial).map_err(|e| match e {
        Error::InfeasibleTarget(_) => Error::Singular {
            what: "equations of state (not invertible at this E)",
            at: fmt_point(extensive),
            det: 0.0,
        },
        other => other,
    })?;
    let g = ens.potential_hessian(&intensive)?.2;
    checked_cholesky(&g, &intensive)?;
    ruppeiner_check(ens, &intensive)
}

/// `Γ^a_{bc} = ½ g^{ad} ∂_d∂_b∂_c φ`, indexed `[a][b][c]` flat.
pub fn christoffel_symbols(ens: &Ensemble, intensive: &[f64]) -> Result<Vec<f64>> {
    let n = ens.n();
    let x = Jet::seed(intensive, 3)?;
    let phi = ens.log_partition(&x)?;
    let g = SymTensor2::from_fn(n, |a, b| phi.hess(a, b));
    let g_inv = checked_cholesky(&g, intensive)?.inverse();
    let mut gamma = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                gamma[(a * n + b) * n + c] = 0.5 * (0..n).map(|d| g_inv.get(a, d) * phi.third(d, b, c)).sum::<f64>();
            }
        }
    }
    Ok(gamma)
}

/// Scalar curvature of `g_ab = ∂_a∂_b φ` at `I`.
///
/// Christoffel symbols come from third derivatives; their derivatives are
/// central differences with one Richardson step.
pub fn curvature_scalar(ens: &Ensemble, intensive: &[f64]) -> Result<f64> {
    let n = ens.n();
    if intensive.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: intensive.len() });
    }
    let (_, _, g) = ens.potential_hessian(intensive)?;
    let g_inv = checked_cholesky(&g, intensive)?.inverse();
    if n == 1 {
        return Ok(0.0);
    }
    let gamma = christoffel_symbols(ens, intensive)?;
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    // dgamma[e][abc] = ∂_e Γ^a_bc
    let mut dgamma = Vec::with_capacity(n);
    for e in 0..n {
        let central = |h: f64| -> Result<Vec<f64>> {
            let mut xp = intensive.to_vec();
            let mut xm = intensive.to_vec();
            xp[e] += h;
            xm[e] -= h;
            let (gp, gm) = (christoffel_symbols(ens, &xp)?, christoffel_symbols(ens, &xm)?);
            Ok(gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * h)).collect())
        };
        let coarse = central(CURVATURE_STEP)?;
        let fine = central(0.5 * CURVATURE_STEP)?;
        dgamma.push(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect::<Vec<f64>>());
    }
    let mut scalar = 0.0;
    for b in 0..n {
        for d in 0..n {
            // Ricci R_bd = R^a_{bad}
            let mut ricci = 0.0;
            for a in 0..n {
                let c = a;
                let mut r = dgamma[c][idx(a, d, b)] - dgamma[d][idx(a, c, b)];
                for e in 0..n {
                    r += gamma[idx(a, c, e)] * gamma[idx(e, d, b)] - gamma[idx(a, d, e)] * gamma[idx(e, c, b)];
                }
                ricci += r;
            }
            scalar += g_inv.get(b, d) * ricci;
        }
    }
    if !scalar.is_finite() {
        return Err(Error::Domain { func: "curvature_scalar", detail: format!("non-finite at {}", fmt_point(intensive)) });
    }
    Ok(scalar)
}
