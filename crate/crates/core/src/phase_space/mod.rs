//! The thermodynamic phase space with coordinates `(φ, E₁..Eₙ, I¹..Iⁿ)`:
//! contact forms, the tensors `t`, metrics `G = η⊗η + t`, the embedding of
//! the equilibrium manifold and pullbacks along it.
//!
//! All component layouts use that coordinate order. `t` is stored
//! symmetrized, `½(dE⊗dI + dI⊗dE)`.

mod geometry;
mod legendre;
pub mod reparam;

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Jet;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::exterior::{CoefficientField, KForm};
use crate::linalg::{signature, symmetric_eigenvalues, Lu, Matrix};

pub use crate::linalg::SymTensor2;
pub use geometry::{
    christoffel_symbols, curvature_scalar, entropy_at, ruppeiner_at_extensive, ruppeiner_check,
    RuppeinerReport, RUPPEINER_TOL,
};
pub use legendre::{
    legendre_contact_residual, legendre_jacobian, legendre_submanifold, legendre_transform,
    legendre_transform_jets, LegendrePartition,
};
pub use reparam::{
    random_reparametrization, ComponentMap, InvertibleScalar, RandomRepOptions, Reparametrization, ScalarMap,
};

/// Pairwise agreement required of the invariance chain.
pub const INVARIANCE_TOL: f64 = 1e-9;
/// First-law residuals must vanish to this level.
pub const FIRST_LAW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub phi: f64,
    pub extensive: Vec<f64>,
    pub intensive: Vec<f64>,
}

impl PhasePoint {
    pub fn new(phi: f64, extensive: Vec<f64>, intensive: Vec<f64>) -> Result<Self> {
        if extensive.len() != intensive.len() {
            return Err(Error::DimensionMismatch { expected: intensive.len(), got: extensive.len() });
        }
        let p = Self { phi, extensive, intensive };
        if !p.coords().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("phase-space coordinates must be finite".into()));
        }
        Ok(p)
    }

    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self> {
        if coords.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: coords.len() });
        }
        Self::new(coords[0], coords[1..=n].to_vec(), coords[n + 1..].to_vec())
    }

    pub fn n(&self) -> usize {
        self.intensive.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.n() + 1
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.dim());
        c.push(self.phi);
        c.extend_from_slice(&self.extensive);
        c.extend_from_slice(&self.intensive);
        c
    }
}

fn check_rep(p: &PhasePoint, rep: &Reparametrization) -> Result<()> {
    if rep.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: rep.n() });
    }
    Ok(())
}

/// `η₁ = dφ − E_a dI^a`
pub fn eta1(p: &PhasePoint) -> KForm {
    let n = p.n();
    let mut c = vec![0.0; 2 * n + 1];
    c[0] = 1.0;
    for a in 0..n {
        c[1 + n + a] = -p.extensive[a];
    }
    KForm::one_form(&c).expect("dimension is positive")
}

/// `(Ẽ_ã Λ^ã_a)_a`, the components of `Ẽ_ã dĨ^ã` along `dI^a`.
fn transported_extensive(p: &PhasePoint, rep: &Reparametrization) -> Result<Vec<f64>> {
    let lambda = rep.intensive_jacobian(&p.intensive)?;
    let e_tilde = rep.extensive_map().apply_values(&p.extensive)?;
    lambda.tmatvec(&e_tilde)
}

/// `η₂ = dφ − Ẽ_ã dĨ^ã` written in the original coordinates.
pub fn eta2(p: &PhasePoint, rep: &Reparametrization) -> Result<KForm> {
    check_rep(p, rep)?;
    let n = p.n();
    let w = transported_extensive(p, rep)?;
    let mut c = vec![0.0; 2 * n + 1];
    c[0] = 1.0;
    for a in 0..n {
        c[1 + n + a] = -w[a];
    }
    KForm::one_form(&c)
}

/// Symmetrized `dẼ_ã ⊗ dĨ^ã` in the original coordinates; `None` means
/// the identity reparametrization.
pub fn t_tensor(p: &PhasePoint, rep: Option<&Reparametrization>) -> Result<SymTensor2> {
    let n = p.n();
    let mut t = SymTensor2::zeros(2 * n + 1);
    match rep {
        None => {
            for a in 0..n {
                t.set(1 + a, 1 + n + a, 0.5);
            }
        }
        Some(rep) => {
            check_rep(p, rep)?;
            let lambda = rep.intensive_jacobian(&p.intensive)?;
            let je = rep.extensive_jacobian(&p.extensive)?;
            // M[b][a] = Σ_ã (∂Ẽ_ã/∂E_b)(∂Ĩ^ã/∂I^a)
            let m = je.transpose().matmul(&lambda)?;
            for b in 0..n {
                for a in 0..n {
                    t.set(1 + b, 1 + n + a, 0.5 * m[(b, a)]);
                }
            }
        }
    }
    Ok(t)
}

fn outer_plus(eta: &KForm, t: SymTensor2) -> SymTensor2 {
    let c = eta.coeffs();
    let mut g = t;
    for i in 0..c.len() {
        for j in 0..=i {
            g.add_to(i, j, c[i] * c[j]);
        }
    }
    g
}

/// `G = η⊗η + t`, with `η₁`/`t₁` for `None` and `η₂`/`t₂` otherwise.
pub fn metric_g(p: &PhasePoint, rep: Option<&Reparametrization>) -> Result<SymTensor2> {
    let eta = match rep {
        None => eta1(p),
        Some(r) => eta2(p, r)?,
    };
    Ok(outer_plus(&eta, t_tensor(p, rep)?))
}

/// `η₂` as a field over the phase space, for exterior derivatives.
pub fn eta2_field(rep: &Reparametrization) -> CoefficientField {
    let n = rep.n();
    let rep = rep.clone();
    CoefficientField::new(2 * n + 1, move |x: &[Jet]| {
        let i_tilde = rep.intensive_map().apply(&x[1 + n..])?;
        let e_tilde = rep.extensive_map().apply(&x[1..=n])?;
        let mut a = vec![Jet::constant(0.0); 2 * n + 1];
        a[0] = Jet::constant(1.0);
        for c in 0..n {
            let mut acc = Jet::constant(0.0);
            for (it, et) in i_tilde.iter().zip(&e_tilde) {
                if it.nvars() > 0 {
                    acc = &acc + &(et * &it.derivative(1 + n + c)?);
                }
            }
            a[1 + n + c] = -acc;
        }
        Ok(a)
    })
}

/// Top coefficient of `η ∧ (dη)ⁿ` for `η₁` (`None`) or `η₂`.
pub fn contact_volume(p: &PhasePoint, rep: Option<&Reparametrization>) -> Result<f64> {
    let n = p.n();
    let field = match rep {
        None => crate::exterior::darboux_field(n),
        Some(r) => {
            check_rep(p, r)?;
            // surfaces singular Jacobians as errors rather than a small volume
            r.intensive_jacobian(&p.intensive)?;
            r.extensive_jacobian(&p.extensive)?;
            eta2_field(r)
        }
    };
    field.nonintegrability_volume(&p.coords(), n)
}

/// Signature of `G` restricted to `ker η` (basis `∂_{E_a}`, `∂_{I^a} + w_a ∂_φ`).
pub fn contact_distribution_signature(
    p: &PhasePoint,
    rep: Option<&Reparametrization>,
    cutoff: f64,
) -> Result<(usize, usize)> {
    let n = p.n();
    let w = match rep {
        None => p.extensive.clone(),
        Some(r) => {
            check_rep(p, r)?;
            transported_extensive(p, r)?
        }
    };
    let g = metric_g(p, rep)?;
    let basis = Matrix::from_fn(2 * n + 1, 2 * n, |row, col| {
        if col < n {
            if row == 1 + col {
                1.0
            } else {
                0.0
            }
        } else {
            let a = col - n;
            if row == 1 + n + a {
                1.0
            } else if row == 0 {
                w[a]
            } else {
                0.0
            }
        }
    });
    let restricted = g.congruence(&basis)?;
    let scale = symmetric_eigenvalues(&restricted).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(signature(&restricted, cutoff * scale.max(1.0)))
}

/// A point of the equilibrium manifold together with `∂(φ, E, I)/∂I`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub point: PhasePoint,
    /// `(2n+1) × n`
    pub tangent: Matrix,
}

impl Embedding {
    pub fn pullback_metric(&self, t: &SymTensor2) -> Result<SymTensor2> {
        pullback(t, &self.tangent)
    }

    pub fn pullback_form(&self, eta: &KForm) -> Result<Vec<f64>> {
        pullback_form(eta, &self.tangent)
    }
}

/// `(ι*T)_{ab} = T_{μν} J^μ_a J^ν_b`
pub fn pullback(t: &SymTensor2, tangent: &Matrix) -> Result<SymTensor2> {
    if tangent.rows() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), got: tangent.rows() });
    }
    t.congruence(tangent)
}

/// `(ι*ω)_a = ω_μ J^μ_a`
pub fn pullback_form(eta: &KForm, tangent: &Matrix) -> Result<Vec<f64>> {
    if tangent.rows() != eta.dim() {
        return Err(Error::DimensionMismatch { expected: eta.dim(), got: tangent.rows() });
    }
    eta.contract(tangent)
}

fn tangent_from_blocks(e_row: &[f64], de: &Matrix) -> Matrix {
    let n = e_row.len();
    Matrix::from_fn(2 * n + 1, n, |r, c| {
        if r == 0 {
            e_row[c]
        } else if r <= n {
            de[(r - 1, c)]
        } else if r - 1 - n == c {
            1.0
        } else {
            0.0
        }
    })
}

/// The identity embedding `I ↦ (φ(I), ∂φ/∂I, I)`.
pub fn embed(ens: &Ensemble, intensive: &[f64]) -> Result<Embedding> {
    let (phi, e, h) = ens.potential_hessian(intensive)?;
    let point = PhasePoint::new(phi, e.clone(), intensive.to_vec())?;
    Ok(Embedding { point, tangent: tangent_from_blocks(&e, &h.to_matrix()) })
}

/// The embedding through the reparametrized chart, with the pieces it was
/// built from.
#[derive(Debug, Clone)]
pub struct ReparametrizedEmbedding {
    /// Point and tangent in original coordinates, differentiated along `I`.
    pub embedding: Embedding,
    /// `Ẽ_ã = ∂φ/∂Ĩ^ã`
    pub extensive_tilde: Vec<f64>,
    pub intensive_tilde: Vec<f64>,
    /// `Λ^ã_a` at the point
    pub lambda: Matrix,
}

/// Embeds the equilibrium manifold through the chart `Ĩ`: `φ` is
/// differentiated with respect to `Ĩ` to get `Ẽ`, which is mapped back to
/// original extensive values. The `φ` row of the tangent is the direct
/// gradient of `φ` along `I`, independent of the chart.
pub fn embed_reparametrized(
    ens: &Ensemble,
    intensive: &[f64],
    rep: &Reparametrization,
) -> Result<ReparametrizedEmbedding> {
    let n = ens.n();
    if intensive.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: intensive.len() });
    }
    if rep.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rep.n() });
    }
    let lambda = rep.intensive_jacobian(intensive)?;
    let i_tilde = rep.intensive_map().apply_values(intensive)?;
    let seeded = Jet::seed(&i_tilde, 2)?;
    let i_of_tilde = rep.intensive_map().inverse(&seeded)?;
    let phi = ens.log_partition(&i_of_tilde)?;
    let e_tilde_jets: Vec<Jet> =
        (0..n).map(|k| phi.derivative(k)).collect::<Result<_>>()?;
    let e_tilde: Vec<f64> = e_tilde_jets.iter().map(Jet::value).collect();
    let e_jets = rep.extensive_map().inverse(&e_tilde_jets)?;
    let extensive: Vec<f64> = e_jets.iter().map(Jet::value).collect();
    rep.extensive_jacobian(&extensive)?;
    // ∂E/∂Ĩ, then chain with Λ to differentiate along I
    let de_dtilde = Matrix::from_fn(n, n, |r, c| if e_jets[r].nvars() == 0 { 0.0 } else { e_jets[r].grad()[c] });
    let de = de_dtilde.matmul(&lambda)?;
    let direct = Jet::seed(intensive, 1)?;
    let phi_direct = ens.log_partition(&direct)?;
    let mut dphi = phi_direct.grad().to_vec();
    dphi.resize(n, 0.0);
    let point = PhasePoint::new(phi_direct.value(), extensive, intensive.to_vec())?;
    Ok(ReparametrizedEmbedding {
        embedding: Embedding { point, tangent: tangent_from_blocks(&dphi, &de) },
        extensive_tilde: e_tilde,
        intensive_tilde: i_tilde,
        lambda,
    })
}

/// Names of the six metric computations compared by [`verify_invariance_chain`].
pub const CHAIN_LABELS: [&str; 6] =
    ["pullback_G1", "pullback_G2", "pullback_t1", "pullback_t2", "hessian", "covariance"];

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub intensive: Vec<f64>,
    /// Entries in [`CHAIN_LABELS`] order; covariance is absent for analytic models.
    pub metrics: Vec<(&'static str, SymTensor2)>,
    /// `(i, j, max |metrics[i] − metrics[j]|)` for every pair.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub max_delta: f64,
    /// `max |ι*η₁|`
    pub eta1_residual: f64,
    /// `max |ι̃*η₂|`
    pub eta2_residual: f64,
    /// `max |∂φ/∂Ĩ − Λ^{-T} E|`
    pub one_form_law_delta: f64,
    /// `max |ι̃*G₂ + Ẽ_d ∂²Ĩ^d − ι*G₁|`: the reparametrized pullback with the
    /// second-derivative term of the chart restored.
    pub chart_corrected_delta: f64,
    /// `max |Ẽ_d ∂_a∂_b Ĩ^d|`
    pub chart_term: f64,
    pub jacobian_det: f64,
}

impl InvarianceReport {
    pub fn passes(&self, tol: f64, first_law_tol: f64) -> bool {
        self.max_delta <= tol && self.eta1_residual <= first_law_tol && self.eta2_residual <= first_law_tol
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Computes the metric of the equilibrium manifold in the original
/// `I`-chart six ways and compares them.
pub fn verify_invariance_chain(
    ens: &Ensemble,
    intensive: &[f64],
    rep: &Reparametrization,
) -> Result<InvarianceReport> {
    let n = ens.n();
    let plain = embed(ens, intensive)?;
    let tilde = embed_reparametrized(ens, intensive, rep)?;
    let p1 = &plain.point;
    let p2 = &tilde.embedding.point;

    let g1 = plain.pullback_metric(&metric_g(p1, None)?)?;
    let g2 = tilde.embedding.pullback_metric(&metric_g(p2, Some(rep))?)?;
    let t1 = plain.pullback_metric(&t_tensor(p1, None)?)?;
    let t2 = tilde.embedding.pullback_metric(&t_tensor(p2, Some(rep))?)?;
    let hess = ens.potential_hessian(intensive)?.2;
    let mut metrics = vec![
        (CHAIN_LABELS[0], g1),
        (CHAIN_LABELS[1], g2),
        (CHAIN_LABELS[2], t1),
        (CHAIN_LABELS[3], t2),
        (CHAIN_LABELS[4], hess),
    ];
    if ens.is_enumerated() {
        metrics.push((CHAIN_LABELS[5], ens.covariance_metric(intensive)?));
    }
    let mut pairwise = Vec::new();
    let mut max_delta = 0.0f64;
    for i in 0..metrics.len() {
        for j in i + 1..metrics.len() {
            let d = metrics[i].1.max_abs_diff(&metrics[j].1);
            max_delta = max_delta.max(d);
            pairwise.push((i, j, d));
        }
    }

    let eta1_residual = max_abs(&plain.pullback_form(&eta1(p1))?);
    let eta2_residual = max_abs(&tilde.embedding.pullback_form(&eta2(p2, rep)?)?);

    let lu = Lu::new(&tilde.lambda)?;
    let transported = lu.solve_transpose(&p1.extensive)?;
    let one_form_law_delta = tilde
        .extensive_tilde
        .iter()
        .zip(&transported)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let second = rep.intensive_map().apply(&Jet::seed(intensive, 2)?)?;
    let chart = SymTensor2::from_fn(n, |a, b| {
        second
            .iter()
            .zip(&tilde.extensive_tilde)
            .map(|(c, e)| if c.nvars() == 0 || c.order() < 2 { 0.0 } else { e * c.hess(a, b) })
            .sum()
    });
    let mut corrected = metrics[1].1.clone();
    for a in 0..n {
        for b in 0..=a {
            corrected.add_to(a, b, chart.get(a, b));
        }
    }
    Ok(InvarianceReport {
        intensive: intensive.to_vec(),
        chart_corrected_delta: corrected.max_abs_diff(&metrics[0].1),
        chart_term: chart.max_abs(),
        metrics,
        pairwise,
        max_delta,
        eta1_residual,
        eta2_residual,
        one_form_law_delta,
        jacobian_det: lu.determinant(),
    })
}
