//! Pointwise exterior algebra on a `d`-dimensional space.
//!
//! A [`KForm`] stores one coefficient per strictly increasing index tuple,
//! in lexicographic order, so antisymmetry is structural. Index tuples are
//! handled as bitmasks internally. The positive orientation is the
//! coordinate order `(φ, E₁..Eₙ, I¹..Iⁿ)`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Jet;
use crate::error::{Error, Result};

pub const MAX_FORM_DIM: usize = 11;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Masks of all `k`-subsets of `0..d`, in lexicographic order of their
/// increasing index tuples.
pub fn basis(d: usize, k: usize) -> Vec<u32> {
    fn rec(d: usize, k: usize, start: usize, mask: u32, out: &mut Vec<u32>) {
        if k == 0 {
            out.push(mask);
            return;
        }
        for i in start..=d - k {
            rec(d, k - 1, i + 1, mask | (1 << i), out);
        }
    }
    let mut out = Vec::with_capacity(binomial(d, k));
    if k <= d {
        rec(d, k, 0, 0, &mut out);
    }
    out
}

/// Lexicographic rank of a `k`-subset mask among all `k`-subsets of `0..d`.
pub fn rank(mask: u32, d: usize) -> usize {
    let k = mask.count_ones() as usize;
    let mut r = 0;
    let mut next = 0;
    let mut placed = 0;
    for c in 0..d {
        if mask & (1 << c) == 0 {
            continue;
        }
        for skipped in next..c {
            r += binomial(d - 1 - skipped, k - 1 - placed);
        }
        next = c + 1;
        placed += 1;
    }
    r
}

/// `(−1)^{#{(a, b) : a ∈ A, b ∈ B, a > b}}`, the sign taking `dx^A ∧ dx^B`
/// to increasing order.
fn shuffle_sign(a: u32, b: u32) -> f64 {
    let mut inversions = 0;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        let above = if j >= 31 { 0 } else { !0u32 << (j + 1) };
        inversions += (a & above).count_ones();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Submasks of `t` with `k` bits, ascending.
fn submasks(t: u32, k: u32) -> impl Iterator<Item = u32> {
    let mut sub = Some(0u32);
    core::iter::from_fn(move || loop {
        let s = sub?;
        sub = if s == t { None } else { Some(((s | !t).wrapping_add(1)) & t) };
        if s.count_ones() == k {
            return Some(s);
        }
    })
}

/// An antisymmetric degree-`k` tensor at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct KForm {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl KForm {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_FORM_DIM {
            return Err(Error::InvalidArgument(format!(
                "form dimension must be in 1..={MAX_FORM_DIM}, got {dim}"
            )));
        }
        if degree > dim {
            return Err(Error::InvalidArgument(format!("degree {degree} exceeds dimension {dim}")));
        }
        Ok(Self { dim, degree, coeffs: vec![0.0; binomial(dim, degree)] })
    }

    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        let mut f = Self::zero(dim, 0)?;
        f.coeffs[0] = value;
        Ok(f)
    }

    /// `Σ coeffs[μ] dx^μ`
    pub fn one_form(coeffs: &[f64]) -> Result<Self> {
        let mut f = Self::zero(coeffs.len(), 1)?;
        f.coeffs.copy_from_slice(coeffs);
        Ok(f)
    }

    /// The coordinate differential `dx^index`.
    pub fn differential(dim: usize, index: usize) -> Result<Self> {
        let mut f = Self::zero(dim, 1)?;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        f.coeffs[index] = 1.0;
        Ok(f)
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let f = Self::zero(dim, degree)?;
        if coeffs.len() != f.coeffs.len() {
            return Err(Error::DimensionMismatch { expected: f.coeffs.len(), got: coeffs.len() });
        }
        Ok(Self { coeffs, ..f })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn mask_of(&self, indices: &[usize]) -> Result<(u32, f64)> {
        if indices.len() != self.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, got: indices.len() });
        }
        let mut mask = 0u32;
        let mut sign = 1.0;
        for (p, &i) in indices.iter().enumerate() {
            if i >= self.dim {
                return Err(Error::IndexOutOfRange { index: i, len: self.dim });
            }
            if mask & (1 << i) != 0 {
                return Ok((0, 0.0));
            }
            // bubble-sort parity
            for &j in &indices[..p] {
                if j > i {
                    sign = -sign;
                }
            }
            mask |= 1 << i;
        }
        Ok((mask, sign))
    }

    /// Component for an arbitrary index tuple, with the antisymmetric sign.
    pub fn get(&self, indices: &[usize]) -> Result<f64> {
        let (mask, sign) = self.mask_of(indices)?;
        if sign == 0.0 {
            return Ok(0.0);
        }
        Ok(sign * self.coeffs[rank(mask, self.dim)])
    }

    /// Sets the component of an increasing (or any) index tuple.
    pub fn set(&mut self, indices: &[usize], value: f64) -> Result<()> {
        let (mask, sign) = self.mask_of(indices)?;
        if sign == 0.0 {
            return Err(Error::InvalidArgument("repeated index in a form component".into()));
        }
        let r = rank(mask, self.dim);
        self.coeffs[r] = sign * value;
        Ok(())
    }

    pub fn scale(&self, c: f64) -> KForm {
        KForm { coeffs: self.coeffs.iter().map(|x| x * c).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(Error::DimensionMismatch { expected: self.coeffs.len(), got: other.coeffs.len() });
        }
        Ok(KForm {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// The single coefficient of a top-degree form.
    pub fn top_coefficient(&self) -> Result<f64> {
        if self.degree != self.dim {
            return Err(Error::InvalidArgument(format!(
                "degree-{} form on a {}-dimensional space is not a top form",
                self.degree, self.dim
            )));
        }
        Ok(self.coeffs[0])
    }

    pub fn max_abs_diff(&self, other: &KForm) -> f64 {
        if self.dim != other.dim || self.degree != other.degree {
            return f64::INFINITY;
        }
        self.coeffs.iter().zip(&other.coeffs).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Alternating product.
    ///
    /// Terms for each target tuple are summed in an order that does not
    /// depend on which operand is on the left, so `α∧β = (−1)^{kl} β∧α`
    /// holds bit-for-bit.
    pub fn wedge(&self, other: &KForm) -> Result<KForm> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let (k, l) = (self.degree, other.degree);
        if k + l > self.dim {
            return Err(Error::InvalidArgument(format!(
                "wedge of degrees {k} and {l} exceeds dimension {}",
                self.dim
            )));
        }
        let d = self.dim;
        let mut out = KForm::zero(d, k + l)?;
        // term with `a` taken from self and `b` from other
        let term = |a: u32, b: u32| {
            shuffle_sign(a, b) * self.coeffs[rank(a, d)] * other.coeffs[rank(b, d)]
        };
        for (slot, t) in basis(d, k + l).into_iter().enumerate() {
            let mut sum = 0.0;
            if k == l {
                if k == 0 {
                    sum = self.coeffs[0] * other.coeffs[0];
                } else {
                    for s in submasks(t, k as u32) {
                        let c = t ^ s;
                        if s < c {
                            sum += term(s, c) + term(c, s);
                        }
                    }
                }
            } else if k < l {
                for s in submasks(t, k as u32) {
                    sum += term(s, t ^ s);
                }
            } else {
                for s in submasks(t, l as u32) {
                    sum += term(t ^ s, s);
                }
            }
            out.coeffs[slot] = sum;
        }
        Ok(out)
    }

    /// `ω(J·)`: the covector `ω_μ J^μ_a` for a one-form and a `dim × m` matrix.
    pub fn contract(&self, tangent: &crate::linalg::Matrix) -> Result<Vec<f64>> {
        if self.degree != 1 {
            return Err(Error::InvalidArgument("only one-forms can be contracted with a tangent map".into()));
        }
        tangent.tmatvec(&self.coeffs)
    }
}

type FieldFn = dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync;

/// A one-form field `a_μ(x) dx^μ` whose coefficients are jet-expressible
/// maps of the coordinates.
///
/// The map is called with order-2 seeded coordinates, so coefficient maps
/// may take one [`Jet::derivative`] of an inner function and still return
/// usable first derivatives.
#[derive(Clone)]
pub struct CoefficientField {
    dim: usize,
    map: Arc<FieldFn>,
}

impl core::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CoefficientField").field("dim", &self.dim).finish()
    }
}

impl CoefficientField {
    pub fn new<F>(dim: usize, map: F) -> Self
    where
        F: Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    {
        Self { dim, map: Arc::new(map) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn eval_jets(&self, at: &[f64]) -> Result<Vec<Jet>> {
        if at.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: at.len() });
        }
        let x = Jet::seed(at, 2)?;
        let a = (self.map)(&x)?;
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: a.len() });
        }
        if let Some(bad) = a.iter().position(|c| !c.is_finite()) {
            return Err(Error::Domain {
                func: "coefficient field",
                detail: format!("coefficient {bad} is not finite"),
            });
        }
        Ok(a)
    }

    /// The one-form at a point.
    pub fn evaluate(&self, at: &[f64]) -> Result<KForm> {
        let a = self.eval_jets(at)?;
        KForm::one_form(&a.iter().map(Jet::value).collect::<Vec<_>>())
    }

    /// `(dω)_{μν} = ∂_μ a_ν − ∂_ν a_μ`
    pub fn exterior_derivative(&self, at: &[f64]) -> Result<KForm> {
        let a = self.eval_jets(at)?;
        let d = self.dim;
        let partial = |c: &Jet, mu: usize| if c.nvars() == 0 { 0.0 } else { c.grad()[mu] };
        let mut out = KForm::zero(d, 2)?;
        for (slot, t) in basis(d, 2).into_iter().enumerate() {
            let mu = t.trailing_zeros() as usize;
            let nu = (31 - t.leading_zeros()) as usize;
            out.coeffs[slot] = partial(&a[nu], mu) - partial(&a[mu], nu);
        }
        Ok(out)
    }

    /// Top coefficient of `η ∧ (dη)ⁿ` at a point of a `(2n+1)`-dimensional
    /// space; nonzero exactly when `η` is a contact form there.
    pub fn nonintegrability_volume(&self, at: &[f64], n: usize) -> Result<f64> {
        if self.dim != 2 * n + 1 {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: self.dim });
        }
        let eta = self.evaluate(at)?;
        let d_eta = self.exterior_derivative(at)?;
        let mut acc = eta;
        for _ in 0..n {
            acc = acc.wedge(&d_eta)?;
        }
        acc.top_coefficient()
    }
}

pub fn wedge(alpha: &KForm, beta: &KForm) -> Result<KForm> {
    alpha.wedge(beta)
}

pub fn exterior_derivative(field: &CoefficientField, at: &[f64]) -> Result<KForm> {
    field.exterior_derivative(at)
}

pub fn nonintegrability_volume(eta: &CoefficientField, at: &[f64], n: usize) -> Result<f64> {
    eta.nonintegrability_volume(at, n)
}

/// The Darboux form `dφ − Σ E_a dI^a` as a field over `(φ, E, I)`.
pub fn darboux_field(n: usize) -> CoefficientField {
    CoefficientField::new(2 * n + 1, move |x: &[Jet]| {
        let mut a = vec![Jet::constant(0.0); 2 * n + 1];
        a[0] = Jet::constant(1.0);
        for k in 0..n {
            a[1 + n + k] = -&x[1 + k];
        }
        Ok(a)
    })
}
