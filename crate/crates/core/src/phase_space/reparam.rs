//! Invertible changes of the intensive and extensive variables.
//!
//! Each side of a [`Reparametrization`] is a [`ComponentMap`]: a diagonal
//! layer of monotone scalar maps followed by an optional invertible linear
//! mix. Inverses are exact for the diagonal kinds that have closed forms
//! and bracketed Newton otherwise; inverse jets follow from the inverse
//! function theorem.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::Jet;
use crate::error::{fmt_point, Error, Result};
use crate::linalg::{Lu, Matrix};

/// `|det| ≤ SINGULAR_DET` is treated as a singular Jacobian.
pub const SINGULAR_DET: f64 = 1e-10;

/// A user-supplied invertible scalar map.
pub trait InvertibleScalar: Send + Sync {
    fn name(&self) -> &str;
    fn apply(&self, x: &Jet) -> Result<Jet>;
    fn inverse_value(&self, y: f64) -> Result<f64>;
}

/// Shipped monotone scalar maps.
#[derive(Clone)]
pub enum ScalarMap {
    /// `a x + b`, `a ≠ 0`
    Affine { a: f64, b: f64 },
    /// `exp(a x) + b`, `a ≠ 0`
    Exp { a: f64, b: f64 },
    /// `ln(a x + b)` on `a x + b > 0`
    Ln { a: f64, b: f64 },
    /// `c tanh(a x) + d x` with `d > 0` and `c a + d > 0`
    TanhAffine { a: f64, c: f64, d: f64 },
    /// `x^p + eps x` with odd `p` and `eps ≥ 0`
    OddPower { p: u32, eps: f64 },
    Custom(Arc<dyn InvertibleScalar>),
}

impl core::fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Affine { a, b } => write!(f, "affine(a={a}, b={b})"),
            Self::Exp { a, b } => write!(f, "exp(a={a}, b={b})"),
            Self::Ln { a, b } => write!(f, "ln(a={a}, b={b})"),
            Self::TanhAffine { a, c, d } => write!(f, "tanh_affine(a={a}, c={c}, d={d})"),
            Self::OddPower { p, eps } => write!(f, "odd_power(p={p}, eps={eps})"),
            Self::Custom(m) => write!(f, "custom({})", m.name()),
        }
    }
}

impl ScalarMap {
    pub fn identity() -> Self {
        Self::Affine { a: 1.0, b: 0.0 }
    }

    pub fn kind(&self) -> &str {
        match self {
            Self::Affine { .. } => "affine",
            Self::Exp { .. } => "exp",
            Self::Ln { .. } => "ln",
            Self::TanhAffine { .. } => "tanh_affine",
            Self::OddPower { .. } => "odd_power",
            Self::Custom(m) => m.name(),
        }
    }

    /// Rejects parameters for which the map is not globally monotone.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match *self {
            Self::Affine { a, b } | Self::Exp { a, b } | Self::Ln { a, b } => {
                if !(a.is_finite() && b.is_finite()) || a == 0.0 {
                    return bad(format!("{}: need finite a ≠ 0 and finite b", self.kind()));
                }
            }
            Self::TanhAffine { a, c, d } => {
                if !(a.is_finite() && c.is_finite() && d.is_finite()) || !(d > 0.0) || !(c * a + d > 0.0) {
                    return bad("tanh_affine: need d > 0 and c·a + d > 0".into());
                }
            }
            Self::OddPower { p, eps } => {
                if p % 2 == 0 || !(eps >= 0.0) || !eps.is_finite() {
                    return bad(format!("odd_power: need odd p and eps ≥ 0, got p={p}, eps={eps}"));
                }
            }
            Self::Custom(_) => {}
        }
        Ok(())
    }

    /// Affine maps have vanishing second derivative.
    pub fn is_affine(&self) -> bool {
        matches!(self, Self::Affine { .. }) || matches!(self, Self::OddPower { p: 1, .. })
    }

    pub fn apply(&self, x: &Jet) -> Result<Jet> {
        match *self {
            Self::Affine { a, b } => Ok(&(x * a) + b),
            Self::Exp { a, b } => Ok(&(x * a).exp() + b),
            Self::Ln { a, b } => (&(x * a) + b).ln(),
            Self::TanhAffine { a, c, d } => Ok(&((x * a).tanh() * c) + &(x * d)),
            Self::OddPower { p, eps } => Ok(&x.powi(p as i32)? + &(x * eps)),
            Self::Custom(ref m) => m.apply(x),
        }
    }

    pub fn apply_value(&self, x: f64) -> Result<f64> {
        Ok(self.apply(&Jet::constant(x))?.value())
    }

    pub fn inverse_value(&self, y: f64) -> Result<f64> {
        let domain = |detail: String| Error::Domain { func: "reparametrization inverse", detail };
        match *self {
            Self::Affine { a, b } => Ok((y - b) / a),
            Self::Exp { a, b } => {
                if !(y - b > 0.0) {
                    return Err(domain(format!("exp map has no preimage for {y} (offset {b})")));
                }
                Ok(libm::log(y - b) / a)
            }
            Self::Ln { a, b } => Ok((libm::exp(y) - b) / a),
            Self::TanhAffine { c, d, .. } => {
                let (lo, hi) = ((y - c.abs()) / d, (y + c.abs()) / d);
                self.solve_monotone(y, lo, hi)
            }
            Self::OddPower { .. } => {
                let r = y.abs().max(1.0);
                self.solve_monotone(y, -r, r)
            }
            Self::Custom(ref m) => m.inverse_value(y),
        }
    }

    /// Safeguarded Newton on an increasing map bracketed by `[lo, hi]`.
    fn solve_monotone(&self, y: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let j = self.apply(&Jet::variable(x, 0, 1, 1))?;
            let r = j.value() - y;
            if r == 0.0 {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = j.grad()[0];
            let newton = x - r / slope;
            let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if next == x || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }

    /// Jet of the inverse map applied to `y`.
    pub fn inverse(&self, y: &Jet) -> Result<Jet> {
        match *self {
            Self::Affine { a, b } => return Ok(&(y + (-b)) * (1.0 / a)),
            Self::Exp { a, b } => return Ok((y + (-b)).ln()? * (1.0 / a)),
            Self::Ln { a, b } => return Ok(&(y.exp() + (-b)) * (1.0 / a)),
            _ => {}
        }
        let x0 = self.inverse_value(y.value())?;
        let f = self.apply(&Jet::variable(x0, 0, 1, 3))?;
        let (f1, f2, f3) = (f.grad()[0], f.hess(0, 0), f.third(0, 0, 0));
        if f1 == 0.0 {
            return Err(Error::Singular {
                what: "scalar reparametrization",
                at: format!("{x0}"),
                det: 0.0,
            });
        }
        let g1 = 1.0 / f1;
        let g2 = -f2 * g1 * g1 * g1;
        let g3 = (3.0 * f2 * f2 - f1 * f3) * g1 * g1 * g1 * g1 * g1;
        Ok(y.compose([x0, g1, g2, g3]))
    }
}

/// `x ↦ M·(f₁(x₁), …, fₙ(xₙ))` with an optional invertible mix `M`.
#[derive(Clone, Debug)]
pub struct ComponentMap {
    maps: Vec<ScalarMap>,
    mix: Option<(Matrix, Matrix)>,
}

impl ComponentMap {
    pub fn identity(n: usize) -> Self {
        Self { maps: vec![ScalarMap::identity(); n], mix: None }
    }

    pub fn diagonal(maps: Vec<ScalarMap>) -> Result<Self> {
        for m in &maps {
            m.validate()?;
        }
        Ok(Self { maps, mix: None })
    }

    pub fn mixed(maps: Vec<ScalarMap>, mix: Matrix) -> Result<Self> {
        let n = maps.len();
        if mix.rows() != n || mix.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mix.rows() });
        }
        let lu = Lu::new(&mix)?;
        let det = lu.determinant();
        if det.abs() <= SINGULAR_DET {
            return Err(Error::Singular { what: "mixing matrix", at: String::new(), det });
        }
        let inv = lu.inverse()?;
        let mut m = Self::diagonal(maps)?;
        m.mix = Some((mix, inv));
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[ScalarMap] {
        &self.maps
    }

    pub fn mix(&self) -> Option<&Matrix> {
        self.mix.as_ref().map(|(m, _)| m)
    }

    pub fn is_identity(&self) -> bool {
        self.mix.is_none()
            && self.maps.iter().all(|m| matches!(m, ScalarMap::Affine { a, b } if *a == 1.0 && *b == 0.0))
    }

    /// Component `ã` depends only on input `ã`.
    pub fn is_diagonal(&self) -> bool {
        match &self.mix {
            None => true,
            Some((m, _)) => (0..m.rows()).all(|i| (0..m.cols()).all(|j| i == j || m[(i, j)] == 0.0)),
        }
    }

    /// Every component is affine in the inputs.
    pub fn is_affine(&self) -> bool {
        self.maps.iter().all(ScalarMap::is_affine)
    }

    fn mix_jets(m: &Matrix, x: &[Jet]) -> Vec<Jet> {
        (0..m.rows())
            .map(|i| {
                x.iter().enumerate().fold(Jet::constant(0.0), |acc, (j, xj)| {
                    let c = m[(i, j)];
                    if c == 0.0 {
                        acc
                    } else {
                        &acc + &(xj * c)
                    }
                })
            })
            .collect()
    }

    pub fn apply(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        let f: Vec<Jet> = self.maps.iter().zip(x).map(|(m, xi)| m.apply(xi)).collect::<Result<_>>()?;
        Ok(match &self.mix {
            Some((m, _)) => Self::mix_jets(m, &f),
            None => f,
        })
    }

    pub fn apply_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let j: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
        Ok(self.apply(&j)?.iter().map(Jet::value).collect())
    }

    pub fn inverse(&self, y: &[Jet]) -> Result<Vec<Jet>> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: y.len() });
        }
        let z = match &self.mix {
            Some((_, inv)) => Self::mix_jets(inv, y),
            None => y.to_vec(),
        };
        self.maps.iter().zip(&z).map(|(m, zi)| m.inverse(zi)).collect()
    }

    pub fn inverse_values(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: y.len() });
        }
        let z = match &self.mix {
            Some((_, inv)) => inv.matvec(y)?,
            None => y.to_vec(),
        };
        self.maps.iter().zip(&z).map(|(m, &zi)| m.inverse_value(zi)).collect()
    }

    /// `J[ã][a] = ∂ỹ^ã/∂x^a`, failing when `|det J| ≤ 1e-10`.
    pub fn jacobian(&self, x: &[f64], what: &'static str) -> Result<Matrix> {
        let seeded = Jet::seed(x, 1)?;
        let y = self.apply(&seeded)?;
        let n = self.n();
        let j = Matrix::from_fn(n, n, |r, c| if y[r].nvars() == 0 { 0.0 } else { y[r].grad()[c] });
        let det = Lu::new(&j)?.determinant();
        if !(det.abs() > SINGULAR_DET) {
            return Err(Error::Singular { what, at: fmt_point(x), det });
        }
        Ok(j)
    }
}

/// A pair of invertible maps `Ĩ(I)`, `Ẽ(E)`; on the phase space it acts as
/// `(φ, E, I) ↦ (φ, Ẽ(E), Ĩ(I))`.
#[derive(Clone, Debug)]
pub struct Reparametrization {
    intensive: ComponentMap,
    extensive: ComponentMap,
}

impl Reparametrization {
    pub fn identity(n: usize) -> Self {
        Self { intensive: ComponentMap::identity(n), extensive: ComponentMap::identity(n) }
    }

    pub fn new(intensive: ComponentMap, extensive: ComponentMap) -> Result<Self> {
        if intensive.n() != extensive.n() {
            return Err(Error::DimensionMismatch { expected: intensive.n(), got: extensive.n() });
        }
        Ok(Self { intensive, extensive })
    }

    pub fn n(&self) -> usize {
        self.intensive.n()
    }

    pub fn intensive_map(&self) -> &ComponentMap {
        &self.intensive
    }

    pub fn extensive_map(&self) -> &ComponentMap {
        &self.extensive
    }

    pub fn is_identity(&self) -> bool {
        self.intensive.is_identity() && self.extensive.is_identity()
    }

    pub fn is_diagonal(&self) -> bool {
        self.intensive.is_diagonal() && self.extensive.is_diagonal()
    }

    /// `Λ^ã_a = ∂Ĩ^ã/∂I^a`
    pub fn intensive_jacobian(&self, intensive: &[f64]) -> Result<Matrix> {
        self.intensive.jacobian(intensive, "intensive Jacobian")
    }

    /// `∂Ẽ_ã/∂E_b`
    pub fn extensive_jacobian(&self, extensive: &[f64]) -> Result<Matrix> {
        self.extensive.jacobian(extensive, "extensive Jacobian")
    }

    /// Largest `|I − Ĩ⁻¹(Ĩ(I))|` and the same for `E`.
    pub fn round_trip_error(&self, intensive: &[f64], extensive: &[f64]) -> Result<f64> {
        let i2 = self.intensive.inverse_values(&self.intensive.apply_values(intensive)?)?;
        let e2 = self.extensive.inverse_values(&self.extensive.apply_values(extensive)?)?;
        Ok(intensive
            .iter()
            .zip(&i2)
            .chain(extensive.iter().zip(&e2))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Sampling ranges for [`random_reparametrization`].
#[derive(Debug, Clone)]
pub struct RandomRepOptions {
    /// Allow a non-diagonal mix on each side with this probability.
    pub mix_probability: f64,
    /// Restrict the intensive side to affine maps (with mixes).
    pub affine_intensive_only: bool,
}

impl Default for RandomRepOptions {
    fn default() -> Self {
        Self { mix_probability: 0.5, affine_intensive_only: false }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Intensive { affine_only: bool },
    Extensive,
}

fn random_scalar<R: Rng + ?Sized>(rng: &mut R, range: Option<(f64, f64)>, side: Side) -> ScalarMap {
    let signed = |rng: &mut R, lo: f64, hi: f64| {
        let v = rng.gen_range(lo..hi);
        if rng.gen::<bool>() {
            v
        } else {
            -v
        }
    };
    // 0 affine, 1 exp, 2 tanh_affine, 3 odd_power, 4 ln. The extensive
    // map is inverted at ∂φ/∂Ĩ, which can be anywhere on the real line:
    // exp is not onto and the exponential inverse of ln loses precision
    // far from the range it was drawn for. ln needs a known range.
    let kinds: Vec<u8> = match side {
        Side::Intensive { affine_only: true } => vec![0],
        Side::Intensive { .. } if range.is_some() => vec![0, 1, 2, 3, 4],
        Side::Intensive { .. } => vec![0, 1, 2, 3],
        Side::Extensive => vec![0, 2, 3],
    };
    match kinds[rng.gen_range(0..kinds.len())] {
        0 => ScalarMap::Affine { a: signed(rng, 0.5, 2.0), b: rng.gen_range(-1.0..1.0) },
        1 => {
            // keep exp(a x) moderate over the range
            let span = range.map_or(1.0, |(lo, hi)| lo.abs().max(hi.abs()).max(1.0));
            let a = signed(rng, 0.3, 1.0) / span;
            ScalarMap::Exp { a, b: rng.gen_range(-1.0..1.0) }
        }
        2 => ScalarMap::TanhAffine {
            a: rng.gen_range(0.5..2.0),
            c: rng.gen_range(0.2..1.5),
            d: rng.gen_range(0.3..1.0),
        },
        3 => ScalarMap::OddPower { p: 3, eps: rng.gen_range(0.3..1.0) },
        _ => {
            let (lo, hi) = range.unwrap_or((-1.0, 1.0));
            let span = lo.abs().max(hi.abs()).max(1.0);
            let a = signed(rng, 0.5, 1.5) / span;
            // a x + b ≥ margin on [lo, hi]
            let worst = (a * lo).min(a * hi);
            let b = -worst + rng.gen_range(0.5..1.5);
            ScalarMap::Ln { a, b }
        }
    }
}

fn random_mix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    loop {
        let m = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                rng.gen_range(0.8..1.5)
            } else {
                rng.gen_range(-0.5..0.5)
            }
        });
        if let Ok(d) = crate::linalg::determinant(&m) {
            if d.abs() >= 0.2 {
                return m;
            }
        }
    }
}

fn random_side<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    ranges: Option<&[(f64, f64)]>,
    side: Side,
    mix_probability: f64,
) -> ComponentMap {
    let maps: Vec<ScalarMap> = (0..n).map(|k| random_scalar(rng, ranges.map(|r| r[k]), side)).collect();
    if n > 1 && rng.gen::<f64>() < mix_probability {
        let mix = random_mix(rng, n);
        ComponentMap::mixed(maps, mix).expect("random mixes are well conditioned")
    } else {
        ComponentMap::diagonal(maps).expect("random maps satisfy their constraints")
    }
}

/// Draws a reparametrization from the shipped map library.
///
/// `intensive_range` and `extensive_range` bound the coordinates the map
/// will be evaluated on; `ln` maps are only drawn where a range is known.
/// Extensive maps are drawn from the kinds that are onto the real line
/// with well-conditioned inverses (affine, tanh_affine, odd_power).
pub fn random_reparametrization<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    intensive_range: &[(f64, f64)],
    extensive_range: Option<&[(f64, f64)]>,
    options: &RandomRepOptions,
) -> Reparametrization {
    let i = random_side(
        rng,
        n,
        Some(intensive_range),
        Side::Intensive { affine_only: options.affine_intensive_only },
        options.mix_probability,
    );
    let e = random_side(rng, n, extensive_range, Side::Extensive, options.mix_probability);
    Reparametrization::new(i, e).expect("sides share n")
}
