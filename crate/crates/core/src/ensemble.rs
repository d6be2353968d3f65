//! Statistical models: microstates with observables, the exponential
//! (Gibbs) distribution `ρ = exp(−φ + I·H)`, its Massieu potential
//! `φ(I) = ln Z(I)` and exact moments.
//!
//! Sign convention: `I` multiplies the observables with a plus sign, so for
//! `H = energy` the conjugate multiplier is `I = −1/T`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Jet, LogSumExp};
use crate::error::{fmt_point, Error, Result};
use crate::linalg::{tri_index, Cholesky, CompensatedSum, SymTensor2};

/// Pivot tolerance used by the affine-independence check.
pub const INDEPENDENCE_TOL: f64 = 1e-10;
pub const MAX_ISING_SPINS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Microstate {
    pub observables: Vec<f64>,
    pub log_degeneracy: f64,
}

impl Microstate {
    pub fn new(observables: Vec<f64>) -> Self {
        Self { observables, log_degeneracy: 0.0 }
    }

    pub fn with_log_degeneracy(observables: Vec<f64>, log_degeneracy: f64) -> Self {
        Self { observables, log_degeneracy }
    }
}

/// A scalar map of the intensive variables built from jet arithmetic.
pub trait Potential: Send + Sync {
    fn eval(&self, intensive: &[Jet]) -> Result<Jet>;
}

impl<F> Potential for F
where
    F: Fn(&[Jet]) -> Result<Jet> + Send + Sync,
{
    fn eval(&self, intensive: &[Jet]) -> Result<Jet> {
        self(intensive)
    }
}

#[derive(Clone)]
enum Microstates {
    Table(Vec<Microstate>),
    /// Periodic chain of `spins` Ising spins with observables
    /// (total energy, total magnetization).
    IsingRing { spins: u32, coupling: f64, field: f64 },
}

#[derive(Clone)]
enum Kind {
    Enumerated(Microstates),
    Analytic {
        potential: Arc<dyn Potential>,
        domain: Option<Vec<(f64, f64)>>,
        /// `(C, b)` when the potential is the quadratic `½IᵀCI + b·I`.
        quadratic: Option<(SymTensor2, Vec<f64>)>,
    },
}

/// A statistical model with `n` observables.
#[derive(Clone)]
pub struct Ensemble {
    label: String,
    names: Vec<String>,
    kind: Kind,
}

impl core::fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Ensemble")
            .field("label", &self.label)
            .field("names", &self.names)
            .field("enumerated", &self.is_enumerated())
            .finish()
    }
}

impl Ensemble {
    /// Two states with observable values `0` and `eps`.
    pub fn two_level(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps == 0.0 {
            return Err(Error::InvalidArgument(format!("two_level needs finite nonzero eps, got {eps}")));
        }
        Self::from_microstates(
            format!("two_level:eps={eps}"),
            vec!["H".into()],
            vec![Microstate::new(vec![0.0]), Microstate::new(vec![eps])],
        )
    }

    /// Ising ring `H = −J Σ sᵢsᵢ₊₁ − h Σ sᵢ` with observables
    /// (energy, magnetization), enumerated over all `2^N` states.
    pub fn ising_ring(spins: u32, coupling: f64, field: f64) -> Result<Self> {
        if !(3..=MAX_ISING_SPINS).contains(&spins) {
            return Err(Error::InvalidArgument(format!(
                "ising_ring needs 3 ≤ N ≤ {MAX_ISING_SPINS}, got {spins}"
            )));
        }
        if !coupling.is_finite() || !field.is_finite() {
            return Err(Error::InvalidArgument("ising_ring couplings must be finite".into()));
        }
        let ens = Self {
            label: format!("ising_ring:N={spins},J={coupling},h={field}"),
            names: vec!["energy".into(), "magnetization".into()],
            kind: Kind::Enumerated(Microstates::IsingRing { spins, coupling, field }),
        };
        ens.check_independence()?;
        Ok(ens)
    }

    pub fn from_microstates(label: String, names: Vec<String>, states: Vec<Microstate>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidArgument("an ensemble needs at least one observable".into()));
        }
        if states.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "an ensemble needs at least 2 microstates, got {}",
                states.len()
            )));
        }
        for (k, s) in states.iter().enumerate() {
            if s.observables.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "microstate {k} has {} observables, expected {n}",
                    s.observables.len()
                )));
            }
            if s.observables.iter().any(|v| !v.is_finite()) || !s.log_degeneracy.is_finite() {
                return Err(Error::InvalidArgument(format!("microstate {k} has a non-finite value")));
            }
        }
        let ens = Self { label, names, kind: Kind::Enumerated(Microstates::Table(states)) };
        ens.check_independence()?;
        Ok(ens)
    }

    /// Analytic model `φ = ½ IᵀCI + b·I` with `C` positive definite.
    pub fn quadratic(c: SymTensor2, b: Vec<f64>) -> Result<Self> {
        let n = c.dim();
        if n == 0 || b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        Cholesky::new(&c, INDEPENDENCE_TOL).map_err(|_| {
            Error::InvalidArgument("quadratic model needs a positive definite C".into())
        })?;
        let (cc, bb) = (c.clone(), b.clone());
        let potential = move |x: &[Jet]| -> Result<Jet> {
            let mut acc = Jet::constant(0.0);
            for i in 0..n {
                let mut row = Jet::constant(0.0);
                for j in 0..n {
                    row = &row + &(&x[j] * cc.get(i, j));
                }
                acc = &acc + &(&(&row * &x[i]) * 0.5);
                acc = &acc + &(&x[i] * bb[i]);
            }
            Ok(acc)
        };
        let names = (1..=n).map(|i| format!("H{i}")).collect();
        Ok(Self {
            label: format!("quadratic:n={n}"),
            names,
            kind: Kind::Analytic { potential: Arc::new(potential), domain: None, quadratic: Some((c, b)) },
        })
    }

    /// Analytic model from a user potential, optionally restricted to a box.
    pub fn analytic(
        label: String,
        names: Vec<String>,
        potential: Arc<dyn Potential>,
        domain: Option<Vec<(f64, f64)>>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("an ensemble needs at least one observable".into()));
        }
        if let Some(d) = &domain {
            if d.len() != names.len() {
                return Err(Error::DimensionMismatch { expected: names.len(), got: d.len() });
            }
        }
        Ok(Self { label, names, kind: Kind::Analytic { potential, domain, quadratic: None } })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn is_enumerated(&self) -> bool {
        matches!(self.kind, Kind::Enumerated(_))
    }

    fn microstates(&self) -> Result<&Microstates> {
        match &self.kind {
            Kind::Enumerated(m) => Ok(m),
            Kind::Analytic { .. } => Err(Error::Unsupported(format!(
                "{} is analytic and has no microstates",
                self.label
            ))),
        }
    }

    pub fn microstate_count(&self) -> Result<usize> {
        Ok(match self.microstates()? {
            Microstates::Table(t) => t.len(),
            Microstates::IsingRing { spins, .. } => 1usize << spins,
        })
    }

    /// Streams `(index, observables, log_degeneracy)` over every microstate.
    pub fn for_each_microstate(&self, mut f: impl FnMut(usize, &[f64], f64)) -> Result<()> {
        match self.microstates()? {
            Microstates::Table(t) => {
                for (k, s) in t.iter().enumerate() {
                    f(k, &s.observables, s.log_degeneracy);
                }
            }
            &Microstates::IsingRing { spins, coupling, field } => {
                let mut obs = [0.0; 2];
                for mask in 0..(1usize << spins) {
                    ising_observables(mask, spins, coupling, field, &mut obs);
                    f(mask, &obs, 0.0);
                }
            }
        }
        Ok(())
    }

    pub fn microstate(&self, index: usize) -> Result<Microstate> {
        let len = self.microstate_count()?;
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        Ok(match self.microstates()? {
            Microstates::Table(t) => t[index].clone(),
            &Microstates::IsingRing { spins, coupling, field } => {
                let mut obs = [0.0; 2];
                ising_observables(index, spins, coupling, field, &mut obs);
                Microstate::new(obs.to_vec())
            }
        })
    }

    /// Componentwise range of the observables, which bounds every
    /// attainable average. `None` for analytic models.
    pub fn observable_bounds(&self) -> Option<Vec<(f64, f64)>> {
        let n = self.n();
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
        self.for_each_microstate(|_, h, _| {
            for (bi, &v) in b.iter_mut().zip(h) {
                bi.0 = bi.0.min(v);
                bi.1 = bi.1.max(v);
            }
        })
        .ok()?;
        Some(b)
    }

    /// The quadratic coefficients `(C, b)` of a quadratic analytic model.
    pub fn quadratic_coefficients(&self) -> Option<(&SymTensor2, &[f64])> {
        match &self.kind {
            Kind::Analytic { quadratic: Some((c, b)), .. } => Some((c, b)),
            _ => None,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.n() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.n(), got: len })
        }
    }

    fn check_independence(&self) -> Result<()> {
        let g = self.covariance_metric(&vec![0.0; self.n()])?;
        let scale = (g.trace() / self.n() as f64).max(1.0);
        Cholesky::new(&g, INDEPENDENCE_TOL * scale).map(|_| ()).map_err(|_| {
            Error::InvalidArgument(format!(
                "observables of {} are affinely dependent across microstates (covariance at I = 0 is singular)",
                self.label
            ))
        })
    }

    /// `φ(I) = ln Σₓ exp(I·H(x) + ln g(x))` carried through jet arithmetic,
    /// so its gradient is `E` and its Hessian the metric.
    pub fn log_partition(&self, intensive: &[Jet]) -> Result<Jet> {
        self.check_len(intensive.len())?;
        match &self.kind {
            Kind::Analytic { potential, domain, .. } => {
                if let Some(d) = domain {
                    for (k, (x, &(lo, hi))) in intensive.iter().zip(d).enumerate() {
                        if !(lo..=hi).contains(&x.value()) {
                            return Err(Error::Domain {
                                func: "log_partition",
                                detail: format!("I[{k}] = {} outside [{lo}, {hi}]", x.value()),
                            });
                        }
                    }
                }
                let phi = potential.eval(intensive)?;
                if !phi.is_finite() {
                    return Err(Error::Domain {
                        func: "log_partition",
                        detail: format!("potential is not finite at {}", fmt_point(&values(intensive))),
                    });
                }
                Ok(phi)
            }
            Kind::Enumerated(_) => {
                let mut acc = LogSumExp::new();
                let mut err = None;
                self.for_each_microstate(|_, h, log_g| {
                    if err.is_some() {
                        return;
                    }
                    let mut a = Jet::constant(log_g);
                    for (x, &hv) in intensive.iter().zip(h) {
                        a = &a + &(x * hv);
                    }
                    if let Err(e) = acc.push(&a) {
                        err = Some(e);
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                acc.finish()
            }
        }
    }

    /// Plain-valued `φ(I)` for enumerated models (no derivative parts).
    pub fn log_partition_value(&self, intensive: &[f64]) -> Result<f64> {
        self.check_len(intensive.len())?;
        if !self.is_enumerated() {
            let x: Vec<Jet> = intensive.iter().map(|&v| Jet::constant(v)).collect();
            return Ok(self.log_partition(&x)?.value());
        }
        let mut max = f64::NEG_INFINITY;
        let mut sum = CompensatedSum::ZERO;
        self.for_each_microstate(|_, h, log_g| {
            let a = exponent(intensive, h, log_g);
            if a > max {
                sum.scale(libm::exp(max - a));
                max = a;
            }
            sum.add(libm::exp(a - max));
        })?;
        if !max.is_finite() {
            return Err(Error::Domain {
                func: "log_partition",
                detail: format!("exponent overflow at {}", fmt_point(intensive)),
            });
        }
        Ok(max + libm::log(sum.value()))
    }

    pub fn gibbs_state(&self, intensive: &[f64]) -> Result<GibbsState<'_>> {
        self.microstates()?;
        if intensive.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite I {}", fmt_point(intensive))));
        }
        let phi = self.log_partition_value(intensive)?;
        let mut probs = Vec::with_capacity(self.microstate_count()?);
        self.for_each_microstate(|_, h, log_g| {
            probs.push(libm::exp(exponent(intensive, h, log_g) - phi));
        })?;
        Ok(GibbsState { ensemble: self, intensive: intensive.to_vec(), phi, probs })
    }

    /// `E_a = ∂φ/∂I^a`.
    pub fn equations_of_state(&self, intensive: &[f64]) -> Result<Vec<f64>> {
        let x = Jet::seed(intensive, 1)?;
        let phi = self.log_partition(&x)?;
        let mut g = phi.grad().to_vec();
        g.resize(self.n(), 0.0);
        Ok(g)
    }

    /// Value, gradient and Hessian of `φ` at `I`.
    pub fn potential_hessian(&self, intensive: &[f64]) -> Result<(f64, Vec<f64>, SymTensor2)> {
        crate::autodiff::hessian(|x| self.log_partition(x), intensive)
    }

    /// Exact averages `Σ ρ(x) H(x)` by direct summation.
    pub fn mean_observables(&self, intensive: &[f64]) -> Result<Vec<f64>> {
        let phi = self.log_partition_value(intensive)?;
        let mut mean = vec![CompensatedSum::ZERO; self.n()];
        self.for_each_microstate(|_, h, log_g| {
            let p = libm::exp(exponent(intensive, h, log_g) - phi);
            for (m, &v) in mean.iter_mut().zip(h) {
                m.add(p * v);
            }
        })?;
        Ok(mean.iter().map(CompensatedSum::value).collect())
    }

    /// Covariance of the observables under the Gibbs distribution,
    /// by centered summation over microstates.
    pub fn covariance_metric(&self, intensive: &[f64]) -> Result<SymTensor2> {
        self.microstates()?;
        self.check_len(intensive.len())?;
        let n = self.n();
        let phi = self.log_partition_value(intensive)?;
        let mean = self.mean_observables(intensive)?;
        let mut g = vec![CompensatedSum::ZERO; n * (n + 1) / 2];
        let mut d = vec![0.0; n];
        self.for_each_microstate(|_, h, log_g| {
            let p = libm::exp(exponent(intensive, h, log_g) - phi);
            for (di, (&hv, &m)) in d.iter_mut().zip(h.iter().zip(&mean)) {
                *di = hv - m;
            }
            for a in 0..n {
                for b in 0..=a {
                    g[tri_index(a, b)].add(p * d[a] * d[b]);
                }
            }
        })?;
        Ok(SymTensor2::from_fn(n, |a, b| g[tri_index(a, b)].value()))
    }

    /// Monte-Carlo estimate of the covariance from `samples` i.i.d. draws,
    /// with jackknife standard errors. Deterministic in `seed`.
    pub fn mc_covariance(&self, intensive: &[f64], samples: usize, seed: u64) -> Result<McEstimate> {
        if samples < 2 {
            return Err(Error::InvalidArgument(format!("mc_covariance needs at least 2 samples, got {samples}")));
        }
        let state = self.gibbs_state(intensive)?;
        let mut cdf = Vec::with_capacity(state.probs.len());
        let mut acc = 0.0;
        for p in &state.probs {
            acc += p;
            cdf.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = cdf.len() - 1;
        let draws: Vec<usize> = (0..samples)
            .map(|_| {
                let u = rng.gen::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect();

        let n = self.n();
        let obs = |k: usize| -> Result<Vec<f64>> { Ok(self.microstate(k)?.observables) };
        let nf = samples as f64;
        let mut mean = vec![0.0; n];
        for &k in &draws {
            for (m, v) in mean.iter_mut().zip(obs(k)?) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nf);

        let mut t = SymTensor2::zeros(n);
        let mut y = vec![0.0; n];
        let center = |k: usize, y: &mut [f64]| -> Result<()> {
            for ((yi, v), m) in y.iter_mut().zip(obs(k)?).zip(&mean) {
                *yi = v - m;
            }
            Ok(())
        };
        for &k in &draws {
            center(k, &mut y)?;
            for a in 0..n {
                for b in 0..=a {
                    t.add_to(a, b, y[a] * y[b]);
                }
            }
        }
        let covariance = SymTensor2::from_fn(n, |a, b| t.get(a, b) / (nf - 1.0));

        // leave-one-out covariances deviate from the full estimate by
        // (T − N yᵢyᵢᵀ) / ((N−1)(N−2))
        let std_error = if samples < 3 {
            SymTensor2::from_fn(n, |_, _| f64::INFINITY)
        } else {
            let denom = (nf - 1.0) * (nf - 2.0);
            let mut ss = SymTensor2::zeros(n);
            for &k in &draws {
                center(k, &mut y)?;
                for a in 0..n {
                    for b in 0..=a {
                        let d = (t.get(a, b) - nf * y[a] * y[b]) / denom;
                        ss.add_to(a, b, d * d);
                    }
                }
            }
            SymTensor2::from_fn(n, |a, b| libm::sqrt((nf - 1.0) / nf * ss.get(a, b)))
        };
        Ok(McEstimate { covariance, std_error, samples, seed })
    }
}

fn values(x: &[Jet]) -> Vec<f64> {
    x.iter().map(Jet::value).collect()
}

#[inline]
fn exponent(intensive: &[f64], h: &[f64], log_g: f64) -> f64 {
    intensive.iter().zip(h).fold(log_g, |a, (i, hv)| a + i * hv)
}

fn ising_observables(mask: usize, spins: u32, coupling: f64, field: f64, out: &mut [f64; 2]) {
    let n = spins as usize;
    let spin = |i: usize| if (mask >> (i % n)) & 1 == 1 { 1.0 } else { -1.0 };
    let mut bonds = 0.0;
    let mut mag = 0.0;
    for i in 0..n {
        bonds += spin(i) * spin(i + 1);
        mag += spin(i);
    }
    out[0] = -coupling * bonds - field * mag;
    out[1] = mag;
}

/// The exponential distribution at fixed `I`.
#[derive(Debug, Clone)]
pub struct GibbsState<'a> {
    ensemble: &'a Ensemble,
    intensive: Vec<f64>,
    phi: f64,
    probs: Vec<f64>,
}

impl GibbsState<'_> {
    pub fn intensive(&self) -> &[f64] {
        &self.intensive
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `Σ ρ(x) H(x)`
    pub fn averages(&self) -> Result<Vec<f64>> {
        let mut mean = vec![CompensatedSum::ZERO; self.ensemble.n()];
        self.ensemble.for_each_microstate(|k, h, _| {
            for (m, &v) in mean.iter_mut().zip(h) {
                m.add(self.probs[k] * v);
            }
        })?;
        Ok(mean.iter().map(CompensatedSum::value).collect())
    }

    /// `s(x) = φ − I·H(x)`
    pub fn microscopic_entropy(&self, index: usize) -> Result<f64> {
        let m = self.ensemble.microstate(index)?;
        Ok(self.intensive.iter().zip(&m.observables).fold(self.phi, |s, (i, h)| s - i * h))
    }

    /// `S = −Σ ρ ln(ρ / g)`, with `0 ln 0 = 0`.
    pub fn shannon_entropy(&self) -> Result<f64> {
        let mut s = 0.0;
        self.ensemble.for_each_microstate(|k, _, log_g| {
            let p = self.probs[k];
            if p > 0.0 {
                s -= p * (libm::log(p) - log_g);
            }
        })?;
        Ok(s)
    }
}

/// Sample covariance and its jackknife standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub covariance: SymTensor2,
    pub std_error: SymTensor2,
    pub samples: usize,
    pub seed: u64,
}

impl core::fmt::Display for Ensemble {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.label)
    }
}

impl Ensemble {
    pub fn describe(&self) -> String {
        let kind = if self.is_enumerated() { "enumerated" } else { "analytic" };
        format!("{} ({kind}, n = {}, observables: {})", self.label, self.n(), self.names.join(", "))
    }
}

#[allow(dead_code)]
fn assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<Ensemble>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    fn two() -> Ensemble {
        Ensemble::two_level(2.0).unwrap()
    }

    #[test]
    fn log_partition_examples() {
        let phi = two().log_partition(&Jet::seed(&[0.0], 2).unwrap()).unwrap();
        assert!((phi.value() - LN_2).abs() < 1e-15);
        let ising = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
        let phi = ising.log_partition(&Jet::seed(&[0.0, 0.0], 2).unwrap()).unwrap();
        assert!((phi.value() - libm::log(16.0)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_ensembles_rejected() {
        let r = Ensemble::from_microstates(
            "dup".into(),
            vec!["H".into()],
            vec![Microstate::new(vec![1.0]), Microstate::new(vec![1.0])],
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
        let r = Ensemble::from_microstates(
            "const2".into(),
            vec!["H1".into(), "H2".into()],
            vec![
                Microstate::new(vec![0.0, 3.0]),
                Microstate::new(vec![1.0, 3.0]),
                Microstate::new(vec![2.0, 3.0]),
            ],
        );
        assert!(r.is_err());
        let r = Ensemble::from_microstates("one".into(), vec!["H".into()], vec![Microstate::new(vec![1.0])]);
        assert!(r.is_err());
        assert!(Ensemble::ising_ring(21, 1.0, 0.0).is_err());
    }

    #[test]
    fn gibbs_examples() {
        let e = two();
        let s = e.gibbs_state(&[0.0]).unwrap();
        assert_eq!(s.probs(), &[0.5, 0.5]);
        let s = e.gibbs_state(&[20.0]).unwrap();
        let low = libm::exp(-40.0) / (1.0 + libm::exp(-40.0));
        assert!((s.probs()[0] - low).abs() <= 1e-12 * low);
        assert!((s.probs()[1] - (1.0 - low)).abs() < 1e-16);
        let ising = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
        let s = ising.gibbs_state(&[0.0, 0.0]).unwrap();
        assert!(s.probs().iter().all(|p| (p - 1.0 / 16.0).abs() < 1e-16));
        let q = Ensemble::quadratic(SymTensor2::from_fn(1, |_, _| 1.0), vec![0.0]).unwrap();
        assert!(matches!(q.gibbs_state(&[0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn equations_of_state_examples() {
        assert!((two().equations_of_state(&[0.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        let c = SymTensor2::from_fn(2, |i, j| if i == j { 2.0 } else { 1.0 });
        let q = Ensemble::quadratic(c, vec![0.0, 0.0]).unwrap();
        assert_eq!(q.equations_of_state(&[1.0, 0.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn covariance_two_level() {
        let g = two().covariance_metric(&[0.0]).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn microscopic_entropy_examples() {
        let e = two();
        let s = e.gibbs_state(&[0.0]).unwrap();
        assert!((s.microscopic_entropy(0).unwrap() - LN_2).abs() < 1e-15);
        assert!((s.microscopic_entropy(1).unwrap() - LN_2).abs() < 1e-15);
        assert!(matches!(s.microscopic_entropy(2), Err(Error::IndexOutOfRange { .. })));

        let s = e.gibbs_state(&[1.0]).unwrap();
        let phi = libm::log(1.0 + libm::exp(2.0));
        assert!((s.microscopic_entropy(1).unwrap() - (phi - 2.0)).abs() < 1e-12);
        let avg: f64 = (0..2).map(|k| s.probs()[k] * s.microscopic_entropy(k).unwrap()).sum();
        assert!((avg - s.shannon_entropy().unwrap()).abs() < 1e-12);
        // s = −ln ρ
        for k in 0..2 {
            assert!((s.microscopic_entropy(k).unwrap() + libm::log(s.probs()[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn shannon_examples() {
        assert!((two().gibbs_state(&[0.0]).unwrap().shannon_entropy().unwrap() - LN_2).abs() < 1e-15);
        let ising = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
        let st = ising.gibbs_state(&[0.0, 0.0]).unwrap();
        assert!((st.shannon_entropy().unwrap() - libm::log(16.0)).abs() < 1e-14);
    }

    #[test]
    fn degeneracy_weights_enter_entropy() {
        let e = Ensemble::from_microstates(
            "deg".into(),
            vec!["H".into()],
            vec![Microstate::with_log_degeneracy(vec![0.0], libm::log(3.0)), Microstate::new(vec![1.0])],
        )
        .unwrap();
        let st = e.gibbs_state(&[0.0]).unwrap();
        assert!((st.probs()[0] - 0.75).abs() < 1e-15);
        assert!((st.phi() - libm::log(4.0)).abs() < 1e-15);
        // S = φ − I·E holds with the base measure
        let s = st.shannon_entropy().unwrap();
        assert!((s - libm::log(4.0)).abs() < 1e-14);
        for k in 0..2 {
            let m = e.microstate(k).unwrap();
            let lhs = st.microscopic_entropy(k).unwrap();
            assert!((lhs - (-libm::log(st.probs()[k]) + m.log_degeneracy)).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_errors_and_determinism() {
        let e = two();
        assert!(matches!(e.mc_covariance(&[0.0], 1, 1), Err(Error::InvalidArgument(_))));
        let a = e.mc_covariance(&[0.3], 5000, 9).unwrap();
        let b = e.mc_covariance(&[0.3], 5000, 9).unwrap();
        assert_eq!(a, b);
        let c = e.mc_covariance(&[0.3], 5000, 10).unwrap();
        assert_ne!(a.covariance, c.covariance);
    }
}
