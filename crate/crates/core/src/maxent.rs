//! Maximum-entropy multipliers: solve `∂φ/∂I = E*` by Newton's method on
//! the convex dual `D(I) = φ(I) − I·E*`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ensemble::Ensemble;
use crate::error::{fmt_point, Error, Result};
use crate::linalg::{symmetric_eigenvalues, Cholesky, SymTensor2};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Multipliers beyond this magnitude mean the dual is unbounded below.
pub const DIVERGENCE_BOUND: f64 = 1e3;
/// Curvature below this fraction of the squared observable range means the
/// iterate has run off to the boundary of the hull.
const DEGENERACY: f64 = 1e-13;
const ARMIJO: f64 = 1e-4;
const BOUNDARY_MARGIN: f64 = 100.0;
/// Predicted dual decrease below this relative size is lost in rounding.
const FLAT_DUAL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct MaxEntProblem<'a> {
    ensemble: &'a Ensemble,
    targets: Vec<f64>,
    initial: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntSolution {
    pub intensive: Vec<f64>,
    pub phi: f64,
    /// `S* = φ* − I*·E*`
    pub entropy: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `D(I_k)` at every accepted iterate, starting with the initial guess.
    /// Non-increasing up to the rounding of `D` itself.
    pub dual_history: Vec<f64>,
}

impl<'a> MaxEntProblem<'a> {
    pub fn new(ensemble: &'a Ensemble, targets: &[f64]) -> Result<Self> {
        let n = ensemble.n();
        if targets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: targets.len() });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite target {}", fmt_point(targets))));
        }
        Ok(Self { ensemble, targets: targets.to_vec(), initial: vec![0.0; n], tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER })
    }

    pub fn with_initial(mut self, initial: &[f64]) -> Result<Self> {
        if initial.len() != self.targets.len() {
            return Err(Error::DimensionMismatch { expected: self.targets.len(), got: initial.len() });
        }
        self.initial = initial.to_vec();
        Ok(self)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn dual(&self, phi: f64, intensive: &[f64]) -> f64 {
        phi - dot(intensive, &self.targets)
    }

    /// Scale against which a vanishing curvature is judged.
    fn curvature_scale(&self, hess: &SymTensor2) -> f64 {
        match self.ensemble.observable_bounds() {
            Some(b) if self.ensemble.is_enumerated() => {
                b.iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).fold(0.0, f64::max)
            }
            _ => hess.trace() / hess.dim() as f64,
        }
    }

    fn infeasible(&self, why: &str) -> Error {
        Error::InfeasibleTarget(format!(
            "targets {} are not attainable by {} ({why})",
            fmt_point(&self.targets),
            self.ensemble.label()
        ))
    }

    pub fn solve(&self) -> Result<MaxEntSolution> {
        let n = self.targets.len();
        let mut x = self.initial.clone();
        let mut history = Vec::new();
        let mut residual = f64::INFINITY;
        for iter in 0..=self.max_iter {
            let (phi, grad, hess) = self.ensemble.potential_hessian(&x)?;
            let d = self.dual(phi, &x);
            if history.is_empty() {
                history.push(d);
            }
            let f: Vec<f64> = grad.iter().zip(&self.targets).map(|(g, t)| g - t).collect();
            residual = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let min_curv = symmetric_eigenvalues(&hess).first().copied().unwrap_or(0.0);
            if !(min_curv > DEGENERACY * self.curvature_scale(&hess)) {
                return Err(self.infeasible("the distribution has collapsed onto the boundary of the hull"));
            }
            if residual <= self.tol {
                // A target within ~tol of the hull boundary is reached only
                // by a distribution with vanishing spread there; its
                // multipliers are not determined.
                if min_curv <= BOUNDARY_MARGIN * self.tol * libm::sqrt(self.curvature_scale(&hess)) {
                    return Err(self.infeasible("the target lies on the boundary of the hull"));
                }
                return Ok(MaxEntSolution {
                    entropy: d,
                    phi,
                    intensive: x,
                    iterations: iter,
                    residual,
                    dual_history: history,
                });
            }
            if x.iter().any(|v| v.abs() > DIVERGENCE_BOUND) {
                return Err(self.infeasible("multipliers diverge"));
            }
            if iter == self.max_iter {
                break;
            }
            let chol = match Cholesky::new(&hess, 0.0) {
                Ok(c) => c,
                Err(_) => {
                    let mut damped = hess.clone();
                    let lambda = 1e-8 * hess.trace() / n as f64;
                    for a in 0..n {
                        damped.add_to(a, a, lambda);
                    }
                    Cholesky::new(&damped, 0.0).map_err(|_| self.infeasible("curvature is degenerate"))?
                }
            };
            let step: Vec<f64> = chol.solve(&f).iter().map(|v| -v).collect();
            let slope = dot(&f, &step);
            let flat = -slope <= FLAT_DUAL * d.abs().max(1.0);
            let mut accepted = None;
            if flat {
                // D is flat to rounding along the step, so the residual
                // serves as the merit function
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + s).collect();
                let e = self.ensemble.equations_of_state(&trial)?;
                let r = e.iter().zip(&self.targets).fold(0.0f64, |m, (g, t)| m.max((g - t).abs()));
                if r < residual {
                    let dt = self.dual(self.ensemble.log_partition_value(&trial)?, &trial);
                    accepted = Some((trial, dt));
                }
            } else {
                let mut t = 1.0;
                for _ in 0..60 {
                    let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                    if let Ok(phi_t) = self.ensemble.log_partition_value(&trial) {
                        let dt = self.dual(phi_t, &trial);
                        if dt <= d + ARMIJO * t * slope {
                            accepted = Some((trial, dt));
                            break;
                        }
                    }
                    t *= 0.5;
                }
            }
            match accepted {
                Some((trial, dt)) => {
                    x = trial;
                    history.push(dt);
                }
                None => return Err(Error::NonConvergence { iterations: iter, residual }),
            }
        }
        Err(Error::NonConvergence { iterations: self.max_iter, residual })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shorthand for `MaxEntProblem::new(ensemble, targets)?.solve()`.
pub fn solve(ensemble: &Ensemble, targets: &[f64]) -> Result<MaxEntSolution> {
    MaxEntProblem::new(ensemble, targets)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_target_gives_uniform() {
        let tl = Ensemble::two_level(2.0).unwrap();
        let s = solve(&tl, &[1.0]).unwrap();
        assert!(s.intensive[0].abs() < 1e-12);
        assert!((s.entropy - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn boundary_target_is_infeasible() {
        let tl = Ensemble::two_level(2.0).unwrap();
        assert!(matches!(solve(&tl, &[2.0]), Err(Error::InfeasibleTarget(_))));
        assert!(matches!(solve(&tl, &[-0.5]), Err(Error::InfeasibleTarget(_))));
    }

    #[test]
    fn ising_round_trip() {
        let ens = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
        let i0 = [-0.5, 0.3];
        let e = ens.equations_of_state(&i0).unwrap();
        let s = solve(&ens, &e).unwrap();
        for (a, b) in s.intensive.iter().zip(&i0) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(s.dual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let ens = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
        let e = ens.equations_of_state(&[-0.5, 0.3]).unwrap();
        let err = MaxEntProblem::new(&ens, &e).unwrap().with_max_iter(1).solve().unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 1, .. }));
    }
}
