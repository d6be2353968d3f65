//! Contact-geometric thermodynamics of exponential families.
//!
//! The crate goes from maximum-entropy exponential distributions to the
//! contact and metric structures of the `(2n+1)`-dimensional thermodynamic
//! phase space with coordinates `(φ, E₁..Eₙ, I¹..Iⁿ)`:
//!
//! - [`autodiff`]: truncated Taylor jets giving exact gradients/Hessians.
//! - [`ensemble`]: models, Massieu potential `φ = ln Z`, moments, sampling.
//! - [`exterior`]: pointwise k-forms, wedge products, exterior derivatives.
//! - [`phase_space`]: contact forms, metrics, reparametrizations,
//!   embeddings, pullbacks, Legendre maps and curvature.
//! - [`maxent`]: the dual Newton solver recovering `I` from targets `E`.
//!
//! Everything here is `no_std` + `alloc`; IO lives in the companion crate.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod ensemble;
mod error;
pub mod exterior;
pub mod linalg;
pub mod maxent;
pub mod phase_space;

pub use autodiff::{Elementary, Jet};
pub use ensemble::{Ensemble, GibbsState, McEstimate, Microstate};
pub use error::{Error, Result};
pub use exterior::{CoefficientField, KForm};
pub use linalg::{Matrix, SymTensor2};
pub use maxent::{MaxEntProblem, MaxEntSolution};
pub use phase_space::{LegendrePartition, PhasePoint, Reparametrization};
