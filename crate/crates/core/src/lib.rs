//! Joint robust bias-corrected inference for regression discontinuity designs.
//!
//! The crate estimates the jump in a conditional mean at a cutoff together with
//! the jump in its first derivative, corrects both for the leading smoothing
//! bias, and builds inference objects on the pair:
//!
//! - [`inference::ConfidenceRegion`]: chi-square ellipse for `(tau, tau')`,
//! - [`band::uniform_band`]: simultaneous band for the linear extrapolation
//!   `tau + tau' * x` over `[-delta_lo, delta_hi]`,
//! - marginal robust bias-corrected intervals.
//!
//! Sharp designs go through [`sharp`], fuzzy designs through [`fuzzy`]. The
//! [`sim`] module holds synthetic data-generating processes and the Monte Carlo
//! coverage harness used to check all of the above.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats, the CLI and parallel simulation live in the `rdjoint`
//! companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod band;
pub mod bandwidth;
pub mod error;
pub mod fuzzy;
pub mod inference;
pub mod kernel;
pub mod linalg;
pub mod locpoly;
pub mod math;
pub mod numerics;
pub mod sample;
pub mod sharp;
pub mod sim;

pub use band::{BandRequest, BandVariant, EffectLine, UniformBand};
pub use bandwidth::{rule_of_thumb_bandwidths, Bandwidths};
pub use error::{Error, ErrorClass, Result};
pub use fuzzy::{assemble_omega_fuzzy, estimate_fuzzy, FuzzyEstimates};
pub use inference::{chi2_quantile_2df, rbc_marginal_interval, ConfidenceRegion};
pub use kernel::{Kernel, KernelFn};
pub use locpoly::{fit_one_sided, OneSidedFit, Outcome, Side};
pub use sample::{validate_sample, FitSpec, Sample, ValidationReport};
pub use sharp::{assemble_omega, estimate_sharp, nn_variance, JointEstimates, OmegaMatrix, VarianceDiagonals};
