//! Recovery of compressively sampled signals by weighted ℓ1 minimization when
//! part of the support is known in advance.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: signals, supports, weights and support-accuracy ratios.
//! * [`operators`]: measurement operators (Gaussian, restricted DCT) with
//!   forward and adjoint application.
//! * [`solver`]: the weighted basis-pursuit-denoise solver and a brute-force
//!   oracle for tiny instances.
//! * [`theory`]: closed-form recovery conditions, error-bound constants and an
//!   exhaustive restricted-isometry estimator.
//! * [`experiments`]: seeded synthetic sweeps with CSV output.
//! * [`streaming`]: block-wise video and audio recovery with support estimates
//!   carried over from previously decoded blocks.

// negated float comparisons below deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod model;
pub mod operators;
pub mod rng;
pub mod solver;
pub mod streaming;
pub mod theory;

pub use error::{Error, Result};
pub use model::{
    best_k_term, build_weights, gen_compressible_signal, gen_sparse_signal, gen_support_estimate,
    support_accuracy, weighted_l1_norm, SignalVector, SupportEstimate, SupportSet, WeightVector,
};
pub use operators::{gaussian_operator, materialize, restriction_operator, LinearOperator};
pub use solver::{solve_weighted_bpdn, Algorithm, SolveOptions, SolveReport};
