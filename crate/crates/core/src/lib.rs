//! Depth-based multivariate risk measurement.
//!
//! The crate implements the Mahalanobis depth and its plug-in estimator,
//! depth lower-level sets with their boundary geometry, the
//! covariate-conditional tail expectation (CCTE) over a depth region and its
//! two-sample estimator, plus the replication protocol used to measure the
//! estimator's convergence.
//!
//! Everything here is `no_std` (with `alloc`). Randomness comes from
//! [`RngStream`], a seeded counter-style generator with independent
//! substreams, so every result is a pure function of `(seed, stream_id)`.
//! Parallel execution is injected through the [`Executor`] trait; the
//! `depthrisk` crate provides a rayon-backed implementation together with
//! file formats and the command-line tool.

#![no_std]
// `!(x >= 0.0)` rejects NaN on purpose; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod ccte;
pub mod depth;
mod error;
pub mod exec;
pub mod experiments;
pub mod levelset;
pub mod linalg;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use ccte::{ccte_hat, ccte_hat_split, ccte_hat_with_model, ccte_true_oracle, CcteEstimate, OracleValue};
pub use depth::{fit_model, mhd, mhd_gradient, sup_norm_distance, Depth, DepthModel, Probe};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use levelset::{
    boundary_points, hausdorff_boundaries, in_lower_set, sym_diff_probability, sym_diff_volume, Hausdorff,
    LevelSetSpec, McEstimate,
};
pub use linalg::{build_spd, operator_norm, quad_form, SpdMatrix};
pub use rng::RngStream;
pub use sampling::{
    attach_costs, frank_pair, gumbel_quantile, sample_gaussian, sample_risk_factors, FrankGumbelConfig, GaussianSource,
    Gumbel, PointSource, Sample,
};
