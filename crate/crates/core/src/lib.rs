//! Calibrated re-ranking.
//!
//! Given item scores, position weights, an item-to-category matrix and a
//! target category distribution, find a stochastic ranking policy that trades
//! expected relevance against the L1 gap between the category exposure it
//! induces and the target.
//!
//! The pipeline is:
//!
//! 1. [`lp::solve_reduced`] finds an optimal n×k placement matrix.
//! 2. [`bvn::drop_zero_rows`] discards items that are never shown.
//! 3. [`bvn::augment_and_get_ds`] completes the matrix to a square doubly
//!    stochastic one.
//! 4. [`bvn::bvn_decompose`] writes it as a convex combination of
//!    permutations, and [`bvn::sample`] draws one.
//!
//! [`baselines`] holds the greedy comparison methods, [`metrics`] the
//! evaluation quantities, [`data`] ingestion and synthetic instances, and
//! [`harness`] the sweep and benchmark drivers used by the CLI.

pub mod baselines;
pub mod bvn;
pub mod data;
pub mod error;
pub mod harness;
pub mod lp;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
pub use model::{
    make_position_weights, validate_problem, CategoryDistribution, DoublyStochasticMatrix, ItemId,
    PartialStochasticMatrix, PermutationRanking, PolicyComponent, PositionWeightKind,
    RankingPolicy, RankingProblem,
};
