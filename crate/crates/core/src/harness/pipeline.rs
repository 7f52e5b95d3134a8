use std::time::Instant;

use crate::baselines::{greedy_simple_with, greedy_weighted_with, score_sort};
use crate::bvn::{
    augment_and_get_ds, bvn_decompose, drop_zero_rows, sample, DEFAULT_DROP_THRESHOLD, DEFAULT_RESIDUAL_TOLERANCE,
};
use crate::error::Result;
use crate::harness::Method;
use crate::lp::{solve_full_with, solve_reduced_with, LpBackend, LpOptions};
use crate::model::{PermutationRanking, RankingPolicy, RankingProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    /// LP settings for the reduced form; the full form always uses the
    /// simplex backend.
    pub lp: LpOptions,
    pub alpha: f64,
    pub drop_threshold: f64,
    pub residual_tolerance: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            lp: LpOptions::default(),
            alpha: 0.01,
            drop_threshold: DEFAULT_DROP_THRESHOLD,
            residual_tolerance: DEFAULT_RESIDUAL_TOLERANCE,
        }
    }
}

/// Wall-clock milliseconds per phase. The LP and BVN phases are zero for
/// the deterministic methods.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub lp_ms: f64,
    pub bvn_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub sample: PermutationRanking,
    pub policy: RankingPolicy,
    /// Objective reported by the LP, for the LP methods.
    pub lp_objective: Option<f64>,
    pub timings: PhaseTimings,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Runs one method on one problem and draws a ranking with `seed`.
///
/// `lp_reduced` solves the n×k form, drops never-shown items, completes the
/// rest to a doubly stochastic matrix, and decomposes it. `lp_full` solves
/// the n×n form and decomposes it directly. The other methods return a
/// single deterministic ranking.
pub fn run_pipeline(
    problem: &RankingProblem,
    method: Method,
    seed: u64,
    options: &PipelineOptions,
) -> Result<PipelineOutput> {
    let start = Instant::now();
    let mut timings = PhaseTimings::default();
    let (policy, lp_objective) = match method {
        Method::LpReduced => {
            let t = Instant::now();
            let sol = solve_reduced_with(problem, &options.lp).map_err(|e| e.in_phase("solve_reduced"))?;
            timings.lp_ms = ms(t);
            let t = Instant::now();
            let kept = drop_zero_rows(&sol.matrix, options.drop_threshold).map_err(|e| e.in_phase("drop_zero_rows"))?;
            let ds = augment_and_get_ds(&kept).map_err(|e| e.in_phase("augment_and_get_ds"))?;
            let policy = bvn_decompose(&ds, options.residual_tolerance).map_err(|e| e.in_phase("bvn_decompose"))?;
            timings.bvn_ms = ms(t);
            (policy, Some(sol.objective))
        }
        Method::LpFull => {
            let t = Instant::now();
            let lp = LpOptions { backend: LpBackend::Simplex, ..options.lp };
            let sol = solve_full_with(problem, &lp).map_err(|e| e.in_phase("solve_full"))?;
            timings.lp_ms = ms(t);
            let t = Instant::now();
            let policy = bvn_decompose(&sol.matrix, options.residual_tolerance).map_err(|e| e.in_phase("bvn_decompose"))?;
            timings.bvn_ms = ms(t);
            (policy, Some(sol.objective))
        }
        Method::GreedySimple => (RankingPolicy::deterministic(greedy_simple_with(problem, options.alpha)), None),
        Method::GreedyWeighted => (RankingPolicy::deterministic(greedy_weighted_with(problem, options.alpha)), None),
        Method::ScoreSort => (RankingPolicy::deterministic(score_sort(problem)), None),
    };
    let drawn = sample(&policy, seed);
    timings.total_ms = ms(start);
    Ok(PipelineOutput {
        sample: drawn,
        policy,
        lp_objective,
        timings,
    })
}
