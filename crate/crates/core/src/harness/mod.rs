//! Experiment drivers behind the command-line tool: the end-to-end
//! pipeline, λ sweeps, runtime benchmarks, and single-instance helpers.

mod bench;
mod config;
pub mod files;
mod pipeline;
mod sweep;

use std::path::PathBuf;

use ndarray::Axis;

pub use bench::{benchmark, BenchReport, BenchRow};
pub use config::{default_lambda_grid, CategorySource, DataSource, Method, SweepConfig};
pub use pipeline::{run_pipeline, PhaseTimings, PipelineOptions, PipelineOutput};
pub use sweep::{
    evaluate_user, load_cases, policy_metrics, run_sweep, sweep_cases, timings_path, write_sweep_csv,
    write_timings_csv, Stat, TradeoffPoint, UserMetrics, SWEEP_HEADER, TIMINGS_HEADER,
};

use crate::bvn::{augment_and_get_ds, bvn_decompose, drop_zero_rows, relabel};
use crate::data::{load_catalog, load_category_file, load_interactions, load_scores};
use crate::error::{Error, Result};
use crate::model::{
    validate_problem, DoublyStochasticMatrix, ItemId, PartialStochasticMatrix, PermutationRanking, RankingPolicy,
    RankingProblem, HARD_TOL,
};
use files::{parse_problem, MatrixFile};

/// Decomposes a matrix file into a policy over its item ids. Square
/// matrices must be doubly stochastic; taller ones are partial placements
/// and go through row dropping and augmentation first.
pub fn decompose_matrix(m: &MatrixFile, residual_tolerance: f64) -> Result<RankingPolicy> {
    let (rows, cols) = m.values.dim();
    let local: Vec<usize> = (0..rows).collect();
    let policy = if rows == cols {
        let ds = DoublyStochasticMatrix::new(m.values.clone(), local)?;
        bvn_decompose(&ds, residual_tolerance)?
    } else if rows > cols {
        let partial = PartialStochasticMatrix::new(m.values.clone(), local)?;
        let kept = drop_zero_rows(&partial, crate::bvn::DEFAULT_DROP_THRESHOLD)?;
        bvn_decompose(&augment_and_get_ds(&kept)?, residual_tolerance)?
    } else {
        return Err(Error::invalid(format!("matrix has more columns ({cols}) than rows ({rows})")));
    };
    let labels: Vec<ItemId> = m.items.iter().map(|i| ItemId(*i)).collect();
    relabel(&policy, &labels)
}

/// A calibrated ranking for one problem, expressed in the problem's item ids.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub ranking: PermutationRanking,
    pub policy: RankingPolicy,
    pub output: PipelineOutput,
}

pub fn calibrate(problem: &RankingProblem, method: Method, seed: u64, options: &PipelineOptions) -> Result<Calibration> {
    let output = run_pipeline(problem, method, seed, options)?;
    let policy = relabel(&output.policy, &problem.items)?;
    let order = output.sample.order().iter().map(|i| problem.items[*i].0 as usize).collect();
    Ok(Calibration {
        ranking: PermutationRanking::new(order)?,
        policy,
        output,
    })
}

/// Input files to check with [`validate_inputs`].
#[derive(Debug, Clone, Default)]
pub struct ValidateRequest {
    pub ratings: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub category_file: Option<PathBuf>,
    pub problem: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub positive_threshold: f64,
    pub min_interactions: usize,
}

/// Loads each given file and lists everything wrong with it; empty means
/// every file is valid.
pub fn validate_inputs(req: &ValidateRequest) -> Vec<String> {
    let mut out = Vec::new();
    let mut report = |what: &str, path: &PathBuf, e: Error| out.push(format!("{what} {}: {e}", path.display()));

    let catalog = match &req.catalog {
        Some(path) => match load_catalog(path) {
            Ok(c) => Some(c),
            Err(e) => {
                report("catalog", path, e);
                None
            }
        },
        None => None,
    };
    let mut known = catalog.clone();
    if let Some(path) = &req.ratings {
        match load_interactions(path, req.positive_threshold, req.min_interactions) {
            Ok(d) => match &catalog {
                Some(c) => {
                    if let Err(e) = d.attach_catalog(c.clone()) {
                        report("ratings", path, e);
                    }
                }
                None => known = Some(d.catalog),
            },
            Err(e) => report("ratings", path, e),
        }
    }
    if let Some(path) = &req.scores {
        match &known {
            Some(c) => {
                if let Err(e) = load_scores(path, c) {
                    report("scores", path, e);
                }
            }
            None => report("scores", path, Error::invalid("needs a catalog or ratings file to check item ids")),
        }
    }
    if let Some(path) = &req.category_file {
        match load_category_file(path) {
            Ok(a) => {
                if let Some(c) = &known {
                    let missing: Vec<u64> = c.ids().filter(|i| a.row(*i).is_none()).map(|i| i.0).collect();
                    if !missing.is_empty() {
                        report("categories", path, Error::UnknownItems(missing));
                    }
                }
            }
            Err(e) => report("categories", path, e),
        }
    }
    if let Some(path) = &req.problem {
        match std::fs::read_to_string(path).map_err(Error::from).and_then(|t| parse_problem(&t, path)) {
            Ok(parsed) => {
                for v in validate_problem(&parsed.problem) {
                    report("problem", path, Error::InconsistentInput(v));
                }
            }
            Err(e) => report("problem", path, e),
        }
    }
    if let Some(path) = &req.matrix {
        match files::read_matrix(path) {
            Ok(m) => {
                for v in matrix_violations(&m) {
                    report("matrix", path, Error::InconsistentInput(v));
                }
            }
            Err(e) => report("matrix", path, e),
        }
    }
    out
}

fn matrix_violations(m: &MatrixFile) -> Vec<String> {
    let mut out = Vec::new();
    let (rows, cols) = m.values.dim();
    if cols > rows {
        out.push(format!("more columns ({cols}) than rows ({rows})"));
    }
    for ((i, j), v) in m.values.indexed_iter() {
        if !v.is_finite() || *v < -HARD_TOL {
            out.push(format!("entry ({i}, {j}) is {v}"));
        }
    }
    for (j, s) in m.values.sum_axis(Axis(0)).iter().enumerate() {
        if (s - 1.0).abs() > HARD_TOL {
            out.push(format!("column {j} sums to {s}"));
        }
    }
    for (i, s) in m.values.sum_axis(Axis(1)).iter().enumerate() {
        let bad = if rows == cols { (s - 1.0).abs() > HARD_TOL } else { *s > 1.0 + HARD_TOL };
        if bad {
            out.push(format!("row {i} sums to {s}"));
        }
    }
    out
}
