use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::data::{
    build_genre_matrix, build_popularity_matrix, build_year_matrix, load_catalog, load_category_file,
    load_interactions, load_scores, prepare_cases, split_users, synthetic_corpus, CaseOptions, CorpusSpec, EvalCase,
};
use crate::error::{Error, Result};
use crate::harness::config::{CategorySource, DataSource, Method, SweepConfig};
use crate::harness::pipeline::{run_pipeline, PhaseTimings, PipelineOptions};
use crate::lp::LpOptions;
use crate::metrics::{
    expected_kl_of_policy, expected_over_policy, expected_relevance, induced_distribution, kl_divergence,
    l1_deviation, mean_and_stderr, mrr, ndcg_at_k,
};
use crate::model::{make_position_weights, RankingPolicy};

/// Builds the evaluation users described by `config`.
pub fn load_cases(config: &SweepConfig) -> Result<Vec<EvalCase>> {
    config.validate()?;
    let mut cases = match config.source {
        DataSource::Synthetic => {
            let spec = CorpusSpec {
                users: config.users,
                n: config.n,
                r: config.r,
                category_sparsity: config.sparsity,
                relevant_frac: config.relevant_frac,
            };
            synthetic_corpus(&spec, config.seed)?
        }
        DataSource::Files => {
            let ratings = config.ratings.as_deref().expect("validated");
            let mut d = load_interactions(ratings, config.positive_threshold, config.min_interactions)?;
            if let Some(path) = &config.catalog {
                d = d.attach_catalog(load_catalog(path)?)?;
            }
            let split = split_users(&d, None, config.val_users, config.test_users, config.seed)?;
            let a = match config.categories {
                CategorySource::Genre => build_genre_matrix(&d.catalog),
                CategorySource::Year => build_year_matrix(&d.catalog),
                CategorySource::Popularity => {
                    let train = split.train.iter().copied().collect();
                    build_popularity_matrix(&d, &train, config.popular_frac)?
                }
                CategorySource::File => load_category_file(config.category_file.as_deref().expect("validated"))?,
            };
            let scores = load_scores(config.scores.as_deref().expect("validated"), &d.catalog)?;
            let users: BTreeSet<u64> = split.test.into_iter().collect();
            let opts = CaseOptions {
                n: config.n,
                k: config.k,
                history_frac: config.history_frac,
                seed: config.seed,
            };
            prepare_cases(&d, &scores, &users, &a, opts)?.1
        }
    };
    if let Some(max) = config.max_users {
        cases.truncate(max);
    }
    if cases.is_empty() {
        return Err(Error::invalid("no evaluation users"));
    }
    Ok(cases)
}

/// Per-user evaluation of one method at one λ. Policy metrics are exact
/// θ-weighted expectations over the components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub relevance: f64,
    pub ndcg: f64,
    pub mrr: f64,
    /// `Σ θ_i KL(q ‖ p(Qⁱ))`.
    pub kl: f64,
    /// `KL(q ‖ p(Σ θ_i Qⁱ))`.
    pub kl_of_mean: f64,
    /// L1 deviation of the expected induced distribution.
    pub l1: f64,
    /// `Σ θ_i ‖q − p(Qⁱ)‖₁`.
    pub l1_expected: f64,
    pub objective: f64,
    pub lp_objective: Option<f64>,
    pub timings: PhaseTimings,
}

/// Metrics of `policy` on `case` with position weights `weights`.
pub fn policy_metrics(
    case: &EvalCase,
    policy: &RankingPolicy,
    weights: &[f64],
    lambda: f64,
    alpha: f64,
) -> Result<UserMetrics> {
    let k = weights.len();
    let relevance = expected_relevance(&case.scores, policy, weights)?;
    let ndcg = expected_over_policy(policy, |q| ndcg_at_k(q.order(), &case.relevant, k));
    let mrr_value = expected_over_policy(policy, |q| mrr(q.order(), &case.relevant, k));
    let kl = expected_kl_of_policy(policy, &case.categories, weights, &case.target, alpha)?;
    let mean_dist = induced_distribution(&case.categories, policy, weights)?;
    let kl_of_mean = kl_divergence(&case.target, &mean_dist, alpha)?;
    let l1 = l1_deviation(&case.target, &mean_dist)?;
    let mut l1_expected = 0.0;
    for c in policy.components() {
        let p = induced_distribution(&case.categories, &c.ranking, weights)?;
        l1_expected += c.theta * l1_deviation(&case.target, &p)?;
    }
    Ok(UserMetrics {
        relevance,
        ndcg,
        mrr: mrr_value,
        kl,
        kl_of_mean,
        l1,
        l1_expected,
        objective: (1.0 - lambda) * relevance - lambda * l1,
        lp_objective: None,
        timings: PhaseTimings::default(),
    })
}

fn sample_seed(seed: u64, user: u64) -> u64 {
    seed ^ user.rotate_left(32)
}

pub fn evaluate_user(
    case: &EvalCase,
    method: Method,
    lambda: f64,
    weights: &[f64],
    options: &PipelineOptions,
    seed: u64,
) -> Result<UserMetrics> {
    let annotate = |e: Error| Error::User {
        user: case.user,
        lambda,
        source: Box::new(e),
    };
    let problem = case.problem(weights.to_vec(), lambda).map_err(annotate)?;
    let out = run_pipeline(&problem, method, sample_seed(seed, case.user), options).map_err(annotate)?;
    let mut m = policy_metrics(case, &out.policy, weights, lambda, options.alpha).map_err(annotate)?;
    m.lp_objective = out.lp_objective;
    m.timings = out.timings;
    Ok(m)
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let (mean, se) = mean_and_stderr(&v);
        Self { mean, se }
    }
}

/// One row of a trade-off curve: means over users at a single λ.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffPoint {
    pub method: Method,
    pub lambda: f64,
    pub users: usize,
    pub relevance: Stat,
    pub ndcg: Stat,
    pub mrr: Stat,
    pub kl: Stat,
    pub kl_of_mean: Stat,
    pub l1: Stat,
    pub l1_expected: Stat,
    pub objective: Stat,
    /// Mean LP objective, for the LP methods.
    pub lp_objective: Option<f64>,
    pub lp_ms: Stat,
    pub bvn_ms: Stat,
    pub total_ms: Stat,
}

impl TradeoffPoint {
    /// Aggregates per-user results in the given order.
    pub fn aggregate(method: Method, lambda: f64, users: &[UserMetrics]) -> Self {
        let stat = |f: fn(&UserMetrics) -> f64| Stat::of(users.iter().map(f));
        let lp_objective = if method.is_lp() && !users.is_empty() {
            Some(users.iter().map(|u| u.lp_objective.unwrap_or(f64::NAN)).sum::<f64>() / users.len() as f64)
        } else {
            None
        };
        Self {
            method,
            lambda,
            users: users.len(),
            relevance: stat(|u| u.relevance),
            ndcg: stat(|u| u.ndcg),
            mrr: stat(|u| u.mrr),
            kl: stat(|u| u.kl),
            kl_of_mean: stat(|u| u.kl_of_mean),
            l1: stat(|u| u.l1),
            l1_expected: stat(|u| u.l1_expected),
            objective: stat(|u| u.objective),
            lp_objective,
            lp_ms: stat(|u| u.timings.lp_ms),
            bvn_ms: stat(|u| u.timings.bvn_ms),
            total_ms: stat(|u| u.timings.total_ms),
        }
    }
}

/// Runs every method at every λ over `cases`. Users are evaluated in
/// parallel and aggregated in input order, so the result does not depend on
/// scheduling.
pub fn sweep_cases(cases: &[EvalCase], config: &SweepConfig) -> Result<Vec<TradeoffPoint>> {
    config.validate()?;
    let weights = make_position_weights(config.weights, config.k)?;
    let options = PipelineOptions {
        lp: LpOptions::with_backend(config.backend),
        alpha: config.alpha,
        ..PipelineOptions::default()
    };
    let mut points = Vec::with_capacity(config.methods.len() * config.lambdas.len());
    for &method in &config.methods {
        for &lambda in &config.lambdas {
            let per_user = cases
                .par_iter()
                .map(|case| evaluate_user(case, method, lambda, &weights, &options, config.seed))
                .collect::<Result<Vec<_>>>()?;
            let point = TradeoffPoint::aggregate(method, lambda, &per_user);
            info!(
                "{method} λ={lambda}: relevance {:.6} l1 {:.6} ndcg {:.4}",
                point.relevance.mean, point.l1.mean, point.ndcg.mean
            );
            points.push(point);
        }
    }
    Ok(points)
}

pub const SWEEP_HEADER: &[&str] = &[
    "method",
    "lambda",
    "users",
    "relevance",
    "relevance_se",
    "ndcg",
    "ndcg_se",
    "mrr",
    "mrr_se",
    "kl",
    "kl_se",
    "kl_of_mean",
    "kl_of_mean_se",
    "l1",
    "l1_se",
    "l1_expected",
    "l1_expected_se",
    "objective",
    "objective_se",
    "lp_objective",
];

pub const TIMINGS_HEADER: &[&str] = &[
    "method", "lambda", "users", "lp_ms", "lp_ms_se", "bvn_ms", "bvn_ms_se", "total_ms", "total_ms_se",
];

fn stat_fields(s: &Stat) -> [String; 2] {
    [s.mean.to_string(), s.se.to_string()]
}

/// Writes the deterministic metric columns; see [`SWEEP_HEADER`].
pub fn write_sweep_csv<W: Write>(w: W, points: &[TradeoffPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for p in points {
        let mut row = vec![p.method.name().to_string(), p.lambda.to_string(), p.users.to_string()];
        for s in [&p.relevance, &p.ndcg, &p.mrr, &p.kl, &p.kl_of_mean, &p.l1, &p.l1_expected, &p.objective] {
            row.extend(stat_fields(s));
        }
        row.push(p.lp_objective.map_or(String::new(), |v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes wall-clock timings; see [`TIMINGS_HEADER`].
pub fn write_timings_csv<W: Write>(w: W, points: &[TradeoffPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TIMINGS_HEADER)?;
    for p in points {
        let mut row = vec![p.method.name().to_string(), p.lambda.to_string(), p.users.to_string()];
        for s in [&p.lp_ms, &p.bvn_ms, &p.total_ms] {
            row.extend(stat_fields(s));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `<output>.timings.csv` next to the sweep output.
pub fn timings_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".timings.csv");
    output.with_file_name(name)
}

/// Loads the data, sweeps, and writes the metric CSV to `config.output` and
/// timings to [`timings_path`].
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<TradeoffPoint>> {
    let cases = load_cases(config)?;
    info!("sweeping {} users: {}", cases.len(), config.describe());
    let points = sweep_cases(&cases, config)?;
    write_sweep_csv(BufWriter::new(File::create(&config.output)?), &points)?;
    write_timings_csv(BufWriter::new(File::create(timings_path(&config.output))?), &points)?;
    Ok(points)
}
