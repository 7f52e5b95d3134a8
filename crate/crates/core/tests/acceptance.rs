//! Acceptance suite. Runs every criterion in order and prints one
//! `criterion N ... PASS|FAIL` line each; exits non-zero if any fails.
//!
//! Expected values come from oracles written here (brute-force search,
//! direct sums) rather than from the library's own evaluation code.

use std::collections::HashMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use calibrank::bvn::{augment_and_get_ds, bvn_decompose, drop_zero_rows, expected_matrix, sample, DEFAULT_DROP_THRESHOLD};
use calibrank::data::{seeded_rng, synthetic_corpus, synthetic_instance, CorpusSpec, ScoreDistribution};
use calibrank::harness::{
    benchmark, default_lambda_grid, evaluate_user, run_sweep, sweep_cases, DataSource, Method, PipelineOptions,
    SweepConfig,
};
use calibrank::lp::{solve_full, solve_reduced, LpBackend};
use calibrank::metrics::{induced_distribution, kl_smoothed, Placement};
use calibrank::{
    make_position_weights, DoublyStochasticMatrix, PartialStochasticMatrix, PermutationRanking, PolicyComponent,
    PositionWeightKind, RankingPolicy, RankingProblem,
};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Running record of every induced distribution checked along the way.
#[derive(Default)]
struct InducedLog {
    checked: usize,
    worst_sum: f64,
    worst_negative: f64,
}

impl InducedLog {
    fn record<P: Placement + ?Sized>(&mut self, a: &Array2<f64>, placement: &P, weights: &[f64]) {
        let p = induced_distribution(a, placement, weights).expect("shapes agree");
        let sum: f64 = p.probs().iter().sum();
        self.worst_sum = self.worst_sum.max((sum - 1.0).abs());
        self.worst_negative = p.probs().iter().fold(self.worst_negative, |w, v| w.max(-v));
        self.checked += 1;
    }
}

fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn random_ds(seed: u64, m: usize) -> Array2<f64> {
    let mut rng = seeded_rng(seed, 7);
    let count = rng.random_range(1..=2 * m);
    let weights: Vec<f64> = (0..count).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut p = Array2::zeros((m, m));
    for w in weights {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        for (pos, item) in order.iter().enumerate() {
            p[[*item, pos]] += w / total;
        }
    }
    p
}

/// Random row-stochastic category matrix with some zero entries.
fn random_categories(seed: u64, m: usize, r: usize) -> Array2<f64> {
    let mut rng = seeded_rng(seed, 9);
    let mut a = Array2::zeros((m, r));
    for mut row in a.rows_mut() {
        let hot = rng.random_range(0..r);
        for (c, v) in row.iter_mut().enumerate() {
            if c == hot || rng.random::<f64>() < 0.4 {
                *v = rng.random::<f64>() + 0.05;
            }
        }
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    a
}

/// Objective of one ordered top-k selection, computed from the definition.
fn direct_objective(p: &RankingProblem, order: &[usize]) -> f64 {
    let e = &p.position_weights;
    let relevance: f64 = order.iter().zip(e).map(|(i, w)| p.scores[*i] * w).sum();
    let mut induced = vec![0.0; p.r()];
    for (i, w) in order.iter().zip(e) {
        for (c, v) in induced.iter_mut().enumerate() {
            *v += p.categories[[*i, c]] * w;
        }
    }
    let l1: f64 = induced.iter().zip(p.target.probs()).map(|(a, b)| (a - b).abs()).sum();
    (1.0 - p.lambda) * relevance - p.lambda * l1
}

/// Best objective over every ordered selection of k distinct items; each
/// selection's full permutation is also logged for criterion 6.
fn exhaustive_best(p: &RankingProblem, log: &mut InducedLog) -> f64 {
    fn rec(p: &RankingProblem, prefix: &mut Vec<usize>, used: &mut [bool], best: &mut f64, log: &mut InducedLog) {
        if prefix.len() == p.k() {
            *best = best.max(direct_objective(p, prefix));
            let mut order = prefix.clone();
            order.extend((0..p.n()).filter(|i| !used[*i]));
            log.record(&p.categories, &PermutationRanking::new(order).unwrap(), &p.position_weights);
            return;
        }
        for i in 0..p.n() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(p, prefix, used, best, log);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(p, &mut Vec::new(), &mut vec![false; p.n()], &mut best, log);
    best
}

fn criterion_1() -> Outcome {
    let expected = [
        (PositionWeightKind::Log, 0.14, 0.216),
        (PositionWeightKind::Sqrt, 0.17, 0.27),
        (PositionWeightKind::Reciprocal, 0.44, 0.56),
    ];
    let mut detail = Vec::new();
    for (kind, top5, top10) in expected {
        let e = make_position_weights(kind, 100).map_err(|e| e.to_string())?;
        let total: f64 = e.iter().sum();
        check!((total - 1.0).abs() < 1e-12, "{kind:?} weights sum to {total}");
        let m5: f64 = e[..5].iter().sum();
        let m10: f64 = e[..10].iter().sum();
        check!((m5 - top5).abs() <= 0.01, "{kind:?} top-5 mass {m5:.4}, expected {top5}");
        check!((m10 - top10).abs() <= 0.01, "{kind:?} top-10 mass {m10:.4}, expected {top10}");
        detail.push(format!("{kind:?} {:.1}%/{:.1}%", 100.0 * m5, 100.0 * m10));
    }
    Ok(detail.join(", "))
}

fn criterion_2(log: &mut InducedLog) -> Outcome {
    let mut worst_gap = f64::INFINITY;
    let mut worst_zero = 0.0f64;
    for seed in 0..200u64 {
        let n = 2 + (seed % 6) as usize;
        let k = (1 + (seed / 6) as usize % n).min(5);
        let r = 1 + (seed / 3 % 4) as usize;
        let dist = [ScoreDistribution::Uniform, ScoreDistribution::Exponential, ScoreDistribution::HalfNormal]
            [(seed % 3) as usize];
        let base = synthetic_instance(seed, n, k, r, dist, 0.4).map_err(|e| e.to_string())?;
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let p = base.with_lambda(lambda);
            let brute = exhaustive_best(&p, log);
            let sol = solve_reduced(&p).map_err(|e| format!("seed {seed} λ {lambda}: {e}"))?;
            log.record(&p.categories, &sol.matrix, &p.position_weights);
            let gap = sol.objective - brute;
            worst_gap = worst_gap.min(gap);
            check!(gap >= -1e-6, "seed {seed} λ {lambda}: lp {} < exhaustive {brute}", sol.objective);
            if lambda == 0.0 {
                worst_zero = worst_zero.max(gap.abs());
                check!(gap.abs() <= 1e-6, "seed {seed} λ 0: lp {} ≠ exhaustive {brute}", sol.objective);
            }
        }
    }
    Ok(format!("1000 solves, min lp − exhaustive {worst_gap:.2e}, max |gap| at λ=0 {worst_zero:.2e}"))
}

fn criterion_3(log: &mut InducedLog) -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = seeded_rng(seed, 3);
        let n = rng.random_range(2..=30);
        let k = rng.random_range(1..=n.min(10));
        let r = rng.random_range(1..=6);
        let lambda = [0.0, 0.2, 0.5, 0.8, 1.0][rng.random_range(0..5)];
        let p = synthetic_instance(5000 + seed, n, k, r, ScoreDistribution::Uniform, 0.5)
            .map_err(|e| e.to_string())?
            .with_lambda(lambda);
        let reduced = solve_reduced(&p).map_err(|e| format!("seed {seed}: {e}"))?;
        let full = solve_full(&p).map_err(|e| format!("seed {seed}: {e}"))?;
        log.record(&p.categories, &reduced.matrix, &p.position_weights);
        log.record(&p.categories, &full.matrix, &p.position_weights);
        let diff = (reduced.objective - full.objective).abs();
        worst = worst.max(diff);
        check!(diff <= 1e-6, "seed {seed} (n={n}, k={k}): reduced {} vs full {}", reduced.objective, full.objective);
    }
    Ok(format!("max |full − reduced| {worst:.2e}"))
}

fn criterion_4(log: &mut InducedLog) -> Outcome {
    let (mut worst_err, mut worst_theta, mut max_ratio) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..500u64 {
        let m = 1 + (seed % 25) as usize;
        let values = random_ds(seed, m);
        let p = DoublyStochasticMatrix::new(values.clone(), (0..m).collect()).map_err(|e| e.to_string())?;
        let policy = bvn_decompose(&p, 1e-9).map_err(|e| format!("seed {seed}: {e}"))?;
        let bound = (m - 1).pow(2) + 1;
        check!(policy.len() <= bound, "seed {seed}: {} components for m={m}", policy.len());
        max_ratio = max_ratio.max(policy.len() as f64 / bound as f64);
        let theta: f64 = policy.components().iter().map(|c| c.theta).sum();
        worst_theta = worst_theta.max((theta - 1.0).abs());
        check!((theta - 1.0).abs() <= 1e-9, "seed {seed}: θ sums to {theta}");
        let back = expected_matrix(&policy).map_err(|e| e.to_string())?;
        let err = max_abs(back.values(), &values);
        worst_err = worst_err.max(err);
        check!(err <= 1e-6, "seed {seed}: reconstruction error {err:.2e}");

        let a = random_categories(seed, m, 1 + (seed % 5) as usize);
        let e = make_position_weights(PositionWeightKind::Log, m).map_err(|e| e.to_string())?;
        log.record(&a, &p, &e);
        for c in policy.components() {
            log.record(&a, &c.ranking, &e);
        }
    }
    Ok(format!(
        "max error {worst_err:.2e}, max |Σθ − 1| {worst_theta:.2e}, components ≤ {:.0}% of bound",
        100.0 * max_ratio
    ))
}

fn criterion_5(log: &mut InducedLog) -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let mut rng = seeded_rng(seed, 5);
        let m = rng.random_range(1..=25);
        let k = rng.random_range(1..=m);
        let full = random_ds(20_000 + seed, m);
        let mut partial = full.slice(ndarray::s![.., ..k]).to_owned();
        // Permute rows so the deficit pattern is not tied to the generator.
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);
        partial = partial.select(Axis(0), &perm);
        let psm = PartialStochasticMatrix::new(partial.clone(), (0..m).collect()).map_err(|e| e.to_string())?;
        let ds = augment_and_get_ds(&psm).map_err(|e| format!("seed {seed}: {e}"))?;
        let v = ds.values();
        check!(v.dim() == (m, m), "seed {seed}: shape {:?}", v.dim());
        check!(v.iter().all(|x| *x >= 0.0), "seed {seed}: negative entry");
        for s in v.sum_axis(Axis(0)).iter().chain(v.sum_axis(Axis(1)).iter()) {
            worst = worst.max((s - 1.0).abs());
            check!((s - 1.0).abs() <= 1e-9, "seed {seed}: line sums to {s}");
        }
        check!(v.slice(ndarray::s![.., ..k]) == partial, "seed {seed}: first {k} columns changed");

        let a = random_categories(seed, m, 3);
        let e = make_position_weights(PositionWeightKind::Sqrt, k).map_err(|e| e.to_string())?;
        log.record(&a, &psm, &e);
        log.record(&a, &ds, &e);
    }
    Ok(format!("max line-sum error {worst:.2e}, first k columns identical"))
}

fn criterion_6(log: &InducedLog) -> Outcome {
    check!(log.checked > 0, "nothing recorded");
    check!(log.worst_negative <= 0.0, "negative mass {:.2e}", log.worst_negative);
    check!(log.worst_sum <= 1e-9, "sum off by {:.2e}", log.worst_sum);
    Ok(format!("{} distributions, max |Σ − 1| {:.2e}", log.checked, log.worst_sum))
}

fn criterion_7() -> Outcome {
    let (mut tested, mut attempts, mut min_slack) = (0, 0u64, f64::INFINITY);
    while tested < 100 {
        attempts += 1;
        check!(attempts <= 1000, "only {tested} eligible policies in 1000 attempts");
        let seed = 7000 + attempts;
        let mut rng = seeded_rng(seed, 1);
        let n = rng.random_range(8..=30);
        let k = rng.random_range(2..=n.min(12));
        let r = rng.random_range(2..=5);
        let lambda = rng.random_range(0.2..0.9);
        let p = synthetic_instance(seed, n, k, r, ScoreDistribution::Uniform, 0.2)
            .map_err(|e| e.to_string())?
            .with_lambda(lambda);
        let sol = solve_reduced(&p).map_err(|e| e.to_string())?;
        let kept = drop_zero_rows(&sol.matrix, DEFAULT_DROP_THRESHOLD).map_err(|e| e.to_string())?;
        let ds = augment_and_get_ds(&kept).map_err(|e| e.to_string())?;
        let policy = bvn_decompose(&ds, 1e-9).map_err(|e| e.to_string())?;
        let e = &p.position_weights;
        let parts: Vec<Vec<f64>> = policy
            .components()
            .iter()
            .map(|c| induced_distribution(&p.categories, &c.ranking, e).unwrap().probs().to_vec())
            .collect();
        if parts.iter().any(|d| d.iter().any(|v| *v <= 0.0)) {
            continue;
        }
        let q = p.target.probs();
        let mean = induced_distribution(&p.categories, &ds, e).map_err(|e| e.to_string())?;
        let lhs = kl_smoothed(q, mean.probs(), 0.0);
        let rhs: f64 = policy.components().iter().zip(&parts).map(|(c, d)| c.theta * kl_smoothed(q, d, 0.0)).sum();
        min_slack = min_slack.min(rhs - lhs);
        check!(lhs <= rhs + 1e-9, "seed {seed}: KL of mean {lhs} > mean KL {rhs}");
        tested += 1;
    }
    Ok(format!("100 policies ({attempts} drawn), min Σθ·KL − KL(mean) {min_slack:.2e}"))
}

fn criterion_8() -> Outcome {
    let thetas = [0.2, 0.3, 0.5];
    let components = vec![
        PolicyComponent { theta: 0.2, ranking: PermutationRanking::new(vec![0, 1, 2]).unwrap() },
        PolicyComponent { theta: 0.3, ranking: PermutationRanking::new(vec![1, 2, 0]).unwrap() },
        PolicyComponent { theta: 0.5, ranking: PermutationRanking::new(vec![2, 0, 1]).unwrap() },
    ];
    let policy = RankingPolicy::new(vec![0, 1, 2], components).map_err(|e| e.to_string())?;
    let draws = 100_000u64;
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for seed in 0..draws {
        *counts.entry(sample(&policy, seed).order()[0]).or_default() += 1;
    }
    let mut detail = Vec::new();
    for (first, theta) in thetas.iter().enumerate() {
        let observed = counts.get(&first).copied().unwrap_or(0) as f64;
        let expected = draws as f64 * theta;
        let sigma = (draws as f64 * theta * (1.0 - theta)).sqrt();
        let z = (observed - expected) / sigma;
        check!(z.abs() <= 3.0, "θ={theta}: {observed} draws, expected {expected} (z = {z:.2})");
        detail.push(format!("{:.4} (z={z:+.2})", observed / draws as f64));
    }
    let same = sample(&policy, 17) == sample(&policy, 17);
    check!(same, "same seed gave different rankings");
    Ok(detail.join(", "))
}

fn desk_config() -> SweepConfig {
    SweepConfig {
        methods: vec![Method::LpReduced, Method::GreedyWeighted],
        lambdas: default_lambda_grid(),
        n: 60,
        k: 40,
        r: 8,
        users: 50,
        ..SweepConfig::default()
    }
}

fn criteria_9_and_10() -> (Outcome, Outcome) {
    let config = desk_config();
    let spec = CorpusSpec {
        users: config.users,
        n: config.n,
        r: config.r,
        category_sparsity: config.sparsity,
        relevant_frac: config.relevant_frac,
    };
    let cases = match synthetic_corpus(&spec, config.seed) {
        Ok(c) => c,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let points = match sweep_cases(&cases, &config) {
        Ok(p) => p,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let lp: Vec<_> = points.iter().filter(|p| p.method == Method::LpReduced).collect();
    let greedy: Vec<_> = points.iter().filter(|p| p.method == Method::GreedyWeighted).collect();

    let dominance = (|| {
        check!(!lp.is_empty() && !greedy.is_empty(), "empty sweep");
        for g in &greedy {
            let covered = lp
                .iter()
                .any(|p| p.relevance.mean >= g.relevance.mean - 1e-6 && p.l1.mean <= g.l1.mean + 1e-6);
            check!(
                covered,
                "greedy point λ={} (relevance {:.6}, L1 {:.6}) is not dominated",
                g.lambda,
                g.relevance.mean,
                g.l1.mean
            );
        }
        Ok(format!("{} users, {} greedy points each dominated by an lp_reduced point", cases.len(), greedy.len()))
    })();

    let monotone = (|| {
        for w in lp.windows(2) {
            check!(w[1].l1.mean <= w[0].l1.mean + 1e-6, "mean L1 rises from λ={} to λ={}", w[0].lambda, w[1].lambda);
            check!(
                w[1].relevance.mean <= w[0].relevance.mean + 1e-6,
                "mean relevance rises from λ={} to λ={}",
                w[0].lambda,
                w[1].lambda
            );
        }
        let weights = make_position_weights(config.weights, config.k).map_err(|e| e.to_string())?;
        let options = PipelineOptions::default();
        for case in &cases {
            let mut prev: Option<(f64, f64, f64)> = None;
            for &lambda in &config.lambdas {
                let m = evaluate_user(case, Method::LpReduced, lambda, &weights, &options, config.seed)
                    .map_err(|e| e.to_string())?;
                if let Some((l, rel, l1)) = prev {
                    check!(m.l1 <= l1 + 1e-6, "user {}: L1 rises from λ={l} to λ={lambda}", case.user);
                    check!(m.relevance <= rel + 1e-6, "user {}: relevance rises from λ={l} to λ={lambda}", case.user);
                }
                prev = Some((lambda, m.relevance, m.l1));
            }
        }
        Ok(format!("{} λ points, monotone in the mean and for every user", lp.len()))
    })();
    (dominance, monotone)
}

fn criterion_11() -> Outcome {
    let config = SweepConfig {
        methods: vec![Method::LpFull, Method::LpReduced],
        lambdas: vec![0.5],
        n: 150,
        k: 100,
        r: 20,
        users: 2,
        sparsity: 0.85,
        ..SweepConfig::default()
    };
    let report = benchmark(&config).map_err(|e| e.to_string())?;
    print!("{report}");
    let full = report.row(Method::LpFull.name()).ok_or("no lp_full row")?;
    let simplex_label = format!("{}[{}]", Method::LpReduced.name(), LpBackend::Simplex);
    for row in &report.rows {
        check!(
            row.lp_s.mean > row.bvn_s.mean,
            "{}: LP {:.4}s ≤ BVN {:.4}s per user",
            row.label,
            row.lp_s.mean,
            row.bvn_s.mean
        );
    }
    let mut detail = Vec::new();
    for label in [Method::LpReduced.name(), simplex_label.as_str()] {
        let row = report.row(label).ok_or_else(|| format!("no {label} row"))?;
        check!(
            row.total_s.mean < full.total_s.mean,
            "{label} {:.3}s/user not faster than lp_full {:.3}s/user",
            row.total_s.mean,
            full.total_s.mean
        );
        detail.push(format!("{label} {:.1}% faster", report.reduction_vs_full(label).unwrap()));
    }
    Ok(format!("LP > BVN on every LP row; {}", detail.join(", ")))
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo");
    let synthetic = SweepConfig {
        methods: Method::ALL.iter().copied().filter(|m| *m != Method::LpFull).collect(),
        lambdas: vec![0.0, 0.3, 0.7, 1.0],
        n: 40,
        k: 20,
        users: 12,
        seed: 5,
        ..SweepConfig::default()
    };
    let files = SweepConfig::load(&demo.join("files.toml")).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for (name, config) in [("synthetic", synthetic), ("files", files)] {
        let mut bytes = Vec::new();
        for run in 0..2 {
            let output = dir.path().join(format!("{name}-{run}.csv"));
            let config = SweepConfig { output: output.clone(), ..config.clone() };
            run_sweep(&config).map_err(|e| format!("{name}: {e}"))?;
            bytes.push(std::fs::read(&output).map_err(|e| e.to_string())?);
        }
        check!(!bytes[0].is_empty(), "{name}: empty CSV");
        check!(bytes[0] == bytes[1], "{name}: CSVs differ between runs");
        let source = if config.source == DataSource::Synthetic { "synthetic" } else { "files" };
        detail.push(format!("{source} {} bytes", bytes[0].len()));
    }
    Ok(format!("identical CSVs ({})", detail.join(", ")))
}

fn main() -> ExitCode {
    let mut log = InducedLog::default();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, started: Instant, outcome: Outcome| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} {name} ... PASS [{secs:.1}s] {detail}"),
            Err(reason) => {
                failures += 1;
                println!("criterion {n:>2} {name} ... FAIL [{secs:.1}s] {reason}");
            }
        }
    };

    let t = Instant::now();
    report(1, "position-weight mass", t, criterion_1());
    let t = Instant::now();
    report(2, "LP relaxation vs exhaustive search", t, criterion_2(&mut log));
    let t = Instant::now();
    report(3, "full and reduced forms agree", t, criterion_3(&mut log));
    let t = Instant::now();
    report(4, "BVN round trip", t, criterion_4(&mut log));
    let t = Instant::now();
    report(5, "augmentation", t, criterion_5(&mut log));
    let t = Instant::now();
    report(6, "induced distributions are distributions", t, criterion_6(&log));
    let t = Instant::now();
    report(7, "Jensen bound on KL", t, criterion_7());
    let t = Instant::now();
    report(8, "sampling frequencies", t, criterion_8());
    let t = Instant::now();
    let (c9, c10) = criteria_9_and_10();
    report(9, "trade-off dominance over greedy_weighted", t, c9);
    report(10, "monotone in λ", t, c10);
    let t = Instant::now();
    report(11, "runtime structure", t, criterion_11());
    let t = Instant::now();
    report(12, "deterministic sweep CSV", t, criterion_12());

    if failures == 0 {
        println!("acceptance: all 12 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 12 criteria fail");
        ExitCode::FAILURE
    }
}
