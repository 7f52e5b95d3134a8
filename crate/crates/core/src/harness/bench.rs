use std::fmt;

use crate::error::Result;
use crate::harness::config::{Method, SweepConfig};
use crate::harness::pipeline::{run_pipeline, PipelineOptions};
use crate::harness::sweep::{load_cases, Stat};
use crate::lp::{LpBackend, LpOptions};
use crate::metrics::mean_and_stderr;
use crate::model::make_position_weights;

/// Seconds per user for one method, over every user and λ of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub label: String,
    pub method: Method,
    pub backend: Option<LpBackend>,
    pub runs: usize,
    pub total_s: Stat,
    pub lp_s: Stat,
    pub bvn_s: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub header: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, label: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Percentage drop in mean total time from `lp_full` to the reduced row
    /// `label`.
    pub fn reduction_vs_full(&self, label: &str) -> Option<f64> {
        let full = self.row(Method::LpFull.name())?.total_s.mean;
        let reduced = self.row(label)?.total_s.mean;
        Some(100.0 * (full - reduced) / full)
    }
}

fn stat(v: &[f64]) -> Stat {
    let (mean, se) = mean_and_stderr(v);
    Stat { mean, se }
}

/// Times each configured method on every user and λ, one run at a time.
///
/// When both LP methods are configured and the reduced form uses column
/// generation, the reduced form is also timed on the simplex backend so that
/// the two formulations can be compared on the same solver.
pub fn benchmark(config: &SweepConfig) -> Result<BenchReport> {
    let cases = load_cases(config)?;
    let weights = make_position_weights(config.weights, config.k)?;
    let mut variants: Vec<(String, Method, Option<LpBackend>)> = Vec::new();
    for &m in &config.methods {
        match m {
            Method::LpReduced => {
                variants.push((m.name().to_string(), m, Some(config.backend)));
                if config.methods.contains(&Method::LpFull) && config.backend != LpBackend::Simplex {
                    variants.push((format!("{}[{}]", m.name(), LpBackend::Simplex), m, Some(LpBackend::Simplex)));
                }
            }
            Method::LpFull => variants.push((m.name().to_string(), m, Some(LpBackend::Simplex))),
            _ => variants.push((m.name().to_string(), m, None)),
        }
    }

    let mut rows = Vec::new();
    for (label, method, backend) in variants {
        let options = PipelineOptions {
            lp: LpOptions::with_backend(backend.unwrap_or_default()),
            alpha: config.alpha,
            ..PipelineOptions::default()
        };
        let (mut total, mut lp, mut bvn) = (Vec::new(), Vec::new(), Vec::new());
        for &lambda in &config.lambdas {
            for case in &cases {
                let problem = case.problem(weights.clone(), lambda)?;
                let out = run_pipeline(&problem, method, config.seed, &options)?;
                total.push(out.timings.total_ms / 1e3);
                lp.push(out.timings.lp_ms / 1e3);
                bvn.push(out.timings.bvn_ms / 1e3);
            }
        }
        rows.push(BenchRow {
            label,
            method,
            backend,
            runs: total.len(),
            total_s: stat(&total),
            lp_s: stat(&lp),
            bvn_s: stat(&bvn),
        });
    }
    let header = format!("users={} {}", cases.len(), config.describe());
    Ok(BenchReport { header, rows })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.header)?;
        writeln!(
            f,
            "{:<24} {:>6} {:>22} {:>22} {:>22}",
            "method", "runs", "total s/user", "lp s/user", "bvn s/user"
        )?;
        for r in &self.rows {
            let cell = |s: &Stat| format!("{:.6} ± {:.6}", s.mean, s.se);
            let (lp, bvn) = if r.method.is_lp() {
                (cell(&r.lp_s), cell(&r.bvn_s))
            } else {
                ("-".to_string(), "-".to_string())
            };
            writeln!(f, "{:<24} {:>6} {:>22} {:>22} {:>22}", r.label, r.runs, cell(&r.total_s), lp, bvn)?;
        }
        for r in self.rows.iter().filter(|r| r.method == Method::LpReduced) {
            if let Some(drop) = self.reduction_vs_full(&r.label) {
                writeln!(f, "# {} vs lp_full: {drop:.1}% less total time", r.label)?;
            }
        }
        Ok(())
    }
}
