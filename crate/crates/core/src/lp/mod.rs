//! The calibration linear programs.
//!
//! Both forms maximize `(1−λ)·sᵀPe − λ·εᵀ1` subject to `|AᵀPe − q| ≤ ε`:
//!
//! * [`solve_full`] optimizes an n×n doubly stochastic `P` against the full
//!   exposure vector (zero past slot k): n² + r variables.
//! * [`solve_reduced`] drops the zero-weight columns and optimizes an n×k
//!   `P̂` with `P̂1 ≤ 1`, `P̂ᵀ1 = 1`: n·k + r variables. Its optimum equals
//!   the full form's.
//!
//! The reduced form has two backends. [`LpBackend::ColumnGeneration`]
//! (default) prices top-k assignments implicitly and keeps a basis of only
//! r + 1 columns. [`LpBackend::Simplex`] hands the explicit formulation to a
//! general sparse simplex solver, as does the full form.

mod colgen;
mod sanitize;
mod simplex;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use sanitize::{sanitize, sanitize_doubly_stochastic};

use crate::error::{Error, Result};
use crate::metrics::{distribution_from_exposure, Placement};
use crate::model::{validate_problem, DoublyStochasticMatrix, PartialStochasticMatrix, RankingProblem, HARD_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LpBackend {
    #[default]
    ColumnGeneration,
    Simplex,
}

impl FromStr for LpBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "colgen" | "column_generation" => Ok(Self::ColumnGeneration),
            "simplex" => Ok(Self::Simplex),
            other => Err(Error::invalid(format!(
                "unknown LP backend {other:?} (expected colgen or simplex)"
            ))),
        }
    }
}

impl fmt::Display for LpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ColumnGeneration => "colgen",
            Self::Simplex => "simplex",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub backend: LpBackend,
    /// Relative reduced-cost threshold for column generation.
    pub optimality_tol: f64,
    /// How far a raw solver matrix may stray before it counts as corrupt.
    pub sanitize_tol: f64,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            backend: LpBackend::ColumnGeneration,
            optimality_tol: 1e-10,
            sanitize_tol: HARD_TOL,
            max_iterations: 100_000,
        }
    }
}

impl LpOptions {
    pub fn with_backend(backend: LpBackend) -> Self {
        Self {
            backend,
            ..Self::default()
        }
    }
}

/// An optimal LP point.
///
/// `epsilon` is the tight slack `|AᵀPe − q|` of the returned matrix, and
/// `objective` is recomputed from the matrix. At λ = 0 the solver leaves ε
/// free; the tight value is one of its optima.
#[derive(Debug, Clone)]
pub struct LpSolution<M> {
    pub matrix: M,
    pub epsilon: Vec<f64>,
    pub objective: f64,
    /// Objective as reported by the solver before sanitizing.
    pub solver_objective: f64,
    pub relevance: f64,
    pub solve_time_ms: f64,
    pub iterations: usize,
}

impl<M> LpSolution<M> {
    pub fn deviation(&self) -> f64 {
        self.epsilon.iter().sum()
    }
}

/// Relevance `sᵀPe`, L1 deviation `‖AᵀPe − q‖₁`, and the scalarized
/// objective `(1−λ)·relevance − λ·deviation` of any placement.
pub fn evaluate_objective<P: Placement + ?Sized>(
    problem: &RankingProblem,
    placement: &P,
) -> Result<(f64, f64, f64)> {
    let x = placement.item_exposure(&problem.position_weights, problem.n())?;
    let relevance: f64 = problem.scores.iter().zip(&x).map(|(s, x)| s * x).sum();
    let p = distribution_from_exposure(&problem.categories, &x);
    let deviation: f64 = crate::metrics::l1_slices(problem.target.probs(), &p);
    let lambda = problem.lambda;
    Ok((relevance, deviation, (1.0 - lambda) * relevance - lambda * deviation))
}

fn ensure_valid(problem: &RankingProblem) -> Result<()> {
    let violations = validate_problem(problem);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(violations.join("; ")))
    }
}

fn finish<M: Placement>(
    problem: &RankingProblem,
    matrix: M,
    solver_objective: f64,
    iterations: usize,
    started: Instant,
) -> Result<LpSolution<M>> {
    let x = matrix.item_exposure(&problem.position_weights, problem.n())?;
    let relevance: f64 = problem.scores.iter().zip(&x).map(|(s, x)| s * x).sum();
    let p = distribution_from_exposure(&problem.categories, &x);
    let epsilon: Vec<f64> = p
        .iter()
        .zip(problem.target.probs())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let lambda = problem.lambda;
    let objective = (1.0 - lambda) * relevance - lambda * epsilon.iter().sum::<f64>();
    if (objective - solver_objective).abs() > 1e-6 * (1.0 + objective.abs()) {
        return Err(Error::CorruptSolution(format!(
            "solver reported objective {solver_objective} but the returned matrix scores {objective}"
        )));
    }
    Ok(LpSolution {
        matrix,
        epsilon,
        objective,
        solver_objective,
        relevance,
        solve_time_ms: started.elapsed().as_secs_f64() * 1e3,
        iterations,
    })
}

/// Solves the full n×n form with the simplex backend.
pub fn solve_full(problem: &RankingProblem) -> Result<LpSolution<DoublyStochasticMatrix>> {
    solve_full_with(problem, &LpOptions::with_backend(LpBackend::Simplex))
}

/// Solves the full form. Only [`LpBackend::Simplex`] builds the explicit
/// n×n program; any other backend is rejected.
pub fn solve_full_with(
    problem: &RankingProblem,
    options: &LpOptions,
) -> Result<LpSolution<DoublyStochasticMatrix>> {
    ensure_valid(problem)?;
    if options.backend != LpBackend::Simplex {
        return Err(Error::invalid("the full form is only built for the simplex backend"));
    }
    let started = Instant::now();
    let out = simplex::solve(problem, true)?;
    let matrix = sanitize_doubly_stochastic(&out.matrix, (0..problem.n()).collect(), options.sanitize_tol)?;
    finish(problem, matrix, out.objective, out.iterations, started)
}

/// Solves the reduced n×k form with the default backend.
pub fn solve_reduced(problem: &RankingProblem) -> Result<LpSolution<PartialStochasticMatrix>> {
    solve_reduced_with(problem, &LpOptions::default())
}

pub fn solve_reduced_with(
    problem: &RankingProblem,
    options: &LpOptions,
) -> Result<LpSolution<PartialStochasticMatrix>> {
    ensure_valid(problem)?;
    let started = Instant::now();
    let (raw, solver_objective, iterations) = match options.backend {
        LpBackend::ColumnGeneration => {
            let out = colgen::solve(problem, options.optimality_tol, options.max_iterations)?;
            (out.matrix, out.objective, out.iterations)
        }
        LpBackend::Simplex => {
            let out = simplex::solve(problem, false)?;
            (out.matrix, out.objective, out.iterations)
        }
    };
    let matrix = sanitize(&raw, (0..problem.n()).collect(), options.sanitize_tol)?;
    finish(problem, matrix, solver_objective, iterations, started)
}
