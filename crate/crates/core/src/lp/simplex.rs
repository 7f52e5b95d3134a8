//! Explicit formulations handed to a general sparse simplex solver.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::RankingProblem;

pub(crate) struct Outcome {
    pub matrix: Array2<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Builds and solves the calibrated LP with `cols` position columns.
///
/// With `square = true` the matrix is n×n with every row summing to one (the
/// full doubly stochastic form, zero weight past slot k); otherwise it is n×k
/// with rows summing to at most one. The deviation slack is r variables with
/// two-sided constraints.
pub(crate) fn solve(p: &RankingProblem, square: bool) -> Result<Outcome> {
    let (n, k, r) = (p.n(), p.k(), p.r());
    let cols = if square { n } else { k };
    let lambda = p.lambda;
    let weight = |j: usize| if j < k { p.position_weights[j] } else { 0.0 };

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let cell: Vec<Variable> = (0..n * cols)
        .map(|idx| {
            let (i, j) = (idx / cols, idx % cols);
            lp.add_var((1.0 - lambda) * p.scores[i] * weight(j), (0.0, f64::INFINITY))
        })
        .collect();
    let slack: Vec<Variable> = (0..r).map(|_| lp.add_var(-lambda, (0.0, f64::INFINITY))).collect();

    let row_op = if square { ComparisonOp::Eq } else { ComparisonOp::Le };
    for i in 0..n {
        let terms: Vec<(Variable, f64)> = (0..cols).map(|j| (cell[i * cols + j], 1.0)).collect();
        lp.add_constraint(terms.as_slice(), row_op, 1.0);
    }
    for j in 0..cols {
        let terms: Vec<(Variable, f64)> = (0..n).map(|i| (cell[i * cols + j], 1.0)).collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, 1.0);
    }
    let q = p.target.probs();
    for c in 0..r {
        let mut terms = Vec::new();
        for i in 0..n {
            let a = p.categories[[i, c]];
            if a != 0.0 {
                terms.extend((0..k).map(|j| (cell[i * cols + j], a * weight(j))));
            }
        }
        terms.push((slack[c], -1.0));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, q[c]);
        let last = terms.len() - 1;
        terms[last].1 = 1.0;
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, q[c]);
    }

    let outcome = lp.solve().map_err(|e| Error::SolverFailure {
        iterations: 0,
        detail: e.to_string(),
    })?;
    let iterations = outcome.stats().lp_iterations as usize;
    if !outcome.is_optimal() {
        return Err(Error::SolverFailure {
            iterations,
            detail: format!("terminated without optimality: {:?}", outcome.termination_reason()),
        });
    }
    let solution = outcome.into_solution().map_err(|e| Error::SolverFailure {
        iterations,
        detail: format!("{:?}", e.termination_reason()),
    })?;
    let mut matrix = Array2::zeros((n, cols));
    for (idx, var) in cell.iter().enumerate() {
        matrix[[idx / cols, idx % cols]] = solution.var_value_raw(*var);
    }
    Ok(Outcome {
        matrix,
        objective: solution.objective(),
        iterations,
    })
}
