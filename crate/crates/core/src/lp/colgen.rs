//! Revised simplex over the vertices of the top-k assignment polytope.
//!
//! The reduced LP only sees `P̂` through the item exposure `P̂ê`, and the
//! feasible set `{P̂ ≥ 0, P̂1 ≤ 1, P̂ᵀ1 = 1}` is an integral transportation
//! polytope whose vertices are top-k assignments. So the LP is equivalent to
//! a master problem over convex weights `ν_t` on assignments:
//!
//! ```text
//! max  Σ_t ν_t (1−λ) sᵀQ_t ê  − λ Σ_c (ε⁺_c + ε⁻_c)
//! s.t. Σ_t ν_t AᵀQ_t ê − ε⁺ + ε⁻ = q          (r rows)
//!      Σ_t ν_t = 1                              (1 row)
//!      ν, ε⁺, ε⁻ ≥ 0
//! ```
//!
//! The basis has only r + 1 columns. Assignment columns are priced
//! implicitly: for duals `y`, the best assignment ranks items by
//! `(1−λ)s_i − Σ_c y_c A_ic` and fills slots in order, which is optimal
//! because `ê` is decreasing.

use nalgebra::{DMatrix, DVector};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::RankingProblem;

const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
enum Column {
    /// `slots[j]` is the item in slot `j`.
    Assignment {
        slots: Vec<usize>,
        dist: Vec<f64>,
        relevance: f64,
    },
    /// `ε⁺_c`: coefficient −1 in category row `c`.
    Over(usize),
    /// `ε⁻_c`: coefficient +1 in category row `c`.
    Under(usize),
}

pub(crate) struct Outcome {
    pub matrix: Array2<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Master<'a> {
    p: &'a RankingProblem,
    r: usize,
}

impl<'a> Master<'a> {
    fn assignment(&self, slots: Vec<usize>) -> Column {
        let mut dist = vec![0.0; self.r];
        let mut relevance = 0.0;
        for (item, w) in slots.iter().zip(&self.p.position_weights) {
            relevance += w * self.p.scores[*item];
            for (d, a) in dist.iter_mut().zip(self.p.categories.row(*item)) {
                *d += w * a;
            }
        }
        Column::Assignment {
            slots,
            dist,
            relevance,
        }
    }

    fn cost(&self, col: &Column) -> f64 {
        match col {
            Column::Assignment { relevance, .. } => (1.0 - self.p.lambda) * relevance,
            Column::Over(_) | Column::Under(_) => -self.p.lambda,
        }
    }

    fn write_column(&self, col: &Column, out: &mut [f64]) {
        out.fill(0.0);
        match col {
            Column::Assignment { dist, .. } => {
                out[..self.r].copy_from_slice(dist);
                out[self.r] = 1.0;
            }
            Column::Over(c) => out[*c] = -1.0,
            Column::Under(c) => out[*c] = 1.0,
        }
    }

    /// Items ranked by adjusted score, ties to the lower index; top k kept.
    /// Only the first r duals (the category rows) enter the adjustment.
    fn best_slots(&self, y: &DVector<f64>) -> Vec<usize> {
        let lambda = self.p.lambda;
        let adjusted: Vec<f64> = (0..self.p.n())
            .map(|i| {
                let penalty: f64 = self
                    .p
                    .categories
                    .row(i)
                    .iter()
                    .zip(y.iter())
                    .map(|(a, yc)| a * yc)
                    .sum();
                (1.0 - lambda) * self.p.scores[i] - penalty
            })
            .collect();
        let mut order: Vec<usize> = (0..self.p.n()).collect();
        order.sort_by(|&a, &b| adjusted[b].total_cmp(&adjusted[a]).then(a.cmp(&b)));
        order.truncate(self.p.k());
        order
    }
}

pub(crate) fn solve(p: &RankingProblem, rel_tol: f64, max_iterations: usize) -> Result<Outcome> {
    let (n, k, r) = (p.n(), p.k(), p.r());
    let dim = r + 1;
    let master = Master { p, r };
    let q = p.target.probs();
    let rhs = DVector::from_iterator(dim, q.iter().copied().chain([1.0]));

    let max_score = p.scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let tol = rel_tol * ((1.0 - p.lambda) * max_score).max(p.lambda).max(1e-3);

    // Start from the score-sorted assignment with whichever slack absorbs
    // its deviation from q in each category.
    let mut slots: Vec<usize> = (0..n).collect();
    slots.sort_by(|&a, &b| p.scores[b].total_cmp(&p.scores[a]).then(a.cmp(&b)));
    slots.truncate(k);
    let start = master.assignment(slots);
    let mut basis: Vec<Column> = Vec::with_capacity(dim);
    if let Column::Assignment { dist, .. } = &start {
        for c in 0..r {
            basis.push(if dist[c] >= q[c] {
                Column::Over(c)
            } else {
                Column::Under(c)
            });
        }
    }
    basis.push(start);

    let mut scratch = vec![0.0; dim];
    let mut b = DMatrix::<f64>::zeros(dim, dim);
    for iteration in 0..max_iterations {
        for (j, col) in basis.iter().enumerate() {
            master.write_column(col, &mut scratch);
            for (i, v) in scratch.iter().enumerate() {
                b[(i, j)] = *v;
            }
        }
        let lu = b.clone().lu();
        let x = lu.solve(&rhs).ok_or_else(|| Error::SolverFailure {
            iterations: iteration,
            detail: "singular basis".into(),
        })?;
        let costs = DVector::from_iterator(dim, basis.iter().map(|c| master.cost(c)));
        let y = b
            .transpose()
            .lu()
            .solve(&costs)
            .ok_or_else(|| Error::SolverFailure {
                iterations: iteration,
                detail: "singular basis transpose".into(),
            })?;

        // Pricing: the best assignment against every slack column.
        let candidate = master.assignment(master.best_slots(&y));
        master.write_column(&candidate, &mut scratch);
        let dot = |col: &[f64]| col.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>();
        let mut best = (master.cost(&candidate) - dot(&scratch), candidate);
        for c in 0..r {
            for col in [Column::Over(c), Column::Under(c)] {
                let d = master.cost(&col) - if matches!(col, Column::Over(_)) { -y[c] } else { y[c] };
                if d > best.0 {
                    best = (d, col);
                }
            }
        }
        let (reduced_cost, entering) = best;
        if reduced_cost <= tol || basis.contains(&entering) {
            return Ok(finish(p, &basis, &x, costs.dot(&x), iteration));
        }

        master.write_column(&entering, &mut scratch);
        let direction = lu
            .solve(&DVector::from_column_slice(&scratch))
            .ok_or_else(|| Error::SolverFailure {
                iterations: iteration,
                detail: "singular basis in ratio test".into(),
            })?;
        let mut leave: Option<(usize, f64, f64)> = None;
        for i in 0..dim {
            let alpha = direction[i];
            if alpha <= PIVOT_TOL {
                continue;
            }
            let ratio = x[i].max(0.0) / alpha;
            let better = match leave {
                None => true,
                Some((_, best_ratio, best_alpha)) => {
                    ratio < best_ratio - 1e-13 || (ratio <= best_ratio + 1e-13 && alpha > best_alpha)
                }
            };
            if better {
                leave = Some((i, ratio, alpha));
            }
        }
        let Some((leave, _, _)) = leave else {
            return Err(Error::SolverFailure {
                iterations: iteration,
                detail: "unbounded ray in a bounded master problem".into(),
            });
        };
        basis[leave] = entering;
    }
    Err(Error::SolverFailure {
        iterations: max_iterations,
        detail: "iteration limit reached (possible cycling)".into(),
    })
}

fn finish(p: &RankingProblem, basis: &[Column], x: &DVector<f64>, objective: f64, iterations: usize) -> Outcome {
    let mut matrix = Array2::zeros((p.n(), p.k()));
    for (col, weight) in basis.iter().zip(x.iter()) {
        if let Column::Assignment { slots, .. } = col {
            let weight = weight.max(0.0);
            for (j, item) in slots.iter().enumerate() {
                matrix[[*item, j]] += weight;
            }
        }
    }
    Outcome {
        matrix,
        objective,
        iterations,
    }
}
