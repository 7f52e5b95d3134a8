//! Cleanup of raw solver matrices.
//!
//! Solvers return points that satisfy their constraints only up to their own
//! feasibility tolerance. These functions reject anything outside `tolerance`
//! and otherwise push the matrix back onto the exact constraint set.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::model::{DoublyStochasticMatrix, PartialStochasticMatrix, SUM_TOL};

/// Sums within this distance of their target are left untouched.
const EXACT: f64 = 1e-14;
const MAX_PASSES: usize = 200;

fn precheck(m: &Array2<f64>, tolerance: f64, rows_exact: bool) -> Result<()> {
    if let Some(((i, j), v)) = m
        .indexed_iter()
        .find(|(_, v)| !v.is_finite() || **v < -tolerance)
    {
        return Err(Error::CorruptSolution(format!(
            "entry ({i}, {j}) is {v:e}, beyond tolerance {tolerance:e}"
        )));
    }
    for (j, s) in m.sum_axis(Axis(0)).iter().enumerate() {
        if (s - 1.0).abs() > tolerance {
            return Err(Error::CorruptSolution(format!("column {j} sums to {s}")));
        }
    }
    for (i, s) in m.sum_axis(Axis(1)).iter().enumerate() {
        let bad = if rows_exact {
            (s - 1.0).abs() > tolerance
        } else {
            *s > 1.0 + tolerance
        };
        if bad {
            return Err(Error::CorruptSolution(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Rescales columns to one and rows to one (`rows_exact`) or at most one,
/// alternating until both hold to [`EXACT`]. Returns whether it converged;
/// supports that need some entries driven to zero converge very slowly.
fn balance(m: &mut Array2<f64>, rows_exact: bool) -> bool {
    m.mapv_inplace(|v| v.max(0.0));
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for mut col in m.columns_mut() {
            let s = col.sum();
            if s > 0.0 && (s - 1.0).abs() > EXACT {
                col /= s;
                changed = true;
            }
        }
        for mut row in m.rows_mut() {
            let s = row.sum();
            let fix = if rows_exact {
                s > 0.0 && (s - 1.0).abs() > EXACT
            } else {
                s > 1.0 + EXACT
            };
            if fix {
                row /= s;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
    false
}

/// Exact fallback for when [`balance`] stalls: normalizes the columns, then
/// moves each over-full row's excess into rows with room, within the same
/// column, so column sums are untouched. With `rows_exact` the room is every
/// row's shortfall below one, which adds up to the total excess.
fn shift_row_excess(m: &mut Array2<f64>) {
    for mut col in m.columns_mut() {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        }
    }
    let sums = m.sum_axis(Axis(1));
    let mut room: Vec<(usize, f64)> = sums
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < 1.0)
        .map(|(i, s)| (i, 1.0 - s))
        .collect();
    let mut next = 0;
    for (i, s) in sums.iter().enumerate() {
        let mut excess = s - 1.0;
        for j in 0..m.ncols() {
            while excess > 0.0 && m[[i, j]] > 0.0 && next < room.len() {
                let (target, space) = &mut room[next];
                let amount = excess.min(m[[i, j]]).min(*space);
                m[[i, j]] -= amount;
                m[[*target, j]] += amount;
                excess -= amount;
                *space -= amount;
                if *space <= 0.0 {
                    next += 1;
                }
            }
        }
    }
}

/// Turns a raw n×k solver matrix into a [`PartialStochasticMatrix`].
///
/// Negatives down to `-tolerance` are clamped to zero, columns are rescaled to
/// sum to one and rows exceeding one are scaled back, repeatedly, until the
/// result holds at [`SUM_TOL`]. Anything further out than `tolerance` is a
/// [`Error::CorruptSolution`].
pub fn sanitize(
    raw: &Array2<f64>,
    row_items: Vec<usize>,
    tolerance: f64,
) -> Result<PartialStochasticMatrix> {
    precheck(raw, tolerance, false)?;
    let mut m = raw.clone();
    if !balance(&mut m, false) {
        shift_row_excess(&mut m);
    }
    let cols_ok = m
        .sum_axis(Axis(0))
        .iter()
        .all(|s| (s - 1.0).abs() <= SUM_TOL);
    let rows_ok = m.sum_axis(Axis(1)).iter().all(|s| *s <= 1.0 + SUM_TOL);
    if !(cols_ok && rows_ok) {
        return Err(Error::CorruptSolution(
            "matrix could not be balanced onto the partial stochastic set".into(),
        ));
    }
    Ok(PartialStochasticMatrix::from_parts_unchecked(m, row_items))
}

/// Square counterpart of [`sanitize`]: every row and column must end at one.
pub fn sanitize_doubly_stochastic(
    raw: &Array2<f64>,
    item_map: Vec<usize>,
    tolerance: f64,
) -> Result<DoublyStochasticMatrix> {
    if !raw.is_square() {
        return Err(Error::CorruptSolution(format!(
            "expected a square matrix, got {:?}",
            raw.dim()
        )));
    }
    precheck(raw, tolerance, true)?;
    let mut m = raw.clone();
    if !balance(&mut m, true) {
        shift_row_excess(&mut m);
    }
    DoublyStochasticMatrix::with_tolerance(m, item_map, SUM_TOL)
        .map_err(|e| Error::CorruptSolution(e.to_string()))
}
