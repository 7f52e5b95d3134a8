//! From an LP placement matrix to an executable stochastic ranking policy.
//!
//! [`drop_zero_rows`] removes items the placement never shows,
//! [`augment_and_get_ds`] completes the remaining n'×k matrix to a square
//! doubly stochastic one by filling extra zero-weight positions, and
//! [`bvn_decompose`] peels off permutations one perfect matching at a time.
//! [`sample`] draws a ranking from the result.

mod io;
mod matching;

use ndarray::{s, Array2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

pub use io::{read_policy, relabel, write_policy};
pub use matching::maximum_matching;

use crate::data::seeded_rng;
use crate::error::{Error, Result};
use crate::lp::sanitize;
use crate::model::{
    DoublyStochasticMatrix, PartialStochasticMatrix, PermutationRanking, PolicyComponent, RankingPolicy, SUM_TOL,
};

pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-9;
pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Residual entries at or below this are treated as zero during
/// decomposition.
const SUPPORT_TOL: f64 = 1e-13;

/// Removes rows whose total mass is below `threshold` and rebalances the
/// columns so they sum to one again.
pub fn drop_zero_rows(m: &PartialStochasticMatrix, threshold: f64) -> Result<PartialStochasticMatrix> {
    let sums = m.values().sum_axis(Axis(1));
    let keep: Vec<usize> = (0..m.nrows()).filter(|i| sums[*i] >= threshold).collect();
    if keep.len() == m.nrows() {
        return Ok(m.clone());
    }
    if keep.len() < m.ncols() {
        return Err(Error::InconsistentInput(format!(
            "only {} rows above {threshold:e} for {} positions",
            keep.len(),
            m.ncols()
        )));
    }
    let values = m.values().select(Axis(0), &keep);
    let row_items = keep.iter().map(|i| m.row_items()[*i]).collect();
    let dropped = m.nrows() - keep.len();
    sanitize(&values, row_items, dropped as f64 * threshold + SUM_TOL)
}

/// Appends `m' − k` columns to an m'×k partial matrix so that every row also
/// sums to one.
///
/// Each new column is filled greedily: repeatedly give the row with the
/// largest remaining deficit (lowest index on ties) as much as fits, until the
/// column holds one unit. The last column takes whatever is left. The first k
/// columns are copied unchanged.
pub fn augment_and_get_ds(m: &PartialStochasticMatrix) -> Result<DoublyStochasticMatrix> {
    let (rows, k) = m.values().dim();
    let mut deficit: Vec<f64> = m.values().sum_axis(Axis(1)).iter().map(|s| (1.0 - s).max(0.0)).collect();
    let total: f64 = deficit.iter().sum();
    let extra = rows - k;
    if (total - extra as f64).abs() > SUM_TOL * (1.0 + rows as f64) {
        return Err(Error::InconsistentInput(format!(
            "row deficits sum to {total}, expected {extra}"
        )));
    }
    let mut out = Array2::zeros((rows, rows));
    out.slice_mut(s![.., ..k]).assign(m.values());
    for t in 0..extra {
        let col = k + t;
        if t + 1 == extra {
            for (i, d) in deficit.iter_mut().enumerate() {
                out[[i, col]] = *d;
                *d = 0.0;
            }
            break;
        }
        let mut room = 1.0;
        while room > 0.0 {
            let Some((i, &d)) = deficit
                .iter()
                .enumerate()
                .filter(|(_, d)| **d > 0.0)
                .fold(None, |best: Option<(usize, &f64)>, cur| match best {
                    Some(b) if *b.1 >= *cur.1 => Some(b),
                    _ => Some(cur),
                })
            else {
                break;
            };
            let amount = d.min(room);
            out[[i, col]] += amount;
            deficit[i] -= amount;
            room -= amount;
        }
    }
    DoublyStochasticMatrix::with_tolerance(out, m.row_items().to_vec(), SUM_TOL * (1.0 + rows as f64))
}

fn support(residual: &Array2<f64>) -> Vec<Vec<usize>> {
    residual
        .rows()
        .into_iter()
        .map(|row| row.iter().enumerate().filter(|(_, v)| **v > SUPPORT_TOL).map(|(j, _)| j).collect())
        .collect()
}

/// Largest row or column sum of the residual, and the spread of all those
/// sums around their mean.
fn residual_spread(residual: &Array2<f64>) -> (f64, f64) {
    let rows = residual.sum_axis(Axis(1));
    let cols = residual.sum_axis(Axis(0));
    let all: Vec<f64> = rows.iter().chain(cols.iter()).copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let spread = all.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    (mean, spread)
}

/// Writes `p` as a convex combination of permutations.
///
/// Each step finds a perfect matching on the support of the residual (warm
/// started from the previous one), takes its smallest residual entry as the
/// weight, and subtracts. Stops once the residual's total mass drops below
/// `residual_tolerance`, then renormalizes the weights.
///
/// A missing perfect matching is only accepted when the residual is so small
/// that imbalance in the input explains it; otherwise it is a
/// [`Error::DecompositionFailure`].
pub fn bvn_decompose(p: &DoublyStochasticMatrix, residual_tolerance: f64) -> Result<RankingPolicy> {
    let m = p.size();
    let items = p.item_map().to_vec();
    let mut residual = p.values().mapv(|v| if v > SUPPORT_TOL { v } else { 0.0 });
    let mut components = Vec::new();
    let mut previous: Option<Vec<Option<usize>>> = None;

    while residual.sum() >= residual_tolerance {
        let adj = support(&residual);
        let matching = maximum_matching(&adj, m, previous.as_deref());
        if matching.iter().any(Option::is_none) {
            let (level, spread) = residual_spread(&residual);
            let explained = m as f64 * spread + (m * m) as f64 * SUPPORT_TOL + residual_tolerance;
            if level <= explained {
                break;
            }
            return Err(Error::DecompositionFailure {
                component: components.len(),
                residual: residual.sum(),
            });
        }
        let pairs: Vec<(usize, usize)> = matching.iter().enumerate().map(|(i, j)| (i, j.unwrap())).collect();
        let theta = pairs.iter().map(|&(i, j)| residual[[i, j]]).fold(f64::INFINITY, f64::min);
        for &(i, j) in &pairs {
            let v = residual[[i, j]] - theta;
            residual[[i, j]] = if v > SUPPORT_TOL { v } else { 0.0 };
        }
        let mut order = vec![0; m];
        for &(i, j) in &pairs {
            order[j] = items[i];
        }
        components.push(PolicyComponent {
            theta,
            ranking: PermutationRanking::from_order_unchecked(order),
        });
        previous = Some(matching);
    }
    if components.is_empty() {
        return Err(Error::DecompositionFailure { component: 0, residual: residual.sum() });
    }
    let total: f64 = components.iter().map(|c| c.theta).sum();
    for c in &mut components {
        c.theta /= total;
    }
    RankingPolicy::new(items, components)
}

/// Picks component `i` with probability `θ_i`, deterministically per seed.
pub fn sample(policy: &RankingPolicy, seed: u64) -> PermutationRanking {
    let comps = policy.components();
    if comps.len() == 1 {
        return comps[0].ranking.clone();
    }
    let index = WeightedIndex::new(comps.iter().map(|c| c.theta)).expect("policy weights are positive");
    comps[index.sample(&mut seeded_rng(seed, 0))].ranking.clone()
}

/// `Σ θ_i Qⁱ` with rows in the order of `policy.items()`.
pub fn expected_matrix(policy: &RankingPolicy) -> Result<DoublyStochasticMatrix> {
    let items = policy.items().to_vec();
    let m = items.len();
    let mut out = Array2::zeros((m, m));
    for c in policy.components() {
        out.scaled_add(c.theta, &c.ranking.to_matrix(&items)?);
    }
    DoublyStochasticMatrix::with_tolerance(out, items, SUM_TOL * (1.0 + m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(values: Array2<f64>) -> DoublyStochasticMatrix {
        let m = values.nrows();
        DoublyStochasticMatrix::new(values, (0..m).collect()).unwrap()
    }

    #[test]
    fn drop_exact_zero_rows() {
        let mut v = Array2::zeros((10, 3));
        for j in 0..3 {
            v[[j, j]] = 0.5;
            v[[j + 3, j]] = 0.25;
            v[[j + 6 - (j / 2), j]] += 0.25;
        }
        let m = PartialStochasticMatrix::new(v.clone(), (0..10).collect()).unwrap();
        let kept = drop_zero_rows(&m, DEFAULT_DROP_THRESHOLD).unwrap();
        let zero_rows = (0..10).filter(|i| v.row(*i).sum() == 0.0).count();
        assert_eq!(kept.nrows(), 10 - zero_rows);
        assert_eq!(kept.row_items().len(), kept.nrows());
    }

    #[test]
    fn drop_is_identity_without_zero_rows() {
        let m = PartialStochasticMatrix::new(array![[0.5], [0.5]], vec![0, 1]).unwrap();
        assert_eq!(drop_zero_rows(&m, 1e-9).unwrap(), m);
    }

    #[test]
    fn augment_square_input_unchanged() {
        let v = array![[0.3, 0.7], [0.7, 0.3]];
        let m = PartialStochasticMatrix::new(v.clone(), vec![0, 1]).unwrap();
        assert_eq!(augment_and_get_ds(&m).unwrap().values(), &v);
    }

    #[test]
    fn augment_two_by_one() {
        let m = PartialStochasticMatrix::new(array![[0.5], [0.5]], vec![0, 1]).unwrap();
        assert_eq!(augment_and_get_ds(&m).unwrap().values(), &array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn augment_rejects_bad_deficit() {
        let m = PartialStochasticMatrix::from_parts_unchecked(array![[0.5], [0.3]], vec![0, 1]);
        assert!(matches!(augment_and_get_ds(&m), Err(Error::InconsistentInput(_))));
    }

    #[test]
    fn permutation_is_one_component() {
        let p = ds(array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        let policy = bvn_decompose(&p, DEFAULT_RESIDUAL_TOLERANCE).unwrap();
        assert_eq!(policy.len(), 1);
        assert_eq!(policy.components()[0].theta, 1.0);
        assert_eq!(policy.components()[0].ranking.order(), &[2, 0, 1]);
    }

    #[test]
    fn two_by_two() {
        let p = ds(array![[0.3, 0.7], [0.7, 0.3]]);
        let policy = bvn_decompose(&p, DEFAULT_RESIDUAL_TOLERANCE).unwrap();
        let mut got: Vec<(f64, Vec<usize>)> = policy
            .components()
            .iter()
            .map(|c| ((c.theta * 1e12).round() / 1e12, c.ranking.order().to_vec()))
            .collect();
        got.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(got, vec![(0.3, vec![0, 1]), (0.7, vec![1, 0])]);
    }

    #[test]
    fn expected_matrix_cases() {
        let single = RankingPolicy::deterministic(PermutationRanking::new(vec![1, 0]).unwrap());
        assert_eq!(expected_matrix(&single).unwrap().values(), &array![[0.0, 1.0], [1.0, 0.0]]);
        let mixed = RankingPolicy::new(
            vec![0, 1],
            vec![
                PolicyComponent { theta: 0.5, ranking: PermutationRanking::identity(2) },
                PolicyComponent { theta: 0.5, ranking: PermutationRanking::new(vec![1, 0]).unwrap() },
            ],
        )
        .unwrap();
        assert_eq!(expected_matrix(&mixed).unwrap().values(), &array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn sampling_is_seeded() {
        let policy = RankingPolicy::new(
            vec![0, 1],
            vec![
                PolicyComponent { theta: 0.3, ranking: PermutationRanking::identity(2) },
                PolicyComponent { theta: 0.7, ranking: PermutationRanking::new(vec![1, 0]).unwrap() },
            ],
        )
        .unwrap();
        assert_eq!(sample(&policy, 11), sample(&policy, 11));
        let single = RankingPolicy::deterministic(PermutationRanking::identity(3));
        assert_eq!(sample(&single, 5), PermutationRanking::identity(3));
    }
}
