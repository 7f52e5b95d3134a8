//! Greedy comparison methods and plain score sorting.
//!
//! Both greedy variants score candidates by relevance minus λ times a
//! smoothed KL divergence `KL(q ‖ (1 − α)p + αq)`. They differ in how the
//! relevance and the mixture `p` of the selected prefix are formed:
//! [`greedy_simple`] uses plain sums and means, [`greedy_weighted`] weights
//! each slot by its position weight. Ties go to the lower item index, and the
//! unselected items follow in score order.

use crate::metrics::kl_smoothed;
use crate::model::{PermutationRanking, RankingProblem};

pub const DEFAULT_ALPHA: f64 = 0.01;

/// Items by descending score, ties by lower index.
pub fn score_sort(p: &RankingProblem) -> PermutationRanking {
    PermutationRanking::from_order_unchecked(score_order(&p.scores, &[]))
}

fn score_order(scores: &[f64], exclude: &[usize]) -> Vec<usize> {
    let mut taken = vec![false; scores.len()];
    exclude.iter().for_each(|i| taken[*i] = true);
    let mut order: Vec<usize> = (0..scores.len()).filter(|i| !taken[*i]).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b)));
    order
}

/// Unweighted set selection: each step adds the item maximizing
/// `(1 − λ)·Σ_{i∈I} s_i − λ·KL(q ‖ mean of rows over I)`.
pub fn greedy_simple(p: &RankingProblem) -> PermutationRanking {
    greedy_simple_with(p, DEFAULT_ALPHA)
}

pub fn greedy_simple_with(p: &RankingProblem, alpha: f64) -> PermutationRanking {
    greedy(p, alpha, |_| 1.0)
}

/// Position-weighted greedy: slot `t` takes the item maximizing
/// `(1 − λ)·Σ_{j≤t} ê_j s_{i_j} − λ·KL(q ‖ Σ_{j≤t} ê_j A_{i_j} / Σ_{j≤t} ê_j)`.
pub fn greedy_weighted(p: &RankingProblem) -> PermutationRanking {
    greedy_weighted_with(p, DEFAULT_ALPHA)
}

pub fn greedy_weighted_with(p: &RankingProblem, alpha: f64) -> PermutationRanking {
    greedy(p, alpha, |t| p.position_weights[t])
}

fn greedy(p: &RankingProblem, alpha: f64, slot_weight: impl Fn(usize) -> f64) -> PermutationRanking {
    let (n, k, r) = (p.n(), p.k(), p.r());
    let lambda = p.lambda;
    let q = p.target.probs();
    let mut used = vec![false; n];
    let mut chosen = Vec::with_capacity(n);
    let mut relevance = 0.0;
    let mut mass = 0.0;
    let mut mixture = vec![0.0; r];
    let mut candidate = vec![0.0; r];

    for t in 0..k {
        let w = slot_weight(t);
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !used[*i]) {
            let row = p.categories.row(i);
            let total = mass + w;
            for c in 0..r {
                candidate[c] = (mixture[c] + w * row[c]) / total;
            }
            let objective = (1.0 - lambda) * (relevance + w * p.scores[i]) - lambda * kl_smoothed(q, &candidate, alpha);
            if best.map_or(true, |(_, b)| objective > b) {
                best = Some((i, objective));
            }
        }
        let (i, _) = best.expect("k ≤ n leaves a candidate at every step");
        used[i] = true;
        chosen.push(i);
        relevance += w * p.scores[i];
        mass += w;
        for (m, a) in mixture.iter_mut().zip(p.categories.row(i)) {
            *m += w * a;
        }
    }
    let rest = score_order(&p.scores, &chosen);
    chosen.extend(rest);
    PermutationRanking::from_order_unchecked(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_position_weights, CategoryDistribution, PositionWeightKind};
    use ndarray::{array, Array2};

    fn problem(scores: Vec<f64>, a: Array2<f64>, q: Vec<f64>, k: usize, lambda: f64) -> RankingProblem {
        RankingProblem::new(
            scores,
            make_position_weights(PositionWeightKind::Log, k).unwrap(),
            a,
            CategoryDistribution::new(q).unwrap(),
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn score_sort_examples() {
        let p = problem(vec![1.0, 3.0, 2.0], Array2::from_elem((3, 1), 1.0), vec![1.0], 1, 0.0);
        assert_eq!(score_sort(&p).order(), &[1, 2, 0]);
        let p = problem(vec![1.0, 1.0, 1.0], Array2::from_elem((3, 1), 1.0), vec![1.0], 1, 0.0);
        assert_eq!(score_sort(&p).order(), &[0, 1, 2]);
    }

    #[test]
    fn lambda_zero_is_score_order() {
        let a = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [1.0, 0.0], [0.0, 1.0]];
        let p = problem(vec![0.1, 0.9, 0.5, 0.3, 0.7], a, vec![0.5, 0.5], 3, 0.0);
        assert_eq!(greedy_simple(&p).order(), score_sort(&p).order());
        assert_eq!(greedy_weighted(&p).order(), score_sort(&p).order());
    }

    #[test]
    fn lambda_one_picks_only_target_category() {
        let a = array![[0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]];
        let p = problem(vec![0.9, 0.1, 0.8, 0.2, 0.3], a, vec![1.0, 0.0], 3, 1.0);
        for ranking in [greedy_simple(&p), greedy_weighted(&p)] {
            let mut top = ranking.top(3).to_vec();
            top.sort_unstable();
            assert_eq!(top, vec![1, 3, 4]);
        }
    }

    #[test]
    fn single_item() {
        let p = problem(vec![0.4], array![[1.0]], vec![1.0], 1, 0.5);
        assert_eq!(greedy_weighted(&p).order(), &[0]);
    }

    #[test]
    fn rest_in_score_order() {
        let a = Array2::from_elem((4, 1), 1.0);
        let p = problem(vec![0.1, 0.4, 0.3, 0.2], a, vec![1.0], 1, 0.0);
        assert_eq!(greedy_weighted(&p).order(), &[1, 2, 3, 0]);
    }
}
