//! Evaluation quantities.
//!
//! Everything here goes through per-item exposure: a placement (partial or
//! doubly stochastic matrix, permutation, or whole policy) together with the
//! position weights yields the expected exposure `x` of every item, and the
//! induced category distribution and expected relevance are `Aᵀx` and `sᵀx`.

use std::collections::HashSet;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{
    CategoryDistribution, DoublyStochasticMatrix, PartialStochasticMatrix, PermutationRanking,
    RankingPolicy,
};

/// Anything that places items into positions, possibly at random.
pub trait Placement {
    /// Expected exposure of each of the `n_items` problem items when position
    /// `j` carries weight `weights[j]` (positions past the end carry none).
    fn item_exposure(&self, weights: &[f64], n_items: usize) -> Result<Vec<f64>>;
}

fn matrix_exposure(
    values: &Array2<f64>,
    row_items: &[usize],
    weights: &[f64],
    n_items: usize,
) -> Result<Vec<f64>> {
    if weights.len() > values.ncols() {
        return Err(Error::invalid(format!(
            "{} position weights for {} columns",
            weights.len(),
            values.ncols()
        )));
    }
    let mut x = vec![0.0; n_items];
    for (row, item) in row_items.iter().enumerate() {
        let slot = x
            .get_mut(*item)
            .ok_or_else(|| Error::invalid(format!("item {item} out of range for {n_items} items")))?;
        *slot += values
            .row(row)
            .iter()
            .zip(weights)
            .map(|(p, w)| p * w)
            .sum::<f64>();
    }
    Ok(x)
}

impl Placement for PartialStochasticMatrix {
    fn item_exposure(&self, weights: &[f64], n_items: usize) -> Result<Vec<f64>> {
        matrix_exposure(self.values(), self.row_items(), weights, n_items)
    }
}

impl Placement for DoublyStochasticMatrix {
    fn item_exposure(&self, weights: &[f64], n_items: usize) -> Result<Vec<f64>> {
        matrix_exposure(self.values(), self.item_map(), weights, n_items)
    }
}

impl Placement for PermutationRanking {
    fn item_exposure(&self, weights: &[f64], n_items: usize) -> Result<Vec<f64>> {
        if weights.len() > self.len() {
            return Err(Error::invalid(format!(
                "{} position weights for a ranking of {}",
                weights.len(),
                self.len()
            )));
        }
        let mut x = vec![0.0; n_items];
        for (item, w) in self.order().iter().zip(weights) {
            *x.get_mut(*item).ok_or_else(|| {
                Error::invalid(format!("item {item} out of range for {n_items} items"))
            })? += w;
        }
        Ok(x)
    }
}

impl Placement for RankingPolicy {
    fn item_exposure(&self, weights: &[f64], n_items: usize) -> Result<Vec<f64>> {
        let mut x = vec![0.0; n_items];
        for c in self.components() {
            for (acc, v) in x.iter_mut().zip(c.ranking.item_exposure(weights, n_items)?) {
                *acc += c.theta * v;
            }
        }
        Ok(x)
    }
}

/// `Aᵀx` for an exposure vector `x`.
pub fn distribution_from_exposure(a: &Array2<f64>, exposure: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; a.ncols()];
    for (row, x) in a.rows().into_iter().zip(exposure) {
        if *x != 0.0 {
            for (pc, av) in p.iter_mut().zip(row) {
                *pc += av * x;
            }
        }
    }
    p
}

/// Category exposure `AᵀPe` induced by a placement.
///
/// The result is returned as computed, without renormalization, so that its
/// sum can be checked.
pub fn induced_distribution<P: Placement + ?Sized>(
    a: &Array2<f64>,
    placement: &P,
    weights: &[f64],
) -> Result<CategoryDistribution> {
    let x = placement.item_exposure(weights, a.nrows())?;
    Ok(CategoryDistribution::new_unchecked(
        distribution_from_exposure(a, &x),
    ))
}

/// Expected relevance `sᵀPe`.
pub fn expected_relevance<P: Placement + ?Sized>(
    scores: &[f64],
    placement: &P,
    weights: &[f64],
) -> Result<f64> {
    let x = placement.item_exposure(weights, scores.len())?;
    Ok(scores.iter().zip(&x).map(|(s, x)| s * x).sum())
}

/// Smoothed KL divergence on raw slices; see [`kl_divergence`].
pub fn kl_smoothed(q: &[f64], p: &[f64], alpha: f64) -> f64 {
    let mut kl = 0.0;
    for (qi, pi) in q.iter().zip(p) {
        if *qi <= 0.0 {
            continue;
        }
        let smoothed = (1.0 - alpha) * pi + alpha * qi;
        if smoothed <= 0.0 {
            return f64::INFINITY;
        }
        kl += qi * (qi.ln() - smoothed.ln());
    }
    kl.max(0.0)
}

/// `KL(q ‖ p̃)` with `p̃ = (1 − α)p + αq`.
///
/// Terms with `q_i = 0` contribute nothing. With `α = 0` and some `p_i = 0 <
/// q_i` the divergence is `+∞`.
pub fn kl_divergence(q: &CategoryDistribution, p: &CategoryDistribution, alpha: f64) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::invalid(format!(
            "KL between distributions of length {} and {}",
            q.len(),
            p.len()
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("smoothing {alpha} outside [0, 1)")));
    }
    Ok(kl_smoothed(q.probs(), p.probs(), alpha))
}

pub fn l1_slices(q: &[f64], p: &[f64]) -> f64 {
    q.iter().zip(p).map(|(a, b)| (a - b).abs()).sum()
}

/// `Σ |q_i − p_i|`.
pub fn l1_deviation(q: &CategoryDistribution, p: &CategoryDistribution) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::invalid(format!(
            "L1 between distributions of length {} and {}",
            q.len(),
            p.len()
        )));
    }
    Ok(l1_slices(q.probs(), p.probs()))
}

/// NDCG@k with binary gains and `1/log2(position + 1)` discounts.
///
/// The ideal DCG places `min(k, |relevant|)` relevant items at the top.
pub fn ndcg_at_k(ranking: &[usize], relevant: &HashSet<usize>, k: usize) -> f64 {
    let ideal_hits = k.min(relevant.len());
    if ideal_hits == 0 {
        return 0.0;
    }
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(pos, _)| discount(pos))
        .sum();
    let ideal: f64 = (0..ideal_hits).map(discount).sum();
    dcg / ideal
}

/// Reciprocal rank of the first relevant item within the top `k`, else 0.
pub fn mrr(ranking: &[usize], relevant: &HashSet<usize>, k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|item| relevant.contains(item))
        .map_or(0.0, |pos| 1.0 / (pos + 1) as f64)
}

/// θ-weighted average of a per-ranking metric over a policy's components.
pub fn expected_over_policy(policy: &RankingPolicy, metric: impl Fn(&PermutationRanking) -> f64) -> f64 {
    policy
        .components()
        .iter()
        .map(|c| c.theta * metric(&c.ranking))
        .sum()
}

/// `Σ θ_i KL(q ‖ p(Qⁱ))`: the divergence a user actually experiences on
/// average, as opposed to the divergence of the mean placement.
pub fn expected_kl_of_policy(
    policy: &RankingPolicy,
    a: &Array2<f64>,
    weights: &[f64],
    q: &CategoryDistribution,
    alpha: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for c in policy.components() {
        let p = induced_distribution(a, &c.ranking, weights)?;
        total += c.theta * kl_divergence(q, &p, alpha)?;
    }
    Ok(total)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
