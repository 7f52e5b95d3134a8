//! Seeded synthetic instances and user corpora for tests and desk-scale
//! sweeps.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::data::scores::EvalCase;
use crate::data::split::seeded_rng;
use crate::error::{Error, Result};
use crate::metrics::distribution_from_exposure;
use crate::model::{make_position_weights, CategoryDistribution, ItemId, PositionWeightKind, RankingProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreDistribution {
    #[default]
    Uniform,
    Exponential,
    /// Absolute value of a standard normal.
    HalfNormal,
}

impl FromStr for ScoreDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(Self::Uniform),
            "exponential" => Ok(Self::Exponential),
            "half_normal" => Ok(Self::HalfNormal),
            other => Err(Error::invalid(format!("unknown score distribution {other:?}"))),
        }
    }
}

impl fmt::Display for ScoreDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Exponential => "exponential",
            Self::HalfNormal => "half_normal",
        })
    }
}

impl ScoreDistribution {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            Self::Uniform => rng.random(),
            Self::Exponential => Exp1.sample(rng),
            Self::HalfNormal => {
                let z: f64 = StandardNormal.sample(rng);
                z.abs()
            }
        }
    }
}

/// Each item belongs to between 1 and `ceil((1 − sparsity)·r)` distinct
/// categories with equal weight.
fn category_rows<R: Rng>(rng: &mut R, n: usize, r: usize, sparsity: f64) -> Array2<f64> {
    let max_g = (((1.0 - sparsity) * r as f64).ceil() as usize).clamp(1, r);
    let mut a = Array2::zeros((n, r));
    for i in 0..n {
        let g = rng.random_range(1..=max_g);
        let w = 1.0 / g as f64;
        for c in sample(rng, r, g) {
            a[[i, c]] = w;
        }
    }
    a
}

/// Random convex combination of item rows, half of it from the induced
/// distribution of a random ordered top-k selection, so it is near the
/// achievable set.
fn near_achievable_target<R: Rng>(rng: &mut R, a: &Array2<f64>, weights: &[f64]) -> CategoryDistribution {
    let (n, r) = a.dim();
    let mut exposure = vec![0.0; n];
    for (slot, item) in sample(rng, n, weights.len()).into_iter().enumerate() {
        exposure[item] = weights[slot];
    }
    let chosen = distribution_from_exposure(a, &exposure);
    let mix: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
    let total: f64 = mix.iter().sum();
    let mixed: Vec<f64> = mix.iter().map(|m| m / total).collect();
    let spread = distribution_from_exposure(a, &mixed);
    let mut q: Vec<f64> = chosen.iter().zip(&spread).map(|(c, s)| 0.5 * c + 0.5 * s).collect();
    let sum: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= sum);
    debug_assert_eq!(q.len(), r);
    CategoryDistribution::new_unchecked(q)
}

/// A random problem with logarithmic position weights and λ = 0.5.
pub fn synthetic_instance(
    seed: u64,
    n: usize,
    k: usize,
    r: usize,
    scores: ScoreDistribution,
    category_sparsity: f64,
) -> Result<RankingProblem> {
    if n == 0 || k == 0 || r == 0 || k > n {
        return Err(Error::invalid(format!("need 0 < k ≤ n and r > 0, got n={n} k={k} r={r}")));
    }
    if !(0.0..1.0).contains(&category_sparsity) {
        return Err(Error::invalid(format!("category sparsity {category_sparsity} outside [0, 1)")));
    }
    let mut rng = seeded_rng(seed, 0);
    let s: Vec<f64> = (0..n).map(|_| scores.draw(&mut rng)).collect();
    let a = category_rows(&mut rng, n, r, category_sparsity);
    let e = make_position_weights(PositionWeightKind::Log, k)?;
    let q = near_achievable_target(&mut rng, &a, &e);
    RankingProblem::new(s, e, a, q, 0.5)
}

/// Shape of a synthetic user corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub users: usize,
    pub n: usize,
    pub r: usize,
    pub category_sparsity: f64,
    /// Fraction of each user's candidates that are relevant.
    pub relevant_frac: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            users: 50,
            n: 60,
            r: 8,
            category_sparsity: 0.75,
            relevant_frac: 0.15,
        }
    }
}

/// Users whose model scores are skewed toward globally popular categories
/// while their own taste (and hence target and relevant items) is not.
///
/// Each user has a taste vector `τ`. An item's true utility mixes a latent
/// quality, its affinity to `τ` and noise; the top `relevant_frac` by utility
/// are relevant. The model score mixes the same latent quality with the
/// item's affinity to a shared popularity profile. The target is `τ` as seen
/// through the candidates' category rows.
pub fn synthetic_corpus(spec: &CorpusSpec, seed: u64) -> Result<Vec<EvalCase>> {
    let CorpusSpec { users, n, r, category_sparsity, relevant_frac } = *spec;
    if users == 0 || n == 0 || r == 0 {
        return Err(Error::invalid("corpus needs users, items and categories"));
    }
    if !(0.0..1.0).contains(&category_sparsity) || !(0.0..=1.0).contains(&relevant_frac) {
        return Err(Error::invalid("sparsity must be in [0, 1) and relevant fraction in [0, 1]"));
    }
    let mut shared = seeded_rng(seed, u64::MAX - 1);
    let popular: Vec<f64> = simplex_point(&mut shared, r);

    (0..users as u64)
        .map(|user| {
            let mut rng = seeded_rng(seed, user);
            let a = category_rows(&mut rng, n, r, category_sparsity);
            let taste = simplex_point(&mut rng, r);
            let quality: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let dot = |row: usize, v: &[f64]| -> f64 { (0..r).map(|c| a[[row, c]] * v[c]).sum::<f64>() * r as f64 };
            let scores: Vec<f64> = (0..n).map(|i| 0.5 * quality[i] + 0.5 * dot(i, &popular).min(2.0)).collect();
            let utility: Vec<f64> = (0..n)
                .map(|i| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    0.5 * quality[i] + 0.5 * dot(i, &taste).min(2.0) + 0.2 * noise
                })
                .collect();
            let mut by_utility: Vec<usize> = (0..n).collect();
            by_utility.sort_by(|x, y| utility[*y].total_cmp(&utility[*x]).then(x.cmp(y)));
            let take = ((relevant_frac * n as f64).round() as usize).max(1);
            let relevant: HashSet<usize> = by_utility.into_iter().take(take).collect();

            let weights: Vec<f64> = (0..n).map(|i| dot(i, &taste)).collect();
            let total: f64 = weights.iter().sum();
            let exposure: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let q = distribution_from_exposure(&a, &exposure);
            let sum: f64 = q.iter().sum();
            let target = CategoryDistribution::new_unchecked(q.into_iter().map(|v| v / sum).collect());
            Ok(EvalCase {
                user,
                items: (0..n as u64).map(ItemId).collect(),
                scores,
                categories: a,
                target,
                relevant,
            })
        })
        .collect()
}

/// Uniform point on the probability simplex.
fn simplex_point<R: Rng>(rng: &mut R, r: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..r).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|x| x / total).collect()
}
