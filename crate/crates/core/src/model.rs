//! Domain types shared by every stage: the per-user problem, the stochastic
//! matrices produced by the LP, permutations and the policies built from them.
//!
//! Two tolerance tiers apply throughout. Constructors reject inputs whose
//! invariants are violated by more than [`HARD_TOL`]; internal arithmetic
//! renormalizes so that sums hold to [`SUM_TOL`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Rejection tolerance for constructors.
pub const HARD_TOL: f64 = 1e-6;
/// Target precision for sums after internal renormalization.
pub const SUM_TOL: f64 = 1e-9;

/// Catalog identifier of an item, assigned at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shape of the position-weight curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PositionWeightKind {
    /// `1 / ln(j + 1)`. The log base cancels under normalization.
    Log,
    /// `1 / sqrt(j)`
    Sqrt,
    /// `1 / j`
    Reciprocal,
}

impl PositionWeightKind {
    pub const ALL: [PositionWeightKind; 3] = [Self::Log, Self::Sqrt, Self::Reciprocal];

    fn raw(self, j: usize) -> f64 {
        let j = j as f64;
        match self {
            Self::Log => 1.0 / (j + 1.0).ln(),
            Self::Sqrt => 1.0 / j.sqrt(),
            Self::Reciprocal => 1.0 / j,
        }
    }
}

impl FromStr for PositionWeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" => Ok(Self::Log),
            "sqrt" => Ok(Self::Sqrt),
            "reciprocal" | "inverse" => Ok(Self::Reciprocal),
            other => Err(Error::invalid(format!(
                "unknown position weight kind {other:?} (expected log, sqrt or reciprocal)"
            ))),
        }
    }
}

impl fmt::Display for PositionWeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Reciprocal => "reciprocal",
        })
    }
}

/// Normalized exposure weights for `k` slots, strictly decreasing.
pub fn make_position_weights(kind: PositionWeightKind, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("position weights need at least one slot"));
    }
    let raw: Vec<f64> = (1..=k).map(|j| kind.raw(j)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// A probability vector over calibration categories.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution(Vec<f64>);

impl CategoryDistribution {
    /// Validates at [`HARD_TOL`] and renormalizes to an exact distribution.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution over zero categories"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < -HARD_TOL)
        {
            return Err(Error::invalid(format!("distribution entry {i} is {p}")));
        }
        let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
        if (total - 1.0).abs() > HARD_TOL {
            return Err(Error::invalid(format!("distribution sums to {total}")));
        }
        Ok(Self(probs.into_iter().map(|p| p.max(0.0) / total).collect()))
    }

    /// Wraps a vector without checking it. Used by loaders that want to report
    /// violations through [`validate_problem`] rather than fail early.
    pub fn new_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(r: usize) -> Self {
        Self(vec![1.0 / r as f64; r])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One user's calibration instance.
///
/// `categories` is the n×r item-to-category matrix, `position_weights` the
/// non-zero prefix of the exposure vector (length k). Fields are public so
/// that malformed problems can be built and reported by [`validate_problem`];
/// every algorithm in this crate assumes a problem that validates cleanly.
#[derive(Debug, Clone)]
pub struct RankingProblem {
    pub items: Vec<ItemId>,
    pub scores: Vec<f64>,
    pub position_weights: Vec<f64>,
    pub categories: Array2<f64>,
    pub target: CategoryDistribution,
    pub lambda: f64,
}

impl RankingProblem {
    /// Builds a problem with items numbered `0..n` and rejects it if any
    /// invariant fails.
    pub fn new(
        scores: Vec<f64>,
        position_weights: Vec<f64>,
        categories: Array2<f64>,
        target: CategoryDistribution,
        lambda: f64,
    ) -> Result<Self> {
        let items = (0..scores.len() as u64).map(ItemId).collect();
        Self::with_items(items, scores, position_weights, categories, target, lambda)
    }

    pub fn with_items(
        items: Vec<ItemId>,
        scores: Vec<f64>,
        position_weights: Vec<f64>,
        categories: Array2<f64>,
        target: CategoryDistribution,
        lambda: f64,
    ) -> Result<Self> {
        let problem = Self {
            items,
            scores,
            position_weights,
            categories,
            target,
            lambda,
        };
        let violations = validate_problem(&problem);
        if violations.is_empty() {
            Ok(problem)
        } else {
            Err(Error::invalid(violations.join("; ")))
        }
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn k(&self) -> usize {
        self.position_weights.len()
    }

    pub fn r(&self) -> usize {
        self.categories.ncols()
    }

    /// Same problem at a different trade-off.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Exposure vector over all n positions: the k weights followed by zeros.
    pub fn full_position_weights(&self) -> Vec<f64> {
        let mut e = self.position_weights.clone();
        e.resize(self.n(), 0.0);
        e
    }

    pub fn category_row(&self, item: usize) -> ArrayView1<'_, f64> {
        self.categories.row(item)
    }
}

/// Lists every violated invariant of `p`; empty iff the problem is well formed.
pub fn validate_problem(p: &RankingProblem) -> Vec<String> {
    let mut out = Vec::new();
    let n = p.scores.len();
    let k = p.position_weights.len();
    let (rows, r) = p.categories.dim();

    if n == 0 {
        out.push("problem has no items".to_string());
    }
    if k == 0 {
        out.push("problem has no slots".to_string());
    }
    if k > n {
        out.push(format!("slot count {k} exceeds item count {n}"));
    }
    if p.items.len() != n {
        out.push(format!("{} item ids for {n} scores", p.items.len()));
    } else {
        let distinct: HashSet<_> = p.items.iter().collect();
        if distinct.len() != n {
            out.push("item ids are not unique".to_string());
        }
    }
    for (i, s) in p.scores.iter().enumerate() {
        if !s.is_finite() {
            out.push(format!("score {i} is not finite"));
        }
    }

    for (j, w) in p.position_weights.iter().enumerate() {
        if !(w.is_finite() && *w > 0.0) {
            out.push(format!("position weight {j} is not positive ({w})"));
        }
    }
    for (j, pair) in p.position_weights.windows(2).enumerate() {
        if pair[1] >= pair[0] {
            out.push(format!(
                "position weights not strictly decreasing at slot {}",
                j + 1
            ));
        }
    }
    let wsum: f64 = p.position_weights.iter().sum();
    if k > 0 && (wsum - 1.0).abs() > SUM_TOL {
        out.push(format!("position weights sum to {wsum}"));
    }

    if r == 0 {
        out.push("category matrix has no columns".to_string());
    }
    if rows != n {
        out.push(format!("category matrix has {rows} rows for {n} items"));
    }
    for (i, row) in p.categories.axis_iter(Axis(0)).enumerate() {
        if let Some((c, v)) = row
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            out.push(format!("entry ({i}, {c}) of A is {v}"));
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > SUM_TOL {
            out.push(format!("row {i} of A sums to {sum}"));
        }
    }

    let q = p.target.probs();
    if q.len() != r {
        out.push(format!("target has {} entries for {r} categories", q.len()));
    }
    if let Some((c, v)) = q.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        out.push(format!("target entry {c} is {v}"));
    }
    let qsum: f64 = q.iter().sum();
    if (qsum - 1.0).abs() > SUM_TOL {
        out.push(format!("target sums to {qsum}"));
    }

    if !(0.0..=1.0).contains(&p.lambda) {
        out.push("lambda outside [0,1]".to_string());
    }
    out
}

fn check_nonnegative(values: &Array2<f64>, what: &str) -> Result<()> {
    if let Some(((i, j), v)) = values
        .indexed_iter()
        .find(|(_, v)| !v.is_finite() || **v < -HARD_TOL)
    {
        return Err(Error::invalid(format!("{what} entry ({i}, {j}) is {v}")));
    }
    Ok(())
}

fn check_sums(sums: Array1<f64>, what: &str, ok: impl Fn(f64) -> bool) -> Result<()> {
    match sums.iter().enumerate().find(|(_, s)| !ok(**s)) {
        Some((i, s)) => Err(Error::invalid(format!("{what} {i} sums to {s}"))),
        None => Ok(()),
    }
}

/// The reduced LP variable: an n×k matrix of placement probabilities whose
/// columns sum to one and whose rows sum to at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialStochasticMatrix {
    values: Array2<f64>,
    row_items: Vec<usize>,
}

impl PartialStochasticMatrix {
    /// `row_items[i]` is the problem-local index of the item on row `i`.
    pub fn new(values: Array2<f64>, row_items: Vec<usize>) -> Result<Self> {
        if row_items.len() != values.nrows() {
            return Err(Error::invalid(format!(
                "{} row items for {} rows",
                row_items.len(),
                values.nrows()
            )));
        }
        if values.ncols() > values.nrows() {
            return Err(Error::invalid(format!(
                "{} columns exceed {} rows",
                values.ncols(),
                values.nrows()
            )));
        }
        check_nonnegative(&values, "matrix")?;
        check_sums(values.sum_axis(Axis(0)), "column", |s| {
            (s - 1.0).abs() <= HARD_TOL
        })?;
        check_sums(values.sum_axis(Axis(1)), "row", |s| s <= 1.0 + HARD_TOL)?;
        Ok(Self { values, row_items })
    }

    pub(crate) fn from_parts_unchecked(values: Array2<f64>, row_items: Vec<usize>) -> Self {
        Self { values, row_items }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row_items(&self) -> &[usize] {
        &self.row_items
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// A square matrix whose rows and columns all sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochasticMatrix {
    values: Array2<f64>,
    item_map: Vec<usize>,
}

impl DoublyStochasticMatrix {
    pub fn new(values: Array2<f64>, item_map: Vec<usize>) -> Result<Self> {
        Self::with_tolerance(values, item_map, HARD_TOL)
    }

    pub fn with_tolerance(values: Array2<f64>, item_map: Vec<usize>, tol: f64) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::invalid(format!(
                "doubly stochastic matrix must be square, got {:?}",
                values.dim()
            )));
        }
        if item_map.len() != values.nrows() {
            return Err(Error::invalid(format!(
                "{} items for {} rows",
                item_map.len(),
                values.nrows()
            )));
        }
        check_nonnegative(&values, "matrix")?;
        let ok = |s: f64| (s - 1.0).abs() <= tol;
        check_sums(values.sum_axis(Axis(0)), "column", ok)?;
        check_sums(values.sum_axis(Axis(1)), "row", ok)?;
        Ok(Self { values, item_map })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn item_map(&self) -> &[usize] {
        &self.item_map
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    /// Largest deviation of any row or column sum from one, or of any entry
    /// below zero.
    pub fn max_violation(&self) -> f64 {
        let rows = self.values.sum_axis(Axis(1));
        let cols = self.values.sum_axis(Axis(0));
        let sums = rows
            .iter()
            .chain(cols.iter())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max);
        let neg = self.values.iter().fold(0.0f64, |m, v| m.max(-v));
        sums.max(neg)
    }
}

/// A deterministic ranking: `order[j]` is the item placed at position `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PermutationRanking {
    order: Vec<usize>,
}

impl PermutationRanking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(order.len());
        for item in &order {
            if !seen.insert(*item) {
                return Err(Error::invalid(format!("item {item} placed twice")));
            }
        }
        Ok(Self { order })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            order: (0..m).collect(),
        }
    }

    pub(crate) fn from_order_unchecked(order: Vec<usize>) -> Self {
        Self { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The first `k` items.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }

    /// 0/1 matrix with rows in `item_map` order and columns as positions.
    pub fn to_matrix(&self, item_map: &[usize]) -> Result<Array2<f64>> {
        let m = self.order.len();
        if item_map.len() != m {
            return Err(Error::invalid(format!(
                "item map of {} for a permutation of {m}",
                item_map.len()
            )));
        }
        let row_of = row_lookup(item_map);
        let mut q = Array2::zeros((m, m));
        for (pos, item) in self.order.iter().enumerate() {
            let row = row_of(*item)
                .ok_or_else(|| Error::invalid(format!("item {item} not in item map")))?;
            q[[row, pos]] = 1.0;
        }
        Ok(q)
    }
}

pub(crate) fn row_lookup(item_map: &[usize]) -> impl Fn(usize) -> Option<usize> {
    let max = item_map.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![usize::MAX; max];
    for (row, item) in item_map.iter().enumerate() {
        table[*item] = row;
    }
    move |item| table.get(item).copied().filter(|r| *r != usize::MAX)
}

/// One weighted permutation of a [`RankingPolicy`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComponent {
    pub theta: f64,
    pub ranking: PermutationRanking,
}

/// A convex combination of permutations over a fixed item set.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingPolicy {
    items: Vec<usize>,
    components: Vec<PolicyComponent>,
}

impl RankingPolicy {
    /// Validates at [`HARD_TOL`] and renormalizes the weights to sum to one.
    pub fn new(items: Vec<usize>, components: Vec<PolicyComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("policy has no components"));
        }
        let m = items.len();
        let bound = (m.saturating_sub(1)).pow(2) + 1;
        if components.len() > bound {
            return Err(Error::invalid(format!(
                "{} components exceed the bound {bound} for {m} items",
                components.len()
            )));
        }
        let item_set: HashSet<usize> = items.iter().copied().collect();
        if item_set.len() != m {
            return Err(Error::invalid("policy item list has duplicates"));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.theta.is_finite() && c.theta > 0.0) {
                return Err(Error::invalid(format!(
                    "component {i} has weight {}",
                    c.theta
                )));
            }
            if c.ranking.len() != m || !c.ranking.order().iter().all(|it| item_set.contains(it)) {
                return Err(Error::invalid(format!(
                    "component {i} is not a permutation of the policy items"
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.theta).sum();
        if (total - 1.0).abs() > HARD_TOL {
            return Err(Error::invalid(format!("policy weights sum to {total}")));
        }
        let components = components
            .into_iter()
            .map(|c| PolicyComponent {
                theta: c.theta / total,
                ..c
            })
            .collect();
        Ok(Self { items, components })
    }

    /// A policy that always returns `ranking`.
    pub fn deterministic(ranking: PermutationRanking) -> Self {
        let mut items = ranking.order().to_vec();
        items.sort_unstable();
        Self {
            items,
            components: vec![PolicyComponent {
                theta: 1.0,
                ranking,
            }],
        }
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn components(&self) -> &[PolicyComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn small_problem() -> RankingProblem {
        RankingProblem::new(
            vec![3.0, 2.0, 1.0, 0.5],
            make_position_weights(PositionWeightKind::Log, 2).unwrap(),
            array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [1.0, 0.0]],
            CategoryDistribution::new(vec![0.5, 0.5]).unwrap(),
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn single_slot_weight_is_one() {
        assert_eq!(make_position_weights(PositionWeightKind::Log, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn zero_slots_rejected() {
        assert!(make_position_weights(PositionWeightKind::Sqrt, 0).is_err());
    }

    #[test]
    fn well_formed_problem_has_no_violations() {
        assert!(validate_problem(&small_problem()).is_empty());
    }

    #[test]
    fn short_category_row_is_reported() {
        let mut p = small_problem();
        p.categories[[3, 0]] = 0.5;
        assert_eq!(validate_problem(&p), vec!["row 3 of A sums to 0.5"]);
    }

    #[test]
    fn lambda_out_of_range_is_reported() {
        let mut p = small_problem();
        p.lambda = 1.2;
        assert_eq!(validate_problem(&p), vec!["lambda outside [0,1]"]);
    }

    #[test]
    fn increasing_weights_are_reported() {
        let mut p = small_problem();
        p.position_weights = vec![0.4, 0.6];
        let v = validate_problem(&p);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("strictly decreasing"));
    }

    #[test]
    fn partial_matrix_rejects_bad_column() {
        let m = array![[0.5, 0.0], [0.4, 1.0], [0.0, 0.0]];
        assert!(PartialStochasticMatrix::new(m, vec![0, 1, 2]).is_err());
        let ok = array![[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        assert!(PartialStochasticMatrix::new(ok, vec![0, 1, 2]).is_ok());
    }

    #[test]
    fn partial_matrix_rejects_row_excess() {
        let m = array![[0.9, 0.9], [0.1, 0.1], [0.0, 0.0]];
        assert!(PartialStochasticMatrix::new(m, vec![0, 1, 2]).is_err());
    }

    #[test]
    fn permutation_rejects_repeats() {
        assert!(PermutationRanking::new(vec![0, 2, 0]).is_err());
    }

    #[test]
    fn policy_rejects_bad_weights() {
        let id = PermutationRanking::identity(2);
        let sw = PermutationRanking::new(vec![1, 0]).unwrap();
        let comps = vec![
            PolicyComponent { theta: 0.3, ranking: id.clone() },
            PolicyComponent { theta: 0.6, ranking: sw.clone() },
        ];
        assert!(RankingPolicy::new(vec![0, 1], comps).is_err());
        let comps = vec![
            PolicyComponent { theta: 0.3, ranking: id },
            PolicyComponent { theta: -0.7, ranking: sw },
        ];
        assert!(RankingPolicy::new(vec![0, 1], comps).is_err());
    }

    #[test]
    fn policy_rejects_foreign_items() {
        let comps = vec![PolicyComponent {
            theta: 1.0,
            ranking: PermutationRanking::new(vec![0, 5]).unwrap(),
        }];
        assert!(RankingPolicy::new(vec![0, 1], comps).is_err());
    }

    #[test]
    fn doubly_stochastic_rejects_nonsquare() {
        assert!(DoublyStochasticMatrix::new(array![[1.0, 0.0]], vec![0]).is_err());
    }

    proptest! {
        #[test]
        fn weights_normalized_and_decreasing(k in 1usize..400, kind in 0usize..3) {
            let w = make_position_weights(PositionWeightKind::ALL[kind], k).unwrap();
            prop_assert_eq!(w.len(), k);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.windows(2).all(|p| p[1] < p[0]));
        }

        #[test]
        fn permutations_are_doubly_stochastic(order in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
            let perm = PermutationRanking::new(order).unwrap();
            let items: Vec<usize> = (0..8).collect();
            let q = perm.to_matrix(&items).unwrap();
            prop_assert!(DoublyStochasticMatrix::with_tolerance(q, items, 0.0).is_ok());
        }
    }
}
