//! External model scores and per-user evaluation cases.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use log::warn;
use ndarray::Array2;

use crate::data::categories::{build_target_distribution, CategoryMatrix};
use crate::data::interactions::{reader, Columns, ITEM_COLUMNS, USER_COLUMNS};
use crate::data::split::split_history_holdout;
use crate::data::{Catalog, InteractionDataset};
use crate::error::{Error, Result};
use crate::model::{CategoryDistribution, ItemId, RankingProblem};

/// Scores per user: item id to score.
pub type ScoreTable = BTreeMap<u64, BTreeMap<ItemId, f64>>;

/// Reads `user,item,score` rows. Every item must be in `catalog`.
pub fn load_scores(path: &Path, catalog: &Catalog) -> Result<ScoreTable> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, rdr.headers()?.clone());
    let user_col = cols.require(USER_COLUMNS)?;
    let item_col = cols.require(ITEM_COLUMNS)?;
    let score_col = cols.require(&["score"])?;

    let mut table = ScoreTable::new();
    let mut unknown = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let user: u64 = cols.parse(&record, user_col, "user id")?;
        let item = ItemId(cols.parse(&record, item_col, "item id")?);
        let score: f64 = cols.parse(&record, score_col, "score")?;
        if !score.is_finite() {
            return Err(cols.error(&record, format!("non-finite score {score}")));
        }
        if !catalog.contains(item) {
            unknown.insert(item.0);
            continue;
        }
        if table.entry(user).or_default().insert(item, score).is_some() {
            return Err(cols.error(&record, format!("duplicate score of item {item} for user {user}")));
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownItems(unknown.into_iter().collect()));
    }
    if table.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    Ok(table)
}

/// The `n` highest-scored items outside `history`, best first, ties by lower
/// id. Returns fewer (with a warning) if not enough items are scored.
pub fn assemble_candidates(
    scores: &BTreeMap<ItemId, f64>,
    history: &HashSet<ItemId>,
    n: usize,
) -> Vec<(ItemId, f64)> {
    let mut pool: Vec<(ItemId, f64)> = scores
        .iter()
        .filter(|(item, _)| !history.contains(item))
        .map(|(item, s)| (*item, *s))
        .collect();
    pool.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if pool.len() < n {
        warn!("only {} candidates available, wanted {n}", pool.len());
    }
    pool.truncate(n);
    pool
}

/// One user's history/holdout split and candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct UserEvalInstance {
    pub user: u64,
    pub history: Vec<ItemId>,
    pub holdout: Vec<ItemId>,
    pub candidates: Vec<ItemId>,
    pub scores: Vec<f64>,
}

/// Everything needed to build and evaluate one user's ranking problem.
/// `relevant` holds local candidate indices of holdout items.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub user: u64,
    pub items: Vec<ItemId>,
    pub scores: Vec<f64>,
    pub categories: Array2<f64>,
    pub target: CategoryDistribution,
    pub relevant: HashSet<usize>,
}

impl EvalCase {
    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn problem(&self, position_weights: Vec<f64>, lambda: f64) -> Result<RankingProblem> {
        RankingProblem::with_items(
            self.items.clone(),
            self.scores.clone(),
            position_weights,
            self.categories.clone(),
            self.target.clone(),
            lambda,
        )
    }
}

/// Settings for turning a dataset plus scores into evaluation cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseOptions {
    pub n: usize,
    pub k: usize,
    pub history_frac: f64,
    pub seed: u64,
}

/// Splits each selected user's positives, assembles candidates, and builds
/// the target from the history. Users with fewer than two positives, no
/// scores, or fewer than `k` candidates are skipped with a warning.
pub fn prepare_cases(
    d: &InteractionDataset,
    scores: &ScoreTable,
    users: &BTreeSet<u64>,
    a: &CategoryMatrix,
    opts: CaseOptions,
) -> Result<(Vec<UserEvalInstance>, Vec<EvalCase>)> {
    let mut instances = Vec::new();
    let mut cases = Vec::new();
    for &uid in users {
        let Some(user) = d.user(uid) else {
            return Err(Error::invalid(format!("user {uid} not in dataset")));
        };
        let positives = user.positives();
        if positives.len() < 2 {
            warn!("user {uid}: fewer than 2 positives, skipped");
            continue;
        }
        let Some(user_scores) = scores.get(&uid) else {
            warn!("user {uid}: no scores, skipped");
            continue;
        };
        let (history, holdout) = split_history_holdout(&positives, opts.history_frac, opts.seed, uid)?;
        let seen: HashSet<ItemId> = history.iter().copied().collect();
        let candidates = assemble_candidates(user_scores, &seen, opts.n);
        if candidates.len() < opts.k {
            warn!("user {uid}: {} candidates < k = {}, skipped", candidates.len(), opts.k);
            continue;
        }
        let items: Vec<ItemId> = candidates.iter().map(|(i, _)| *i).collect();
        let score_vec: Vec<f64> = candidates.iter().map(|(_, s)| *s).collect();
        let holdout_set: HashSet<ItemId> = holdout.iter().copied().collect();
        let relevant = items
            .iter()
            .enumerate()
            .filter(|(_, i)| holdout_set.contains(i))
            .map(|(j, _)| j)
            .collect();
        cases.push(EvalCase {
            user: uid,
            categories: a.rows_for(&items)?,
            target: build_target_distribution(&history, a, None)?,
            items: items.clone(),
            scores: score_vec.clone(),
            relevant,
        });
        instances.push(UserEvalInstance {
            user: uid,
            history,
            holdout,
            candidates: items,
            scores: score_vec,
        });
    }
    Ok((instances, cases))
}
