use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::model::ItemId;

/// Generator for one randomized step. Every stream is ChaCha8 keyed by the
/// run seed, with `stream` selecting an independent sequence (a user id, a
/// component index) so results do not depend on processing order.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids used for splits, so they never collide with per-user streams.
const USER_SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserSplit {
    pub train: BTreeSet<u64>,
    pub validation: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
}

/// Shuffles users and carves off `test_count` test and `val_count`
/// validation users; everyone else trains. `train_frac`, when given, must be
/// consistent with the counts to within one user.
pub fn split_users(
    d: &InteractionDataset,
    train_frac: Option<f64>,
    val_count: usize,
    test_count: usize,
    seed: u64,
) -> Result<UserSplit> {
    let total = d.users.len();
    if val_count + test_count > total {
        return Err(Error::invalid(format!(
            "{val_count} validation + {test_count} test users exceed {total} users"
        )));
    }
    if let Some(frac) = train_frac {
        if !(0.0..=1.0).contains(&frac) {
            return Err(Error::invalid(format!("train fraction {frac} outside [0, 1]")));
        }
        let implied = total - val_count - test_count;
        if ((frac * total as f64).round() as i64 - implied as i64).abs() > 1 {
            return Err(Error::invalid(format!(
                "train fraction {frac} of {total} users disagrees with {implied} users left for training"
            )));
        }
    }
    let mut ids: Vec<u64> = d.users.iter().map(|u| u.id).collect();
    ids.shuffle(&mut seeded_rng(seed, USER_SPLIT_STREAM));
    let test = ids[..test_count].iter().copied().collect();
    let validation = ids[test_count..test_count + val_count].iter().copied().collect();
    let train = ids[test_count + val_count..].iter().copied().collect();
    Ok(UserSplit {
        train,
        validation,
        test,
    })
}

/// Random split of one user's positives into history and holdout with
/// `round(history_frac · |positives|)` history items, at least one on each
/// side. `stream` keys the generator (use the user id).
pub fn split_history_holdout(
    positives: &[ItemId],
    history_frac: f64,
    seed: u64,
    stream: u64,
) -> Result<(Vec<ItemId>, Vec<ItemId>)> {
    if positives.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 positives to split, got {}",
            positives.len()
        )));
    }
    if !(0.0..=1.0).contains(&history_frac) {
        return Err(Error::invalid(format!("history fraction {history_frac} outside [0, 1]")));
    }
    let mut items = positives.to_vec();
    items.sort_unstable();
    items.dedup();
    let n = items.len();
    if n < 2 {
        return Err(Error::invalid("need at least 2 distinct positives to split"));
    }
    let keep = ((history_frac * n as f64).round() as usize).clamp(1, n - 1);
    items.shuffle(&mut seeded_rng(seed, stream));
    let holdout = items.split_off(keep);
    Ok((items, holdout))
}
