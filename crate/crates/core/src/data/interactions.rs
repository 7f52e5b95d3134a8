use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use csv::StringRecord;

use crate::error::{Error, Result};
use crate::model::ItemId;

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub item: ItemId,
    pub rating: f64,
    /// `rating > positive_threshold` at load time.
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub id: u64,
    pub interactions: Vec<Interaction>,
}

impl UserRecord {
    pub fn positives(&self) -> Vec<ItemId> {
        self.interactions
            .iter()
            .filter(|i| i.positive)
            .map(|i| i.item)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemMeta {
    pub genres: Vec<String>,
    pub year: Option<i32>,
}

/// Item metadata keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub items: BTreeMap<ItemId, ItemMeta>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains_key(&item)
    }

    pub fn ids(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items.keys().copied()
    }
}

/// Users (sorted by id) with their rated items, plus the item catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub users: Vec<UserRecord>,
    pub catalog: Catalog,
}

impl InteractionDataset {
    /// Replaces the catalog, failing if any rated item is missing from it.
    pub fn attach_catalog(mut self, catalog: Catalog) -> Result<Self> {
        let mut missing: Vec<u64> = self
            .users
            .iter()
            .flat_map(|u| u.interactions.iter().map(|i| i.item))
            .filter(|item| !catalog.contains(*item))
            .map(|item| item.0)
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        if !missing.is_empty() {
            missing.sort_unstable();
            return Err(Error::UnknownItems(missing));
        }
        self.catalog = catalog;
        Ok(self)
    }

    pub fn user(&self, id: u64) -> Option<&UserRecord> {
        self.users
            .binary_search_by_key(&id, |u| u.id)
            .ok()
            .map(|i| &self.users[i])
    }

    /// Positive interactions per item, counted over `users` only.
    pub fn positive_counts(&self, users: &HashSet<u64>) -> BTreeMap<ItemId, usize> {
        let mut counts: BTreeMap<ItemId, usize> = self.catalog.ids().map(|i| (i, 0)).collect();
        for user in self.users.iter().filter(|u| users.contains(&u.id)) {
            for i in user.interactions.iter().filter(|i| i.positive) {
                *counts.entry(i.item).or_default() += 1;
            }
        }
        counts
    }
}

pub(crate) struct Columns {
    path: PathBuf,
    header: StringRecord,
}

impl Columns {
    pub(crate) fn new(path: &Path, header: StringRecord) -> Self {
        Self {
            path: path.to_path_buf(),
            header,
        }
    }

    pub(crate) fn find(&self, names: &[&str]) -> Option<usize> {
        self.header.iter().position(|h| {
            let h = h.trim().to_ascii_lowercase();
            names.iter().any(|n| *n == h)
        })
    }

    pub(crate) fn require(&self, names: &[&str]) -> Result<usize> {
        self.find(names).ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 1,
            message: format!("missing column (one of {names:?})"),
        })
    }

    pub(crate) fn parse<T: std::str::FromStr>(&self, record: &StringRecord, col: usize, what: &str) -> Result<T> {
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw = record.get(col).ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line,
            message: format!("missing {what}"),
        })?;
        raw.trim().parse().map_err(|_| Error::Parse {
            path: self.path.clone(),
            line,
            message: format!("invalid {what} {raw:?}"),
        })
    }

    pub(crate) fn error(&self, record: &StringRecord, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: record.position().map_or(0, |p| p.line() as usize),
            message,
        }
    }
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

pub(crate) const USER_COLUMNS: &[&str] = &["user", "userid", "user_id"];
pub(crate) const ITEM_COLUMNS: &[&str] = &["item", "itemid", "item_id", "movieid", "movie_id"];

/// Reads a ratings file (`user,item,rating[,timestamp]`, header required).
///
/// Ratings strictly above `positive_threshold` are positive. Users with
/// fewer than `min_interactions` rows are dropped. The returned catalog holds
/// every rated item with empty metadata.
pub fn load_interactions(
    path: &Path,
    positive_threshold: f64,
    min_interactions: usize,
) -> Result<InteractionDataset> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, rdr.headers()?.clone());
    let user_col = cols.require(USER_COLUMNS)?;
    let item_col = cols.require(ITEM_COLUMNS)?;
    let rating_col = cols.require(&["rating"])?;

    let mut by_user: BTreeMap<u64, Vec<Interaction>> = BTreeMap::new();
    let mut seen: HashSet<(u64, ItemId)> = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let user: u64 = cols.parse(&record, user_col, "user id")?;
        let item = ItemId(cols.parse(&record, item_col, "item id")?);
        let rating: f64 = cols.parse(&record, rating_col, "rating")?;
        if !rating.is_finite() {
            return Err(cols.error(&record, format!("non-finite rating {rating}")));
        }
        if !seen.insert((user, item)) {
            return Err(cols.error(&record, format!("duplicate rating of item {item} by user {user}")));
        }
        by_user.entry(user).or_default().push(Interaction {
            item,
            rating,
            positive: rating > positive_threshold,
        });
    }

    let users: Vec<UserRecord> = by_user
        .into_iter()
        .filter(|(_, ints)| ints.len() >= min_interactions)
        .map(|(id, interactions)| UserRecord { id, interactions })
        .collect();
    if users.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    let catalog = Catalog {
        items: users
            .iter()
            .flat_map(|u| u.interactions.iter().map(|i| (i.item, ItemMeta::default())))
            .collect(),
    };
    Ok(InteractionDataset { users, catalog })
}

fn year_from_title(title: &str) -> Option<i32> {
    let t = title.trim().strip_suffix(')')?;
    let open = t.rfind('(')?;
    let inner = t[open + 1..].trim();
    // Ranges such as "(2007-2013)" keep their first year.
    inner.get(..4)?.parse().ok()
}

/// Reads item metadata: an item id column, `genres` separated by `|`, and
/// either a `year` column or a `title` ending in `(YYYY)`.
///
/// The genre string `(no genres listed)` means no genres.
pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, rdr.headers()?.clone());
    let item_col = cols.require(ITEM_COLUMNS)?;
    let genre_col = cols.find(&["genres", "genre"]);
    let year_col = cols.find(&["year"]);
    let title_col = cols.find(&["title"]);

    let mut items = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let item = ItemId(cols.parse(&record, item_col, "item id")?);
        let genres = genre_col
            .and_then(|c| record.get(c))
            .map(|g| {
                g.split('|')
                    .map(str::trim)
                    .filter(|g| !g.is_empty() && *g != "(no genres listed)")
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        let year = match (year_col, title_col) {
            (Some(c), _) => match record.get(c).map(str::trim) {
                None | Some("") => None,
                Some(_) => Some(cols.parse(&record, c, "year")?),
            },
            (None, Some(c)) => record.get(c).and_then(year_from_title),
            (None, None) => None,
        };
        if items.insert(item, ItemMeta { genres, year }).is_some() {
            return Err(cols.error(&record, format!("duplicate catalog entry for item {item}")));
        }
    }
    if items.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    Ok(Catalog { items })
}
