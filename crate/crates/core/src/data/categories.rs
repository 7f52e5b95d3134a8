//! Item-to-category matrices for the three calibration attributes, plus
//! target distributions built from a user's history.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use ndarray::Array2;

use crate::data::interactions::{reader, Columns, ITEM_COLUMNS};
use crate::data::{Catalog, InteractionDataset};
use crate::error::{Error, Result};
use crate::model::{CategoryDistribution, ItemId};

/// Name of the extra column for items with no usable attribute value.
pub const UNKNOWN: &str = "unknown";
pub const FIRST_DECADE: i32 = 1920;
pub const DECADES: usize = 10;

/// Rows of `A` for every catalog item. Rows are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMatrix {
    pub names: Vec<String>,
    index: HashMap<ItemId, usize>,
    values: Array2<f64>,
}

impl CategoryMatrix {
    fn from_rows(names: Vec<String>, rows: Vec<(ItemId, Vec<f64>)>) -> Self {
        let r = names.len();
        let mut values = Array2::zeros((rows.len(), r));
        let mut index = HashMap::with_capacity(rows.len());
        for (i, (item, row)) in rows.into_iter().enumerate() {
            index.insert(item, i);
            for (c, v) in row.into_iter().enumerate() {
                values[[i, c]] = v;
            }
        }
        Self { names, index, values }
    }

    pub fn r(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn row(&self, item: ItemId) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.index.get(&item).map(|i| self.values.row(*i))
    }

    /// Stacks the rows of `items` in order.
    pub fn rows_for(&self, items: &[ItemId]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((items.len(), self.r()));
        let mut missing = Vec::new();
        for (i, item) in items.iter().enumerate() {
            match self.row(*item) {
                Some(row) => out.row_mut(i).assign(&row),
                None => missing.push(item.0),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::UnknownItems(missing))
        }
    }
}

/// Equal weight `1/g` on each of an item's `g` genres. Items without genres
/// get a dedicated `unknown` column, which exists only if needed.
pub fn build_genre_matrix(catalog: &Catalog) -> CategoryMatrix {
    let genres: BTreeSet<&str> = catalog
        .items
        .values()
        .flat_map(|m| m.genres.iter().map(String::as_str))
        .collect();
    let mut names: Vec<String> = genres.iter().map(|g| g.to_string()).collect();
    let col: HashMap<&str, usize> = genres.iter().enumerate().map(|(i, g)| (*g, i)).collect();
    let needs_unknown = catalog.items.values().any(|m| m.genres.is_empty());
    if needs_unknown {
        names.push(UNKNOWN.to_string());
    }
    let r = names.len();
    let rows = catalog
        .items
        .iter()
        .map(|(item, meta)| {
            let mut row = vec![0.0; r];
            let distinct: BTreeSet<&str> = meta.genres.iter().map(String::as_str).collect();
            if distinct.is_empty() {
                row[r - 1] = 1.0;
            } else {
                let w = 1.0 / distinct.len() as f64;
                for g in distinct {
                    row[col[g]] = w;
                }
            }
            (*item, row)
        })
        .collect();
    CategoryMatrix::from_rows(names, rows)
}

/// Decade bucket 0..10 for 1920s..2010s; earlier years clamp to the first
/// bucket and later years to the last.
pub fn decade_bucket(year: i32) -> usize {
    (((year - FIRST_DECADE).max(0) / 10) as usize).min(DECADES - 1)
}

/// One-hot release decade. Items without a year go to an `unknown` column,
/// which exists only if needed.
pub fn build_year_matrix(catalog: &Catalog) -> CategoryMatrix {
    let mut names: Vec<String> = (0..DECADES as i32)
        .map(|d| format!("{}s", FIRST_DECADE + 10 * d))
        .collect();
    let needs_unknown = catalog.items.values().any(|m| m.year.is_none());
    if needs_unknown {
        names.push(UNKNOWN.to_string());
    }
    let r = names.len();
    let rows = catalog
        .items
        .iter()
        .map(|(item, meta)| {
            let mut row = vec![0.0; r];
            match meta.year {
                Some(y) => row[decade_bucket(y)] = 1.0,
                None => row[r - 1] = 1.0,
            }
            (*item, row)
        })
        .collect();
    CategoryMatrix::from_rows(names, rows)
}

/// One-hot `popular` / `less_popular`. The `ceil(top_frac · |catalog|)` items
/// with the most positives among `train_users` are popular; ties at the
/// boundary go to the lower item id.
pub fn build_popularity_matrix(
    d: &InteractionDataset,
    train_users: &HashSet<u64>,
    top_frac: f64,
) -> Result<CategoryMatrix> {
    if !(0.0..=1.0).contains(&top_frac) {
        return Err(Error::invalid(format!("popular fraction {top_frac} outside [0, 1]")));
    }
    let counts = d.positive_counts(train_users);
    let mut ranked: Vec<(ItemId, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let popular_count = (top_frac * ranked.len() as f64).ceil() as usize;
    let popular: HashSet<ItemId> = ranked.iter().take(popular_count).map(|(i, _)| *i).collect();
    let rows = d
        .catalog
        .ids()
        .map(|item| {
            let row = if popular.contains(&item) {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            };
            (item, row)
        })
        .collect();
    Ok(CategoryMatrix::from_rows(
        vec!["popular".into(), "less_popular".into()],
        rows,
    ))
}

/// Reads `item,category,weight` rows and normalizes each item's weights.
pub fn load_category_file(path: &Path) -> Result<CategoryMatrix> {
    let mut rdr = reader(path)?;
    let cols = Columns::new(path, rdr.headers()?.clone());
    let item_col = cols.require(ITEM_COLUMNS)?;
    let cat_col = cols.require(&["category"])?;
    let weight_col = cols.find(&["weight"]);

    let mut per_item: BTreeMap<ItemId, BTreeMap<String, f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let item = ItemId(cols.parse(&record, item_col, "item id")?);
        let category: String = cols.parse(&record, cat_col, "category")?;
        let weight: f64 = match weight_col {
            Some(c) => cols.parse(&record, c, "weight")?,
            None => 1.0,
        };
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(cols.error(&record, format!("invalid weight {weight}")));
        }
        *per_item.entry(item).or_default().entry(category).or_default() += weight;
    }
    if per_item.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    let names: Vec<String> = per_item
        .values()
        .flat_map(|m| m.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut rows = Vec::with_capacity(per_item.len());
    for (item, cats) in &per_item {
        let total: f64 = cats.values().sum();
        if total <= 0.0 {
            return Err(Error::invalid(format!("item {item} has zero total category weight")));
        }
        let mut row = vec![0.0; names.len()];
        for (name, w) in cats {
            row[col[name.as_str()]] = w / total;
        }
        rows.push((*item, row));
    }
    Ok(CategoryMatrix::from_rows(names, rows))
}

/// Mean category row over `history`, optionally weighted per item (for
/// example to favour recent plays). An empty history gives the uniform
/// distribution.
pub fn build_target_distribution(
    history: &[ItemId],
    a: &CategoryMatrix,
    weights: Option<&[f64]>,
) -> Result<CategoryDistribution> {
    if history.is_empty() {
        return Ok(CategoryDistribution::uniform(a.r()));
    }
    if let Some(w) = weights {
        if w.len() != history.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} history items",
                w.len(),
                history.len()
            )));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("history weights must be non-negative with a positive sum"));
        }
    }
    let rows = a.rows_for(history)?;
    let mut q = vec![0.0; a.r()];
    let mut total = 0.0;
    for (i, row) in rows.rows().into_iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        total += w;
        for (qc, v) in q.iter_mut().zip(row) {
            *qc += w * v;
        }
    }
    q.iter_mut().for_each(|v| *v /= total);
    CategoryDistribution::new(q)
}
