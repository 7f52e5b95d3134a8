//! Text formats for single problems and placement matrices.
//!
//! Problem file, one directive per line (`#` comments, blank lines skipped):
//!
//! ```text
//! lambda 0.5
//! weights log 3            # or explicit: weights 0.5 0.3 0.2
//! target 0.5 0.5
//! item 17 0.9 1 0          # id, score, category row
//! item 23 0.4 0 1
//! ```
//!
//! Matrix file: an optional `items <id> …` line, then one row of
//! whitespace-separated entries per item. Square matrices are read as doubly
//! stochastic; wider-than-tall is rejected; taller-than-wide is a partial
//! placement with rows summing to at most one.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{make_position_weights, validate_problem, CategoryDistribution, ItemId, PositionWeightKind, RankingProblem};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn numbers<'a>(path: &Path, line: usize, fields: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    fields
        .map(|f| f.parse::<f64>().map_err(|_| parse_err(path, line, format!("invalid number {f:?}"))))
        .collect()
}

/// A parsed problem file. `lambda` is `None` when the file leaves it to the
/// caller.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub lambda: Option<f64>,
    pub problem: RankingProblem,
}

/// Reads a problem file without validating invariants, so that
/// [`validate_problem`] can report them.
pub fn parse_problem(text: &str, path: &Path) -> Result<ProblemFile> {
    let mut lambda = None;
    let mut weights = None;
    let mut target = None;
    let mut items = Vec::new();
    let mut scores = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut fields = line.split_whitespace();
        let Some(directive) = fields.next() else { continue };
        match directive {
            "lambda" => {
                let v = numbers(path, line_no, fields)?;
                if v.len() != 1 {
                    return Err(parse_err(path, line_no, "lambda takes one value"));
                }
                lambda = Some(v[0]);
            }
            "weights" => {
                let rest: Vec<&str> = fields.collect();
                let kind = rest.first().and_then(|f| f.parse::<PositionWeightKind>().ok());
                weights = Some(match kind {
                    Some(kind) => {
                        let k = rest
                            .get(1)
                            .and_then(|k| k.parse().ok())
                            .ok_or_else(|| parse_err(path, line_no, "weights <kind> needs a count"))?;
                        make_position_weights(kind, k).map_err(|e| parse_err(path, line_no, e.to_string()))?
                    }
                    None => numbers(path, line_no, rest.into_iter())?,
                });
            }
            "target" => target = Some(numbers(path, line_no, fields)?),
            "item" => {
                let id = fields
                    .next()
                    .and_then(|f| f.parse::<u64>().ok())
                    .ok_or_else(|| parse_err(path, line_no, "item needs an integer id"))?;
                let v = numbers(path, line_no, fields)?;
                let Some((score, row)) = v.split_first() else {
                    return Err(parse_err(path, line_no, "item needs a score"));
                };
                items.push(ItemId(id));
                scores.push(*score);
                rows.push(row.to_vec());
            }
            other => return Err(parse_err(path, line_no, format!("unknown directive {other:?}"))),
        }
    }
    let weights = weights.ok_or_else(|| parse_err(path, 0, "missing weights line"))?;
    let target = target.ok_or_else(|| parse_err(path, 0, "missing target line"))?;
    let r = target.len();
    if let Some(i) = rows.iter().position(|row| row.len() != r) {
        return Err(parse_err(path, 0, format!("item {} has {} categories, target has {r}", items[i], rows[i].len())));
    }
    let categories = Array2::from_shape_vec((rows.len(), r), rows.concat())
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok(ProblemFile {
        lambda,
        problem: RankingProblem {
            items,
            scores,
            position_weights: weights,
            categories,
            target: CategoryDistribution::new_unchecked(target),
            lambda: lambda.unwrap_or(0.5),
        },
    })
}

/// Reads and validates a problem file, overriding its λ if `lambda` is given.
pub fn read_problem(path: &Path, lambda: Option<f64>) -> Result<RankingProblem> {
    let text = std::fs::read_to_string(path)?;
    let parsed = parse_problem(&text, path)?;
    let mut p = parsed.problem;
    if let Some(l) = lambda {
        p.lambda = l;
    }
    let violations = validate_problem(&p);
    if !violations.is_empty() {
        return Err(Error::invalid(violations.join("; ")));
    }
    let target = CategoryDistribution::new(p.target.probs().to_vec())?;
    RankingProblem::with_items(p.items, p.scores, p.position_weights, p.categories, target, p.lambda)
}

pub fn format_problem(p: &RankingProblem) -> String {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    out.push_str(&format!("lambda {}\n", p.lambda));
    out.push_str(&format!("weights {}\n", join(&p.position_weights)));
    out.push_str(&format!("target {}\n", join(p.target.probs())));
    for (i, item) in p.items.iter().enumerate() {
        let row = p.categories.row(i).to_vec();
        out.push_str(&format!("item {} {} {}\n", item, p.scores[i], join(&row)));
    }
    out
}

/// A matrix file: entries plus the item id of each row (`0..m` when the file
/// has no `items` line).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub items: Vec<u64>,
    pub values: Array2<f64>,
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    let text = std::fs::read_to_string(path)?;
    let mut items = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("items") {
            let ids = rest
                .split_whitespace()
                .map(|f| f.parse::<u64>().map_err(|_| parse_err(path, idx + 1, format!("invalid item id {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            items = Some(ids);
            continue;
        }
        let row = numbers(path, idx + 1, line.split_whitespace())?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(path, idx + 1, format!("row has {} entries, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    let (m, c) = (rows.len(), rows[0].len());
    let items = items.unwrap_or_else(|| (0..m as u64).collect());
    if items.len() != m {
        return Err(parse_err(path, 0, format!("{} item ids for {m} rows", items.len())));
    }
    let values = Array2::from_shape_vec((m, c), rows.concat()).map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok(MatrixFile { items, values })
}
