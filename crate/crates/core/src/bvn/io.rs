//! Plain-text policy files.
//!
//! One component per line: the weight, then the item at each position,
//! separated by whitespace. Lines starting with `#` and blank lines are
//! skipped. Weights are written in shortest round-trip form, so reading a
//! written policy gives back identical weights.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ItemId, PermutationRanking, PolicyComponent, RankingPolicy};

pub fn write_policy<W: Write>(mut w: W, policy: &RankingPolicy) -> Result<()> {
    writeln!(w, "# weight, then item ids by position")?;
    for c in policy.components() {
        write!(w, "{}", c.theta)?;
        for item in c.ranking.order() {
            write!(w, " {item}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_policy<R: BufRead>(r: R, path: &Path) -> Result<RankingPolicy> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut components = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let theta: f64 = fields
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(idx + 1, "missing or invalid weight".into()))?;
        let order = fields
            .map(|f| f.parse::<usize>().map_err(|_| parse_err(idx + 1, format!("invalid item {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let ranking = PermutationRanking::new(order).map_err(|e| parse_err(idx + 1, e.to_string()))?;
        components.push(PolicyComponent { theta, ranking });
    }
    let Some(first) = components.first() else {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    };
    let mut items = first.ranking.order().to_vec();
    items.sort_unstable();
    RankingPolicy::new(items, components)
}

/// Replaces local item indices with `labels[index]`.
pub fn relabel(policy: &RankingPolicy, labels: &[ItemId]) -> Result<RankingPolicy> {
    let map = |i: usize| -> Result<usize> {
        labels
            .get(i)
            .map(|l| l.0 as usize)
            .ok_or_else(|| Error::invalid(format!("no label for item {i}")))
    };
    let items = policy.items().iter().map(|i| map(*i)).collect::<Result<Vec<_>>>()?;
    let components = policy
        .components()
        .iter()
        .map(|c| {
            let order = c.ranking.order().iter().map(|i| map(*i)).collect::<Result<Vec<_>>>()?;
            Ok(PolicyComponent { theta: c.theta, ranking: PermutationRanking::new(order)? })
        })
        .collect::<Result<Vec<_>>>()?;
    RankingPolicy::new(items, components)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let policy = RankingPolicy::new(
            vec![0, 1, 2],
            vec![
                PolicyComponent { theta: 0.1 + 0.2, ranking: PermutationRanking::new(vec![2, 0, 1]).unwrap() },
                PolicyComponent { theta: 1.0 - (0.1 + 0.2), ranking: PermutationRanking::identity(3) },
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_policy(&mut buf, &policy).unwrap();
        let back = read_policy(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, policy);
    }

    #[test]
    fn rejects_garbage() {
        let err = read_policy("0.5 0 1\nx 1 0\n".as_bytes(), Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn relabels() {
        let policy = RankingPolicy::deterministic(PermutationRanking::new(vec![1, 0]).unwrap());
        let out = relabel(&policy, &[ItemId(10), ItemId(20)]).unwrap();
        assert_eq!(out.components()[0].ranking.order(), &[20, 10]);
    }
}
