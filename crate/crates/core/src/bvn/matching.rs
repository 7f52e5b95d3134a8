//! Hopcroft-Karp maximum bipartite matching.

use std::collections::VecDeque;

const FREE: usize = usize::MAX;

/// Maximum matching between `adj.len()` left vertices and `n_right` right
/// vertices, returned as the partner of each left vertex.
///
/// Neighbours are visited in the order given, so equal inputs give equal
/// matchings. `warm`, if given, seeds the search with a partial matching;
/// pairs that are not edges of `adj` or that conflict are ignored.
pub fn maximum_matching(adj: &[Vec<usize>], n_right: usize, warm: Option<&[Option<usize>]>) -> Vec<Option<usize>> {
    let n_left = adj.len();
    let mut left = vec![FREE; n_left];
    let mut right = vec![FREE; n_right];
    if let Some(warm) = warm {
        for (u, v) in warm.iter().enumerate().take(n_left) {
            if let Some(v) = *v {
                if v < n_right && right[v] == FREE && adj[u].contains(&v) {
                    left[u] = v;
                    right[v] = u;
                }
            }
        }
    }

    let mut dist = vec![0usize; n_left];
    let mut cursor = vec![0usize; n_left];
    loop {
        // Layer the free left vertices and everything reachable by
        // alternating paths.
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if left[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = right[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        cursor.iter_mut().for_each(|c| *c = 0);
        for u in 0..n_left {
            if left[u] == FREE {
                augment(u, adj, &mut left, &mut right, &mut dist, &mut cursor);
            }
        }
    }
    left.into_iter().map(|v| (v != FREE).then_some(v)).collect()
}

/// Depth-first search for an augmenting path along the layers.
fn augment(
    u: usize,
    adj: &[Vec<usize>],
    left: &mut [usize],
    right: &mut [usize],
    dist: &mut [usize],
    cursor: &mut [usize],
) -> bool {
    while cursor[u] < adj[u].len() {
        let v = adj[u][cursor[u]];
        let w = right[v];
        if w == FREE || (dist[w] == dist[u] + 1 && augment(w, adj, left, right, dist, cursor)) {
            left[u] = v;
            right[v] = u;
            return true;
        }
        cursor[u] += 1;
    }
    dist[u] = usize::MAX;
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute_max(adj: &[Vec<usize>], n_right: usize) -> usize {
        fn rec(u: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if u == adj.len() {
                return 0;
            }
            let mut best = rec(u + 1, adj, used);
            for &v in &adj[u] {
                if !used[v] {
                    used[v] = true;
                    best = best.max(1 + rec(u + 1, adj, used));
                    used[v] = false;
                }
            }
            best
        }
        rec(0, adj, &mut vec![false; n_right])
    }

    fn check(adj: &[Vec<usize>], n_right: usize, m: &[Option<usize>]) -> usize {
        let mut seen = vec![false; n_right];
        for (u, v) in m.iter().enumerate() {
            if let Some(v) = v {
                assert!(adj[u].contains(v));
                assert!(!seen[*v]);
                seen[*v] = true;
            }
        }
        m.iter().flatten().count()
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let nl = rng.random_range(1..7);
            let nr = rng.random_range(1..7);
            let p: f64 = rng.random();
            let adj: Vec<Vec<usize>> = (0..nl)
                .map(|_| (0..nr).filter(|_| rng.random::<f64>() < p).collect())
                .collect();
            let m = maximum_matching(&adj, nr, None);
            assert_eq!(check(&adj, nr, &m), brute_max(&adj, nr));
            let warm: Vec<Option<usize>> = (0..nl).map(|_| Some(rng.random_range(0..nr))).collect();
            let m2 = maximum_matching(&adj, nr, Some(&warm));
            assert_eq!(check(&adj, nr, &m2), brute_max(&adj, nr));
        }
    }

    #[test]
    fn perfect_on_complete_graph() {
        let adj: Vec<Vec<usize>> = (0..50).map(|_| (0..50).collect()).collect();
        let m = maximum_matching(&adj, 50, None);
        assert_eq!(m.iter().flatten().count(), 50);
    }

    #[test]
    fn deterministic() {
        let adj = vec![vec![0, 1], vec![0, 1]];
        assert_eq!(maximum_matching(&adj, 2, None), maximum_matching(&adj, 2, None));
    }
}
