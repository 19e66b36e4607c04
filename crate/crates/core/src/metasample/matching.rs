//! Maximum-cardinality matching on ε-adjacency bipartite graphs.
//!
//! Left vertex `i` and right vertex `j` are adjacent iff
//! `‖left_i − right_j‖₂ ≤ ε`. Adjacency lists are built by sorting the right
//! side on its first coordinate, so only candidates inside the ε-slab are
//! distance-checked. The matching itself is Hopcroft–Karp with an explicit
//! DFS stack; pools of tens of thousands of points would overflow a
//! recursive search.
//!
//! Neighbours are visited in ascending right index and free left vertices in
//! ascending left index, so the result is deterministic.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;
const INF: u32 = u32::MAX;

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Adjacency lists (ascending right index) of the ε-graph.
pub fn epsilon_adjacency<L, R>(left: &[L], right: &[R], epsilon: f64) -> Vec<Vec<usize>>
where
    L: AsRef<[f64]>,
    R: AsRef<[f64]>,
{
    let mut order: Vec<usize> = (0..right.len()).collect();
    order.sort_by(|&a, &b| right[a].as_ref()[0].total_cmp(&right[b].as_ref()[0]));
    let keys: Vec<f64> = order.iter().map(|&j| right[j].as_ref()[0]).collect();
    // Slightly wider slab than ε; membership is decided by the exact distance below.
    let slack = epsilon * (1.0 + 1e-9) + 1e-12;

    left.iter()
        .map(|l| {
            let l = l.as_ref();
            let lo = keys.partition_point(|&k| k < l[0] - slack);
            let hi = keys.partition_point(|&k| k <= l[0] + slack);
            let mut adj: Vec<usize> = order[lo..hi]
                .iter()
                .copied()
                .filter(|&j| euclidean(l, right[j].as_ref()) <= epsilon)
                .collect();
            adj.sort_unstable();
            adj
        })
        .collect()
}

/// Maximum matching of the ε-graph, as `(left, right)` pairs sorted by left index.
pub fn max_matching<L, R>(left: &[L], right: &[R], epsilon: f64) -> Vec<(usize, usize)>
where
    L: AsRef<[f64]>,
    R: AsRef<[f64]>,
{
    let adj = epsilon_adjacency(left, right, epsilon);
    hopcroft_karp(&adj, right.len())
}

/// Hopcroft–Karp on explicit adjacency lists (`adj[left]` lists right vertices).
pub fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> Vec<(usize, usize)> {
    let n_left = adj.len();
    let mut match_l = vec![NIL; n_left];
    let mut match_r = vec![NIL; n_right];
    let mut dist = vec![INF; n_left];
    let mut next_edge = vec![0usize; n_left];
    let mut queue = VecDeque::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut via: Vec<usize> = Vec::new();

    loop {
        // BFS layering from all free left vertices.
        queue.clear();
        for u in 0..n_left {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == INF {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }

        next_edge.iter_mut().for_each(|e| *e = 0);
        for root in 0..n_left {
            if match_l[root] != NIL {
                continue;
            }
            stack.clear();
            via.clear();
            stack.push(root);
            while let Some(&u) = stack.last() {
                if next_edge[u] < adj[u].len() {
                    let v = adj[u][next_edge[u]];
                    next_edge[u] += 1;
                    let w = match_r[v];
                    if w == NIL {
                        // Flip the alternating path held on the stack.
                        let mut free = v;
                        for idx in (0..stack.len()).rev() {
                            let u = stack[idx];
                            match_l[u] = free;
                            match_r[free] = u;
                            if idx > 0 {
                                free = via[idx - 1];
                            }
                        }
                        break;
                    } else if dist[w] != INF && dist[w] == dist[u] + 1 {
                        stack.push(w);
                        via.push(v);
                    }
                } else {
                    dist[u] = INF;
                    stack.pop();
                    via.pop();
                }
            }
        }
    }

    match_l
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != NIL)
        .map(|(u, &v)| (u, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive maximum matching over bitmasks of used right vertices.
    fn brute_force_size(adj: &[Vec<usize>]) -> usize {
        fn go(i: usize, used: u32, adj: &[Vec<usize>]) -> usize {
            if i == adj.len() {
                return 0;
            }
            let mut best = go(i + 1, used, adj);
            for &v in &adj[i] {
                if used & (1 << v) == 0 {
                    best = best.max(1 + go(i + 1, used | (1 << v), adj));
                }
            }
            best
        }
        go(0, 0, adj)
    }

    fn assert_valid(pairs: &[(usize, usize)], adj: &[Vec<usize>]) {
        let mut seen_l = std::collections::HashSet::new();
        let mut seen_r = std::collections::HashSet::new();
        for &(u, v) in pairs {
            assert!(seen_l.insert(u) && seen_r.insert(v));
            assert!(adj[u].contains(&v));
        }
    }

    #[test]
    fn no_edges_gives_empty_matching() {
        let left = vec![vec![0.0], vec![0.1]];
        let right = vec![vec![0.9]];
        assert!(max_matching(&left, &right, 0.1).is_empty());
        let none: Vec<Vec<f64>> = Vec::new();
        assert!(max_matching(&none, &right, 0.1).is_empty());
        assert!(max_matching(&left, &none, 0.1).is_empty());
    }

    #[test]
    fn two_left_one_right() {
        let left = vec![vec![0.0], vec![0.2]];
        let right = vec![vec![0.1]];
        let m = max_matching(&left, &right, 0.15);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn needs_augmenting_path() {
        // Greedy would match left 0 to right 0 and strand left 1.
        let adj = vec![vec![0, 1], vec![0]];
        let m = hopcroft_karp(&adj, 2);
        assert_eq!(m, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn boundary_distance_is_adjacent() {
        let left = vec![vec![0.25]];
        let right = vec![vec![0.5]];
        assert_eq!(max_matching(&left, &right, 0.25).len(), 1);
        assert!(max_matching(&left, &right, 0.2499).is_empty());
    }

    #[test]
    fn multidimensional_adjacency_uses_euclidean_distance() {
        let left = vec![vec![0.0, 0.0]];
        let right = vec![vec![0.3, 0.4], vec![0.0, 0.6]];
        assert_eq!(epsilon_adjacency(&left, &right, 0.5), vec![vec![0]]);
    }

    #[test]
    fn long_chain_does_not_overflow_stack() {
        // Path graph where every augmentation walks back through the chain.
        let n = 50_000;
        let left: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 + 0.5]).collect();
        let right: Vec<Vec<f64>> = (0..=n).map(|i| vec![i as f64]).collect();
        assert_eq!(max_matching(&left, &right, 0.5).len(), n);
    }

    #[test]
    fn matches_exhaustive_search_on_small_graphs() {
        let mut s = crate::rng::Stream::from_seed(99);
        for _ in 0..300 {
            let nl = (s.next_u64() % 9) as usize;
            let nr = (s.next_u64() % 9) as usize;
            let left: Vec<Vec<f64>> = (0..nl).map(|_| vec![s.uniform()]).collect();
            let right: Vec<Vec<f64>> = (0..nr).map(|_| vec![s.uniform()]).collect();
            let eps = 0.3 * s.uniform();
            let adj = epsilon_adjacency(&left, &right, eps);
            let pairs = max_matching(&left, &right, eps);
            assert_valid(&pairs, &adj);
            assert_eq!(pairs.len(), brute_force_size(&adj));
        }
    }
}
