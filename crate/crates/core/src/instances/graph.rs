//! Graph primitives backing the structural oracles: union-find, breadth-first
//! reachability, shortest-augmenting-path max-flow, Stoer-Wagner global
//! minimum cut and augmenting-path bipartite matching.
//!
//! All graphs are undirected multigraphs given as an edge list where the
//! position of an edge in the list is its ground-element id.

use std::collections::VecDeque;

use super::Edge;

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            components: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.components -= 1;
        true
    }

    pub(crate) fn components(&self) -> usize {
        self.components
    }
}

/// Adjacency lists of `(neighbor, edge id)` sorted by edge id.
pub(crate) fn adjacency(nodes: usize, edges: &[Edge]) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); nodes];
    for (id, e) in edges.iter().enumerate() {
        adj[e.u].push((e.v, id));
        adj[e.v].push((e.u, id));
    }
    adj
}

/// Breadth-first search from `s` over edges with `allowed[id]`; returns the
/// edge ids of a shortest (in hops) path to `t`, sorted ascending.
pub(crate) fn path_within(
    adj: &[Vec<(usize, usize)>],
    s: usize,
    t: usize,
    allowed: &[bool],
) -> Option<Vec<usize>> {
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        if u == t {
            break;
        }
        for &(v, id) in &adj[u] {
            if allowed[id] && !seen[v] {
                seen[v] = true;
                pred[v] = Some((u, id));
                queue.push_back(v);
            }
        }
    }
    if !seen[t] {
        return None;
    }
    let mut path = Vec::new();
    let mut at = t;
    while let Some((prev, id)) = pred[at] {
        path.push(id);
        at = prev;
    }
    path.sort_unstable();
    Some(path)
}

/// Nodes reachable from `s` over allowed edges.
pub(crate) fn reachable(adj: &[Vec<(usize, usize)>], s: usize, allowed: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &(v, id) in &adj[u] {
            if allowed[id] && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Kruskal-style spanning tree over allowed edges in id order.
pub(crate) fn spanning_tree_within(
    nodes: usize,
    edges: &[Edge],
    allowed: &[bool],
) -> Option<Vec<usize>> {
    let mut uf = UnionFind::new(nodes);
    let mut tree = Vec::with_capacity(nodes.saturating_sub(1));
    for (id, e) in edges.iter().enumerate() {
        if allowed[id] && uf.union(e.u, e.v) {
            tree.push(id);
        }
    }
    (uf.components() == 1).then_some(tree)
}

/// Minimum s-t cut of an undirected graph with nonnegative real capacities.
///
/// Shortest augmenting paths (Edmonds-Karp); residual capacities below
/// `1e-12 * max(1, max capacity)` are treated as saturated. Returns the
/// source side of the cut.
pub(crate) fn min_st_cut(
    adj: &[Vec<(usize, usize)>],
    edges: &[Edge],
    capacity: &[f64],
    s: usize,
    t: usize,
) -> Vec<bool> {
    let scale = capacity.iter().fold(1.0_f64, |m, &c| m.max(c));
    let tol = 1e-12 * scale;
    // flow[id] is the flow from edges[id].u to edges[id].v (may be negative).
    let mut flow = vec![0.0_f64; edges.len()];
    let residual = |flow: &[f64], id: usize, from: usize| -> f64 {
        if edges[id].u == from {
            capacity[id] - flow[id]
        } else {
            capacity[id] + flow[id]
        }
    };
    loop {
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
        let mut seen = vec![false; adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &(v, id) in &adj[u] {
                if !seen[v] && residual(&flow, id, u) > tol {
                    seen[v] = true;
                    pred[v] = Some((u, id));
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] {
            return seen;
        }
        let mut bottleneck = f64::INFINITY;
        let mut at = t;
        while let Some((prev, id)) = pred[at] {
            bottleneck = bottleneck.min(residual(&flow, id, prev));
            at = prev;
        }
        let mut at = t;
        while let Some((prev, id)) = pred[at] {
            if edges[id].u == prev {
                flow[id] += bottleneck;
            } else {
                flow[id] -= bottleneck;
            }
            at = prev;
        }
    }
}

/// Stoer-Wagner global minimum cut. Returns `(value, side)` where `side`
/// marks one shore of the cut. Requires at least two nodes.
pub(crate) fn stoer_wagner(nodes: usize, edges: &[Edge], weight: &[f64]) -> (f64, Vec<bool>) {
    let mut w = vec![vec![0.0_f64; nodes]; nodes];
    for (id, e) in edges.iter().enumerate() {
        w[e.u][e.v] += weight[id];
        w[e.v][e.u] += weight[id];
    }
    // members[v] = original nodes merged into super-node v
    let mut members: Vec<Vec<usize>> = (0..nodes).map(|v| vec![v]).collect();
    let mut active: Vec<usize> = (0..nodes).collect();
    let mut best = (f64::INFINITY, Vec::new());

    while active.len() > 1 {
        let mut in_a = vec![false; nodes];
        let mut key = vec![0.0_f64; nodes];
        let mut prev = active[0];
        let mut last = active[0];
        for step in 0..active.len() {
            let next = if step == 0 {
                active[0]
            } else {
                *active
                    .iter()
                    .filter(|&&v| !in_a[v])
                    .max_by(|&&a, &&b| key[a].total_cmp(&key[b]).then(b.cmp(&a)))
                    .expect("nonempty")
            };
            in_a[next] = true;
            prev = last;
            last = next;
            for &v in &active {
                if !in_a[v] {
                    key[v] += w[next][v];
                }
            }
        }
        let cut_of_phase = key[last];
        if cut_of_phase < best.0 {
            best = (cut_of_phase, members[last].clone());
        }
        // merge `last` into `prev`
        let moved = std::mem::take(&mut members[last]);
        members[prev].extend(moved);
        for &v in &active {
            w[prev][v] += w[last][v];
            w[v][prev] = w[prev][v];
        }
        w[prev][prev] = 0.0;
        active.retain(|&v| v != last);
    }
    let mut side = vec![false; nodes];
    for v in best.1 {
        side[v] = true;
    }
    (best.0, side)
}

/// Perfect matching on an `m x m` bipartite graph restricted to allowed
/// cells (`allowed[i * m + j]`). Returns `assign[i] = j`.
pub(crate) fn perfect_matching(m: usize, allowed: &[bool]) -> Option<Vec<usize>> {
    let mut match_col: Vec<Option<usize>> = vec![None; m];

    fn augment(
        row: usize,
        m: usize,
        allowed: &[bool],
        visited: &mut [bool],
        match_col: &mut [Option<usize>],
    ) -> bool {
        for col in 0..m {
            if allowed[row * m + col] && !visited[col] {
                visited[col] = true;
                let free = match match_col[col] {
                    None => true,
                    Some(other) => augment(other, m, allowed, visited, match_col),
                };
                if free {
                    match_col[col] = Some(row);
                    return true;
                }
            }
        }
        false
    }

    for row in 0..m {
        let mut visited = vec![false; m];
        if !augment(row, m, allowed, &mut visited, &mut match_col) {
            return None;
        }
    }
    let mut assign = vec![0; m];
    for (col, row) in match_col.iter().enumerate() {
        assign[row.expect("perfect")] = col;
    }
    Some(assign)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(u: usize, v: usize) -> Edge {
        Edge { u, v }
    }

    #[test]
    fn max_flow_on_triangle() {
        // s=0, a=1, t=2; edges sa, at, st
        let edges = vec![e(0, 1), e(1, 2), e(0, 2)];
        let adj = adjacency(3, &edges);
        let side = min_st_cut(&adj, &edges, &[3.0, 1.0, 0.0], 0, 2);
        assert_eq!(side, vec![true, true, false]);
    }

    #[test]
    fn stoer_wagner_on_path_graph() {
        // 0 - 1 - 2 with weights 5 and 2: min cut isolates node 2
        let edges = vec![e(0, 1), e(1, 2)];
        let (value, side) = stoer_wagner(3, &edges, &[5.0, 2.0]);
        assert_eq!(value, 2.0);
        assert!(side[2] != side[1]);
        assert!(side[0] == side[1]);
    }

    #[test]
    fn stoer_wagner_parallel_edges_accumulate() {
        let edges = vec![e(0, 1), e(0, 1), e(1, 2)];
        let (value, _) = stoer_wagner(3, &edges, &[1.0, 1.0, 1.5]);
        assert_eq!(value, 1.5);
    }

    #[test]
    fn matching_anti_diagonal() {
        // [[1,2],[3,4]] with threshold 3: cells 0,1,2 allowed
        let assign = perfect_matching(2, &[true, true, true, false]).unwrap();
        assert_eq!(assign, vec![1, 0]);
        assert!(perfect_matching(2, &[true, true, false, false]).is_none());
    }

    #[test]
    fn union_find_counts_components() {
        let mut uf = UnionFind::new(4);
        assert!(uf.union(0, 1));
        assert!(!uf.union(1, 0));
        uf.union(2, 3);
        assert_eq!(uf.components(), 2);
    }
}
