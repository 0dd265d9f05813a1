//! Ground sets, combinatorial systems and their oracles.
//!
//! A [`CombinatorialSystem`] describes a feasible family `X` of subsets of the
//! ground set `0..n`, either structurally (s-t paths, spanning trees,
//! perfect matchings of an `m x m` grid) or as an explicit list. Every system
//! answers two questions:
//!
//! * [`member_within`](CombinatorialSystem::member_within): is there a member
//!   of `X` using only allowed elements?
//! * [`min_weight_blocker`](CombinatorialSystem::min_weight_blocker): the
//!   cheapest minimal subset that meets every member of `X`.
//!
//! Graph edges are ground elements in list order; assignment cell `(i, j)` is
//! element `i * m + j`.

mod clutter;
pub(crate) mod graph;
mod json;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use clutter::{
    antichain_reduce, blocker_enumerate, BlockerElement, BlockerStructure, Clutter,
    BLOCKER_ENUMERATION_LIMIT,
};
pub(crate) use clutter::{from_mask, minimal_transversals, to_mask};

use crate::error::{domain, guard, invalid, Error, Result};

/// Largest assignment side accepted by the submatrix blocker oracle.
pub const ASSIGNMENT_BLOCKER_LIMIT: usize = 10;
/// Largest graph (in nodes) for which the maximum blocker size is exact.
pub const MAX_BLOCKER_SIZE_NODE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

impl Edge {
    pub fn new(u: usize, v: usize) -> Self {
        Edge { u, v }
    }
}

/// Element ids `0..n` with optional display names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundSet {
    n: usize,
    labels: Option<Vec<String>>,
}

impl GroundSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("ground set must have at least one element"));
        }
        Ok(GroundSet { n, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut g = GroundSet::new(labels.len())?;
        g.labels = Some(labels);
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display name of element `j`, falling back to its id.
    pub fn label(&self, j: usize) -> String {
        match &self.labels {
            Some(l) => l[j].clone(),
            None => j.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemKind {
    Path {
        nodes: usize,
        edges: Vec<Edge>,
        s: usize,
        t: usize,
    },
    Tree {
        nodes: usize,
        edges: Vec<Edge>,
    },
    Assignment {
        m: usize,
    },
    Explicit {
        sets: Vec<Vec<usize>>,
    },
}

/// A ground set plus a feasible family, immutable after construction.
#[derive(Debug, Clone)]
pub struct CombinatorialSystem {
    ground: GroundSet,
    kind: SystemKind,
    adj: Vec<Vec<(usize, usize)>>,
    blocker_cache: OnceLock<Option<Vec<Vec<usize>>>>,
}

fn check_graph(nodes: usize, edges: &[Edge]) -> Result<()> {
    if edges.is_empty() {
        return Err(invalid("graph must have at least one edge"));
    }
    for (id, e) in edges.iter().enumerate() {
        if e.u >= nodes || e.v >= nodes {
            return Err(invalid(format!("edge {id} has an endpoint outside 0..{nodes}")));
        }
        if e.u == e.v {
            return Err(invalid(format!("edge {id} is a self-loop")));
        }
    }
    Ok(())
}

impl CombinatorialSystem {
    fn build(ground: GroundSet, kind: SystemKind) -> Self {
        let adj = match &kind {
            SystemKind::Path { nodes, edges, .. } | SystemKind::Tree { nodes, edges } => {
                graph::adjacency(*nodes, edges)
            }
            _ => Vec::new(),
        };
        CombinatorialSystem {
            ground,
            kind,
            adj,
            blocker_cache: OnceLock::new(),
        }
    }

    /// s-t paths of an undirected multigraph.
    pub fn path(nodes: usize, edges: Vec<Edge>, s: usize, t: usize) -> Result<Self> {
        check_graph(nodes, &edges)?;
        if s >= nodes || t >= nodes {
            return Err(invalid("source or sink outside the node range"));
        }
        if s == t {
            return Err(invalid("source and sink must differ"));
        }
        let ground = GroundSet::new(edges.len())?;
        let sys = Self::build(ground, SystemKind::Path { nodes, edges, s, t });
        if sys.member_within(&vec![true; sys.n()]).is_none() {
            return Err(invalid("no s-t path exists"));
        }
        Ok(sys)
    }

    /// Spanning trees of a connected undirected multigraph.
    pub fn tree(nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        if nodes < 2 {
            return Err(invalid("tree system needs at least two nodes"));
        }
        check_graph(nodes, &edges)?;
        let ground = GroundSet::new(edges.len())?;
        let sys = Self::build(ground, SystemKind::Tree { nodes, edges });
        if sys.member_within(&vec![true; sys.n()]).is_none() {
            return Err(invalid("graph is not connected"));
        }
        Ok(sys)
    }

    /// Perfect matchings of the complete `m x m` bipartite graph.
    pub fn assignment(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("assignment side must be positive"));
        }
        let ground = GroundSet::new(m * m)?;
        Ok(Self::build(ground, SystemKind::Assignment { m }))
    }

    /// An explicit family over `0..n`. Sets are canonicalized (sorted,
    /// deduplicated) and stored in lexicographic order.
    pub fn explicit(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let ground = GroundSet::new(n)?;
        if sets.is_empty() {
            return Err(invalid("explicit family must be nonempty"));
        }
        let mut sets: Vec<Vec<usize>> = sets.iter().map(|s| clutter::canonical(s)).collect();
        for s in &sets {
            if s.is_empty() {
                return Err(invalid("explicit family contains an empty set"));
            }
            if let Some(&e) = s.iter().find(|&&e| e >= n) {
                return Err(invalid(format!("element {e} outside 0..{n}")));
            }
        }
        sets.sort();
        sets.dedup();
        Ok(Self::build(ground, SystemKind::Explicit { sets }))
    }

    /// Attaches display names to the ground elements.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(invalid(format!(
                "{} labels for {} elements",
                labels.len(),
                self.n()
            )));
        }
        self.ground = GroundSet::with_labels(labels)?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.ground.n
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub(crate) fn adjacency(&self) -> &[Vec<(usize, usize)>] {
        &self.adj
    }

    pub fn type_name(&self) -> &'static str {
        match self.kind {
            SystemKind::Path { .. } => "path",
            SystemKind::Tree { .. } => "tree",
            SystemKind::Assignment { .. } => "assignment",
            SystemKind::Explicit { .. } => "explicit",
        }
    }

    pub(crate) fn check_costs(&self, costs: &[f64]) -> Result<()> {
        if costs.len() != self.n() {
            return Err(Error::Dimension(format!(
                "cost vector has length {}, ground set has {}",
                costs.len(),
                self.n()
            )));
        }
        if let Some(j) = costs.iter().position(|c| !c.is_finite()) {
            return Err(domain(format!("cost of element {j} is not finite")));
        }
        Ok(())
    }

    fn check_weights(&self, weights: &[f64]) -> Result<()> {
        self.check_costs(weights)?;
        if let Some(j) = weights.iter().position(|&w| w < 0.0) {
            return Err(domain(format!("weight of element {j} is negative")));
        }
        Ok(())
    }

    /// A member of `X` using only elements with `allowed[j]`, if any.
    /// The result is sorted and deterministic.
    pub fn member_within(&self, allowed: &[bool]) -> Option<Vec<usize>> {
        match &self.kind {
            SystemKind::Path { s, t, .. } => graph::path_within(&self.adj, *s, *t, allowed),
            SystemKind::Tree { nodes, edges } => graph::spanning_tree_within(*nodes, edges, allowed),
            SystemKind::Assignment { m } => {
                let assign = graph::perfect_matching(*m, allowed)?;
                let mut x: Vec<usize> = assign.iter().enumerate().map(|(i, &j)| i * m + j).collect();
                x.sort_unstable();
                Some(x)
            }
            SystemKind::Explicit { sets } => sets
                .iter()
                .find(|s| s.iter().all(|&j| allowed[j]))
                .cloned(),
        }
    }

    /// True iff some member uses only elements with cost `<= t`.
    pub fn feasible_at_threshold(&self, costs: &[f64], t: f64) -> Result<bool> {
        self.check_costs(costs)?;
        if t.is_nan() {
            return Err(domain("threshold is NaN"));
        }
        let allowed: Vec<bool> = costs.iter().map(|&c| c <= t).collect();
        Ok(self.member_within(&allowed).is_some())
    }

    /// True iff `y` meets every member of `X`.
    pub fn hits_all(&self, y: &[usize]) -> bool {
        let mut allowed = vec![true; self.n()];
        for &j in y {
            allowed[j] = false;
        }
        self.member_within(&allowed).is_none()
    }

    /// Minimum-weight blocker value and an unminimized witness.
    pub(crate) fn min_blocker_raw(&self, weights: &[f64]) -> Result<(f64, Vec<usize>, BlockerStructure)> {
        let crossing = |edges: &[Edge], side: &[bool]| -> Vec<usize> {
            edges
                .iter()
                .enumerate()
                .filter(|(_, e)| side[e.u] != side[e.v])
                .map(|(id, _)| id)
                .collect()
        };
        let (y, structure) = match &self.kind {
            SystemKind::Path { edges, s, t, .. } => {
                let side = graph::min_st_cut(&self.adj, edges, weights, *s, *t);
                (crossing(edges, &side), BlockerStructure::Raw)
            }
            SystemKind::Tree { nodes, edges } => {
                let (_, side) = graph::stoer_wagner(*nodes, edges, weights);
                (crossing(edges, &side), BlockerStructure::Raw)
            }
            SystemKind::Assignment { m } => {
                let (rows, cols) = min_submatrix(*m, weights)?;
                let mut cells: Vec<usize> = rows
                    .iter()
                    .flat_map(|&i| cols.iter().map(move |&j| i * m + j))
                    .collect();
                cells.sort_unstable();
                (cells, BlockerStructure::Submatrix { rows, cols })
            }
            SystemKind::Explicit { .. } => {
                let blockers = self.explicit_blocker_sets()?;
                let mut best: Option<(f64, &Vec<usize>)> = None;
                for y in blockers {
                    let w: f64 = y.iter().map(|&j| weights[j]).sum();
                    if best.map_or(true, |(b, _)| w < b) {
                        best = Some((w, y));
                    }
                }
                let (_, y) = best.expect("blocker of a nonempty family is nonempty");
                (y.clone(), BlockerStructure::Raw)
            }
        };
        let value = y.iter().map(|&j| weights[j]).sum();
        Ok((value, y, structure))
    }

    /// Minimum over blocker elements `y` of `sum_{j in y} w_j`, with a minimal
    /// witness.
    pub fn min_weight_blocker(&self, weights: &[f64]) -> Result<(f64, BlockerElement)> {
        self.check_weights(weights)?;
        let (_, y, structure) = self.min_blocker_raw(weights)?;
        let witness = match structure {
            BlockerStructure::Raw => self.blocker_element(y),
            structure => BlockerElement {
                elements: y,
                structure,
            },
        };
        let value = witness.elements.iter().map(|&j| weights[j]).sum();
        Ok((value, witness))
    }

    /// Shrinks a hitting set to a minimal one (dropping elements in id
    /// order) and tags it with its structure.
    pub fn blocker_element(&self, y: Vec<usize>) -> BlockerElement {
        let mut y = clutter::canonical(&y);
        let mut i = 0;
        while i < y.len() {
            let mut trial = y.clone();
            trial.remove(i);
            if self.hits_all(&trial) {
                y = trial;
            } else {
                i += 1;
            }
        }
        let structure = self.structure_of(&y);
        BlockerElement {
            elements: y,
            structure,
        }
    }

    fn structure_of(&self, y: &[usize]) -> BlockerStructure {
        let removed = || {
            let mut allowed = vec![true; self.n()];
            for &j in y {
                allowed[j] = false;
            }
            allowed
        };
        let side_of = |root: usize| -> Vec<usize> {
            let seen = graph::reachable(&self.adj, root, &removed());
            (0..seen.len()).filter(|&v| seen[v]).collect()
        };
        match &self.kind {
            SystemKind::Path { s, .. } => BlockerStructure::Cut {
                source_side: side_of(*s),
            },
            SystemKind::Tree { .. } => BlockerStructure::Cut {
                source_side: side_of(0),
            },
            SystemKind::Assignment { m } => {
                let mut rows: Vec<usize> = y.iter().map(|&c| c / m).collect();
                let mut cols: Vec<usize> = y.iter().map(|&c| c % m).collect();
                rows.sort_unstable();
                rows.dedup();
                cols.sort_unstable();
                cols.dedup();
                if rows.len() * cols.len() == y.len() {
                    BlockerStructure::Submatrix { rows, cols }
                } else {
                    BlockerStructure::Raw
                }
            }
            SystemKind::Explicit { .. } => BlockerStructure::Raw,
        }
    }

    fn explicit_blocker_sets(&self) -> Result<&Vec<Vec<usize>>> {
        let cached = self.blocker_cache.get_or_init(|| {
            let SystemKind::Explicit { sets } = &self.kind else {
                return None;
            };
            if self.n() > BLOCKER_ENUMERATION_LIMIT {
                return None;
            }
            let clutter = antichain_reduce(sets).ok()?;
            let clutter = Clutter::new(self.n(), clutter.subsets().to_vec()).ok()?;
            blocker_enumerate(&clutter)
                .ok()
                .map(|b| b.into_iter().map(|e| e.elements).collect())
        });
        cached.as_ref().ok_or_else(|| {
            guard(format!(
                "explicit blocker enumeration needs at most {BLOCKER_ENUMERATION_LIMIT} elements, got {}",
                self.n()
            ))
        })
    }

    /// Smallest member size.
    pub fn min_member_size(&self) -> usize {
        match &self.kind {
            SystemKind::Path { s, t, .. } => {
                // hop distance
                let mut dist = vec![usize::MAX; self.adj.len()];
                dist[*s] = 0;
                let mut queue = std::collections::VecDeque::from([*s]);
                while let Some(u) = queue.pop_front() {
                    for &(v, _) in &self.adj[u] {
                        if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                dist[*t]
            }
            SystemKind::Tree { nodes, .. } => nodes - 1,
            SystemKind::Assignment { m } => *m,
            SystemKind::Explicit { sets } => sets.iter().map(Vec::len).min().unwrap_or(0),
        }
    }

    /// Largest blocker-element size, and whether the value is exact. When
    /// exact computation is out of reach an upper bound is returned.
    pub fn max_blocker_size(&self) -> (usize, bool) {
        match &self.kind {
            SystemKind::Path { nodes, edges, s, t } => {
                if *nodes <= MAX_BLOCKER_SIZE_NODE_LIMIT {
                    (max_bond(*nodes, edges, *s, Some(*t)), true)
                } else {
                    (edges.len(), false)
                }
            }
            SystemKind::Tree { nodes, edges } => {
                if *nodes <= MAX_BLOCKER_SIZE_NODE_LIMIT {
                    (max_bond(*nodes, edges, 0, None), true)
                } else {
                    (edges.len(), false)
                }
            }
            SystemKind::Assignment { m } => ((m + 1) / 2 * ((m + 2) / 2), true),
            SystemKind::Explicit { .. } => match self.explicit_blocker_sets() {
                Ok(b) => (b.iter().map(Vec::len).max().unwrap_or(0), true),
                Err(_) => (self.n(), false),
            },
        }
    }

    /// Every member of `X`, sorted. Refuses graphs with more than 8 nodes,
    /// assignments with `m > 4` and explicit families over 512 sets unless
    /// `force` is set.
    pub fn members(&self, force: bool) -> Result<Vec<Vec<usize>>> {
        let too_big = match &self.kind {
            SystemKind::Path { nodes, .. } | SystemKind::Tree { nodes, .. } => *nodes > 8,
            SystemKind::Assignment { m } => *m > 4,
            SystemKind::Explicit { sets } => sets.len() > 512,
        };
        if too_big && !force {
            return Err(guard(format!(
                "member enumeration refused for this {} system",
                self.type_name()
            )));
        }
        let mut out = match &self.kind {
            SystemKind::Path { s, t, .. } => {
                let mut out = Vec::new();
                let mut on_path = vec![false; self.adj.len()];
                let mut stack = Vec::new();
                on_path[*s] = true;
                simple_paths(&self.adj, *s, *t, &mut on_path, &mut stack, &mut out);
                out
            }
            SystemKind::Tree { nodes, edges } => {
                let mut out = Vec::new();
                spanning_trees(*nodes, edges, 0, graph::UnionFind::new(*nodes), &mut Vec::new(), &mut out);
                out
            }
            SystemKind::Assignment { m } => {
                let mut out = Vec::new();
                permutations(*m, &mut Vec::new(), &mut vec![false; *m], &mut out);
                out
            }
            SystemKind::Explicit { sets } => sets.clone(),
        };
        for x in &mut out {
            x.sort_unstable();
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// The minimal members of `X` as a clutter over the ground set.
    pub fn clutter(&self, force: bool) -> Result<Clutter> {
        let reduced = antichain_reduce(&self.members(force)?)?;
        Clutter::new(self.n(), reduced.subsets().to_vec())
    }

    /// The full blocker of `X`, by enumeration.
    pub fn blocker(&self, force: bool) -> Result<Vec<BlockerElement>> {
        if let SystemKind::Explicit { .. } = self.kind {
            return Ok(self
                .explicit_blocker_sets()?
                .iter()
                .map(|y| BlockerElement::raw(y.clone()))
                .collect());
        }
        let clutter = self.clutter(force)?;
        Ok(blocker_enumerate(&clutter)?
            .into_iter()
            .map(|b| {
                let structure = self.structure_of(&b.elements);
                BlockerElement {
                    elements: b.elements,
                    structure,
                }
            })
            .collect())
    }
}

/// Cheapest `h x k` submatrix with `|h| + |k| = m + 1`.
fn min_submatrix(m: usize, w: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    if m > ASSIGNMENT_BLOCKER_LIMIT {
        return Err(guard(format!(
            "assignment blocker oracle supports m <= {ASSIGNMENT_BLOCKER_LIMIT}, got {m}"
        )));
    }
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for mask in 1u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
        let k = m + 1 - rows.len();
        let mut col_sums: Vec<(f64, usize)> = (0..m)
            .map(|j| (rows.iter().map(|&i| w[i * m + j]).sum(), j))
            .collect();
        col_sums.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let value: f64 = col_sums[..k].iter().map(|c| c.0).sum();
        if best.as_ref().map_or(true, |b| value < b.0) {
            let mut cols: Vec<usize> = col_sums[..k].iter().map(|c| c.1).collect();
            cols.sort_unstable();
            best = Some((value, rows, cols));
        }
    }
    let (_, rows, cols) = best.expect("m >= 1");
    Ok((rows, cols))
}

/// Largest minimal cut: bipartitions `(S, C \ S)` of the component `C` of
/// `root` with both sides connected; `sink`, when given, must lie outside `S`.
fn max_bond(nodes: usize, edges: &[Edge], root: usize, sink: Option<usize>) -> usize {
    let mut nbr = vec![0u64; nodes];
    for e in edges {
        nbr[e.u] |= 1 << e.v;
        nbr[e.v] |= 1 << e.u;
    }
    let closure = |start: usize, within: u64| -> u64 {
        let mut seen = 1u64 << start;
        let mut frontier = seen;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = nbr[v] & within & !seen;
            seen |= new;
            frontier |= new;
        }
        seen
    };
    let all = if nodes == 64 { u64::MAX } else { (1u64 << nodes) - 1 };
    let comp = closure(root, all);
    let free: Vec<usize> = from_mask(comp)
        .into_iter()
        .filter(|&v| v != root && Some(v) != sink)
        .collect();
    let mut best = 0;
    for bits in 0u64..(1u64 << free.len()) {
        let mut side = 1u64 << root;
        for (i, &v) in free.iter().enumerate() {
            if bits >> i & 1 == 1 {
                side |= 1 << v;
            }
        }
        let other = comp & !side;
        if other == 0 {
            continue;
        }
        if closure(root, side) != side {
            continue;
        }
        let start = sink.unwrap_or(other.trailing_zeros() as usize);
        if closure(start, other) != other {
            continue;
        }
        let size = edges
            .iter()
            .filter(|e| (side >> e.u & 1) != (side >> e.v & 1) && (comp >> e.u & 1) == 1)
            .count();
        best = best.max(size);
    }
    best
}

fn simple_paths(
    adj: &[Vec<(usize, usize)>],
    at: usize,
    t: usize,
    on_path: &mut [bool],
    stack: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if at == t {
        out.push(stack.clone());
        return;
    }
    for &(v, id) in &adj[at] {
        if !on_path[v] {
            on_path[v] = true;
            stack.push(id);
            simple_paths(adj, v, t, on_path, stack, out);
            stack.pop();
            on_path[v] = false;
        }
    }
}

fn spanning_trees(
    nodes: usize,
    edges: &[Edge],
    next: usize,
    uf: graph::UnionFind,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if chosen.len() == nodes - 1 {
        out.push(chosen.clone());
        return;
    }
    if next == edges.len() || edges.len() - next < nodes - 1 - chosen.len() {
        return;
    }
    let e = edges[next];
    let mut with = uf.clone();
    if with.union(e.u, e.v) {
        chosen.push(next);
        spanning_trees(nodes, edges, next + 1, with, chosen, out);
        chosen.pop();
    }
    spanning_trees(nodes, edges, next + 1, uf, chosen, out);
}

fn permutations(m: usize, prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
    if prefix.len() == m {
        out.push(prefix.iter().enumerate().map(|(i, &j)| i * m + j).collect());
        return;
    }
    for j in 0..m {
        if !used[j] {
            used[j] = true;
            prefix.push(j);
            permutations(m, prefix, used, out);
            prefix.pop();
            used[j] = false;
        }
    }
}
