//! Best-first branch-and-bound over the members of a combinatorial system.
//!
//! Members are grown one element at a time: s-t paths by walking from the
//! source, spanning trees by include/exclude decisions in edge-id order,
//! assignments row by row; explicit members are emitted whole. The objective
//! supplies an admissible lower bound for every partial member. Among members
//! of equal value the lexicographically smallest sorted element vector wins.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{guard, Result};
use crate::instances::graph::UnionFind;
use crate::instances::{CombinatorialSystem, SystemKind};

pub(crate) const DEFAULT_NODE_BUDGET: usize = 2_000_000;

pub(crate) trait Objective {
    /// A value no larger than `value(x)` for any member `x` containing `partial`.
    fn lower_bound(&self, partial: &[usize]) -> f64;
    /// Objective of a complete member, `None` when the member is inadmissible.
    fn value(&self, member: &[usize]) -> Option<f64>;
    /// True when no member containing `partial` can be admissible.
    fn prune(&self, _partial: &[usize]) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Found {
    pub value: f64,
    pub member: Vec<usize>,
    pub nodes: usize,
}

#[derive(Clone)]
enum State {
    Root,
    Path { at: usize, visited: Vec<bool> },
    Tree { next: usize, uf: UnionFind, taken: usize },
    Assign { row: usize, used: Vec<bool> },
    Done,
}

struct Node {
    key: f64,
    elems: Vec<usize>,
    state: State,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // reversed: BinaryHeap pops the smallest (key, elems)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.elems.cmp(&self.elems))
    }
}

fn with(elems: &[usize], e: usize) -> Vec<usize> {
    let mut v = elems.to_vec();
    let pos = v.partition_point(|&x| x < e);
    v.insert(pos, e);
    v
}

fn reaches(adj: &[Vec<(usize, usize)>], from: usize, to: usize, blocked: &[bool]) -> bool {
    let mut seen = blocked.to_vec();
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            return true;
        }
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

/// Children as `(elements, state)`; complete members carry `State::Done`.
fn expand(system: &CombinatorialSystem, node: &Node) -> Vec<(Vec<usize>, State)> {
    let mut out = Vec::new();
    match (system.kind(), &node.state) {
        (SystemKind::Explicit { sets }, State::Root) => {
            for s in sets {
                out.push((s.clone(), State::Done));
            }
        }
        (SystemKind::Path { t, .. }, State::Path { at, visited }) => {
            let adj = system.adjacency();
            for &(v, id) in &adj[*at] {
                if visited[v] {
                    continue;
                }
                let elems = with(&node.elems, id);
                if v == *t {
                    out.push((elems, State::Done));
                } else if reaches(adj, v, *t, visited) {
                    let mut visited = visited.clone();
                    visited[v] = true;
                    out.push((elems, State::Path { at: v, visited }));
                }
            }
        }
        (SystemKind::Tree { nodes, edges }, State::Tree { next, uf, taken }) => {
            if *next == edges.len() {
                return out;
            }
            let completable = |uf: &UnionFind| {
                let mut probe = uf.clone();
                for e in &edges[next + 1..] {
                    probe.union(e.u, e.v);
                }
                probe.components() == 1
            };
            let e = edges[*next];
            let mut inc = uf.clone();
            if inc.union(e.u, e.v) {
                let elems = with(&node.elems, *next);
                if taken + 1 == nodes - 1 {
                    out.push((elems, State::Done));
                } else if completable(&inc) {
                    out.push((
                        elems,
                        State::Tree {
                            next: next + 1,
                            uf: inc,
                            taken: taken + 1,
                        },
                    ));
                }
            }
            if completable(uf) {
                out.push((
                    node.elems.clone(),
                    State::Tree {
                        next: next + 1,
                        uf: uf.clone(),
                        taken: *taken,
                    },
                ));
            }
        }
        (SystemKind::Assignment { m }, State::Assign { row, used }) => {
            for j in 0..*m {
                if used[j] {
                    continue;
                }
                let elems = with(&node.elems, row * m + j);
                if row + 1 == *m {
                    out.push((elems, State::Done));
                } else {
                    let mut used = used.clone();
                    used[j] = true;
                    out.push((elems, State::Assign { row: row + 1, used }));
                }
            }
        }
        _ => unreachable!("state does not match system kind"),
    }
    out
}

/// Exact minimizer of `obj` over the members of `system`; `None` when no
/// member is admissible. Refuses with a scale-guard error after `budget`
/// node expansions.
pub(crate) fn minimize(
    system: &CombinatorialSystem,
    obj: &dyn Objective,
    budget: usize,
) -> Result<Option<Found>> {
    let root_state = match system.kind() {
        SystemKind::Explicit { .. } => State::Root,
        SystemKind::Path { nodes, s, .. } => {
            let mut visited = vec![false; *nodes];
            visited[*s] = true;
            State::Path { at: *s, visited }
        }
        SystemKind::Tree { nodes, .. } => State::Tree {
            next: 0,
            uf: UnionFind::new(*nodes),
            taken: 0,
        },
        SystemKind::Assignment { m } => State::Assign {
            row: 0,
            used: vec![false; *m],
        },
    };
    // completions of a node extend its element vector as a prefix
    let prefix_ordered = matches!(
        system.kind(),
        SystemKind::Tree { .. } | SystemKind::Assignment { .. }
    );

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        key: obj.lower_bound(&[]),
        elems: Vec::new(),
        state: root_state,
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut popped = 0usize;

    while let Some(node) = heap.pop() {
        popped += 1;
        if popped > budget {
            return Err(guard(format!(
                "branch-and-bound exceeded its budget of {budget} nodes"
            )));
        }
        if let Some((bv, bx)) = &best {
            if node.key > *bv {
                break;
            }
            if prefix_ordered {
                let k = node.elems.len().min(bx.len());
                if node.elems[..k] > bx[..k] {
                    continue;
                }
            }
        }
        if let State::Done = node.state {
            let better = match &best {
                None => true,
                Some((bv, bx)) => node.key < *bv || (node.key == *bv && node.elems < *bx),
            };
            if better {
                best = Some((node.key, node.elems));
            }
            continue;
        }
        for (elems, state) in expand(system, &node) {
            let key = if let State::Done = state {
                match obj.value(&elems) {
                    Some(v) => v,
                    None => continue,
                }
            } else {
                if obj.prune(&elems) {
                    continue;
                }
                obj.lower_bound(&elems)
            };
            if best.as_ref().is_some_and(|(bv, _)| key > *bv) {
                continue;
            }
            heap.push(Node { key, elems, state });
        }
    }
    Ok(best.map(|(value, member)| Found {
        value,
        member,
        nodes: popped,
    }))
}

/// Reference minimizer by full member enumeration.
pub(crate) fn enumerate_minimize(
    system: &CombinatorialSystem,
    obj: &dyn Objective,
    force: bool,
) -> Result<Option<Found>> {
    let members = system.members(force)?;
    let count = members.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for x in members {
        if let Some(v) = obj.value(&x) {
            if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                best = Some((v, x));
            }
        }
    }
    Ok(best.map(|(value, member)| Found {
        value,
        member,
        nodes: count,
    }))
}
