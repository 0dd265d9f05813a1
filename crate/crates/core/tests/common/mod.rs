//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the solver except to build
//! systems.

#![allow(dead_code)]

use drbcp::{CombinatorialSystem, Edge};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A system together with its members as bit masks, found by brute force.
pub struct Inst {
    pub sys: CombinatorialSystem,
    pub n: usize,
    pub members: Vec<u64>,
    pub label: &'static str,
}

fn bits(mask: u64) -> Vec<usize> {
    (0..64).filter(|j| mask >> j & 1 == 1).collect()
}

pub fn elements(mask: u64) -> Vec<usize> {
    bits(mask)
}

fn find(p: &mut [usize], x: usize) -> usize {
    let mut x = x;
    while p[x] != x {
        p[x] = p[p[x]];
        x = p[x];
    }
    x
}

/// Connected multigraph: random spanning tree plus extra random edges.
pub fn random_graph(g: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> (usize, Vec<Edge>) {
    let nodes = g.random_range(3..=max_nodes);
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(g);
    let mut edges = Vec::new();
    for i in 1..nodes {
        let j = g.random_range(0..i);
        edges.push(Edge::new(order[i], order[j]));
    }
    let extra = g.random_range(0..=max_edges.saturating_sub(edges.len()));
    for _ in 0..extra {
        let u = g.random_range(0..nodes);
        let mut v = g.random_range(0..nodes);
        while v == u {
            v = g.random_range(0..nodes);
        }
        edges.push(Edge::new(u, v));
    }
    edges.shuffle(g);
    (nodes, edges)
}

pub fn path_members(nodes: usize, edges: &[Edge], s: usize, t: usize) -> Vec<u64> {
    fn walk(at: usize, t: usize, edges: &[Edge], seen: &mut Vec<bool>, used: u64, out: &mut Vec<u64>) {
        if at == t {
            out.push(used);
            return;
        }
        for (id, e) in edges.iter().enumerate() {
            let next = if e.u == at { e.v } else if e.v == at { e.u } else { continue };
            if !seen[next] {
                seen[next] = true;
                walk(next, t, edges, seen, used | 1 << id, out);
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; nodes];
    seen[s] = true;
    let mut out = Vec::new();
    walk(s, t, edges, &mut seen, 0, &mut out);
    out.sort_unstable();
    out.dedup();
    out
}

pub fn tree_members(nodes: usize, edges: &[Edge]) -> Vec<u64> {
    let m = edges.len();
    let mut out = Vec::new();
    for mask in 0u64..(1 << m) {
        if mask.count_ones() as usize != nodes - 1 {
            continue;
        }
        let mut p: Vec<usize> = (0..nodes).collect();
        let mut ok = true;
        for id in bits(mask) {
            let (a, b) = (find(&mut p, edges[id].u), find(&mut p, edges[id].v));
            if a == b {
                ok = false;
                break;
            }
            p[a] = b;
        }
        if ok {
            out.push(mask);
        }
    }
    out
}

pub fn assignment_members(m: usize) -> Vec<u64> {
    fn go(m: usize, row: usize, used: &mut Vec<bool>, acc: u64, out: &mut Vec<u64>) {
        if row == m {
            out.push(acc);
            return;
        }
        for col in 0..m {
            if !used[col] {
                used[col] = true;
                go(m, row + 1, used, acc | 1 << (row * m + col), out);
                used[col] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(m, 0, &mut vec![false; m], 0, &mut out);
    out
}

pub fn random_path(g: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> Inst {
    let (nodes, edges) = random_graph(g, max_nodes, max_edges);
    let members = path_members(nodes, &edges, 0, nodes - 1);
    Inst {
        n: edges.len(),
        sys: CombinatorialSystem::path(nodes, edges, 0, nodes - 1).unwrap(),
        members,
        label: "path",
    }
}

pub fn random_tree(g: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> Inst {
    let (nodes, edges) = random_graph(g, max_nodes, max_edges);
    let members = tree_members(nodes, &edges);
    Inst {
        n: edges.len(),
        sys: CombinatorialSystem::tree(nodes, edges).unwrap(),
        members,
        label: "tree",
    }
}

pub fn assignment(m: usize) -> Inst {
    Inst {
        n: m * m,
        sys: CombinatorialSystem::assignment(m).unwrap(),
        members: assignment_members(m),
        label: "assignment",
    }
}

/// Random clutter on `n` elements with at most `max_sets` sets of size at least `min_size`.
pub fn random_explicit(g: &mut ChaCha8Rng, n: usize, max_sets: usize, min_size: usize) -> Inst {
    let count = g.random_range(1..=max_sets);
    let mut sets: Vec<u64> = Vec::new();
    for _ in 0..count {
        let size = g.random_range(min_size..=n.min(min_size + 3));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(g);
        sets.push(idx[..size].iter().fold(0u64, |m, &j| m | 1 << j));
    }
    sets.sort_unstable();
    sets.dedup();
    let members: Vec<u64> = sets
        .iter()
        .copied()
        .filter(|&s| !sets.iter().any(|&o| o != s && o & s == o))
        .collect();
    let sys = CombinatorialSystem::explicit(n, members.iter().map(|&m| bits(m)).collect()).unwrap();
    Inst {
        n,
        sys,
        members,
        label: "explicit",
    }
}

pub fn hits_all(members: &[u64], h: u64) -> bool {
    members.iter().all(|&x| x & h != 0)
}

/// All minimal transversals, by scanning every subset of the ground set.
pub fn minimal_transversals(members: &[u64], n: usize) -> Vec<u64> {
    assert!(n <= 20);
    (1u64..(1 << n))
        .filter(|&h| hits_all(members, h) && bits(h).iter().all(|&j| !hits_all(members, h & !(1 << j))))
        .collect()
}

pub fn primal(members: &[u64], c: &[f64]) -> f64 {
    members
        .iter()
        .map(|&x| bits(x).iter().map(|&j| c[j]).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min)
}

pub fn dual(blocker: &[u64], c: &[f64]) -> f64 {
    blocker
        .iter()
        .map(|&y| bits(y).iter().map(|&j| c[j]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `t` with `sum_{j in y} (t - a_j)_+^r <= θ^r`, closed forms for `r in {1, 2}`.
pub fn t_star_closed(a: &[f64], theta: f64, r: f64) -> f64 {
    let mut a = a.to_vec();
    a.sort_by(f64::total_cmp);
    let mut best = f64::NAN;
    for p in 1..=a.len() {
        let pre = &a[..p];
        let k = p as f64;
        let t = if r == 1.0 {
            (pre.iter().sum::<f64>() + theta) / k
        } else {
            assert_eq!(r, 2.0);
            let mean = pre.iter().sum::<f64>() / k;
            let ss: f64 = pre.iter().map(|x| (x - mean) * (x - mean)).sum();
            if ss > theta * theta {
                continue;
            }
            mean + ((theta * theta - ss) / k).sqrt()
        };
        let next = a.get(p).copied().unwrap_or(f64::INFINITY);
        if t >= pre[p - 1] - 1e-15 && t <= next + 1e-15 {
            best = t;
            break;
        }
    }
    best
}

/// Cheapest `r`-power cost of lifting some transversal to level `t`.
pub fn lift_cost(transversals: &[u64], c: &[f64], t: f64, r: f64) -> f64 {
    transversals
        .iter()
        .map(|&h| bits(h).iter().map(|&j| (t - c[j]).max(0.0).powf(r)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Largest point of a uniform grid on `[Z, Z + θ]` (`steps + 1` points)
/// reachable by a perturbation of `r`-norm at most `θ`. Reachability is
/// monotone in the level, so the grid is searched by halving.
pub fn perturbation_grid_value(members: &[u64], n: usize, c: &[f64], theta: f64, r: f64, steps: usize) -> f64 {
    let z = primal(members, c);
    if theta == 0.0 {
        return z;
    }
    let transversals: Vec<u64> = (1u64..(1 << n)).filter(|&h| hits_all(members, h)).collect();
    let budget = theta.powf(r);
    let at = |i: usize| z + theta * i as f64 / steps as f64;
    let (mut lo, mut hi) = (0usize, steps);
    if lift_cost(&transversals, c, at(hi), r) <= budget {
        return at(hi);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if lift_cost(&transversals, c, at(mid), r) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

pub fn sorted_mean(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.iter().sum::<f64>() / s.len() as f64
}

pub fn sorted_variance(v: &[f64]) -> f64 {
    let m = sorted_mean(v);
    sorted_mean(&v.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>())
}

pub fn top_sum(vals: &[f64], gamma: usize) -> f64 {
    let mut v = vals.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(gamma);
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Per-scenario values of member `x`: its largest cost, or its Γ largest summed.
pub fn member_values(x: u64, rows: &[Vec<f64>], gamma: usize) -> Vec<f64> {
    rows.iter()
        .map(|c| top_sum(&bits(x).iter().map(|&j| c[j]).collect::<Vec<_>>(), gamma))
        .collect()
}

/// Best member under `score` (`None` = inadmissible); ties to the
/// lexicographically smallest sorted element vector.
pub fn best_member(members: &[u64], score: impl Fn(u64) -> Option<f64>) -> Option<(f64, Vec<usize>)> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for &x in members {
        if let Some(v) = score(x) {
            let e = bits(x);
            if best.as_ref().map_or(true, |b| v < b.0 || (v == b.0 && e < b.1)) {
                best = Some((v, e));
            }
        }
    }
    best
}

/// Worst-case mean over a total-variation ball: move `d/2` of the mass from
/// the smallest values onto the largest.
pub fn tv_closed_form(values: &[f64], d: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let w = 1.0 / v.len() as f64;
    let mut remove = d / 2.0;
    let mut low = 0.0;
    for &x in &v {
        let take = remove.min(w);
        low += take * x;
        remove -= take;
        if remove <= 0.0 {
            break;
        }
    }
    v.iter().sum::<f64>() * w - low + d / 2.0 * v[v.len() - 1]
}

pub fn random_costs(g: &mut ChaCha8Rng, n: usize, integer: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if integer {
                g.random_range(0..8) as f64
            } else {
                g.random_range(0.0..10.0)
            }
        })
        .collect()
}

/// Upper concave hull of points sorted by x, as a vertex list.
pub fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Primal q-Wasserstein value: each scenario reaches level `t` at cost
/// `lift_cost(t)^{q/r}`; the budget `N θ^q` is spread over the scenarios'
/// concave envelopes greedily by slope.
pub fn q_wasserstein_envelope(members: &[u64], n: usize, rows: &[Vec<f64>], theta: f64, q: f64, r: f64, points: usize) -> f64 {
    let transversals: Vec<u64> = (1u64..(1 << n)).filter(|&h| hits_all(members, h)).collect();
    let nn = rows.len() as f64;
    let budget = nn * theta.powf(q);
    let mut base = 0.0;
    let mut segments: Vec<(f64, f64)> = Vec::new(); // (slope, length in cost)
    for c in rows {
        let z = primal(members, c);
        base += z;
        let top = c.iter().copied().fold(f64::NEG_INFINITY, f64::max) + nn.powf(1.0 / q) * theta + 1.0;
        let mut pts: Vec<(f64, f64)> = (0..=points)
            .map(|i| {
                let t = z + (top - z) * i as f64 / points as f64;
                (lift_cost(&transversals, c, t, r).powf(q / r), t)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        pts.dedup_by(|b, a| a.0 == b.0);
        let hull = upper_hull(&pts);
        for w in hull.windows(2) {
            let len = w[1].0 - w[0].0;
            if len > 0.0 {
                segments.push(((w[1].1 - w[0].1) / len, len));
            }
        }
    }
    segments.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut left = budget;
    let mut gain = 0.0;
    for (slope, len) in segments {
        if left <= 0.0 || slope <= 0.0 {
            break;
        }
        let take = len.min(left);
        gain += slope * take;
        left -= take;
    }
    (base + gain) / nn
}

/// Γ-sum bottleneck value of a perturbed vector.
pub fn gamma_primal(members: &[u64], c: &[f64], gamma: usize) -> f64 {
    members
        .iter()
        .map(|&x| top_sum(&bits(x).iter().map(|&j| c[j]).collect::<Vec<_>>(), gamma))
        .fold(f64::INFINITY, f64::min)
}

/// Search over perturbations on the nonnegative `r`-sphere of radius `θ`:
/// a grid of directions, then pattern search moving mass between
/// coordinates with shrinking steps. Returns the best value found, a lower
/// bound on the true maximum.
pub fn gamma_perturbation_search(members: &[u64], n: usize, c: &[f64], gamma: usize, theta: f64, r: f64) -> f64 {
    let eval = |raw: &[f64]| -> f64 {
        let norm = raw.iter().map(|x| x.powf(r)).sum::<f64>().powf(1.0 / r);
        if norm == 0.0 {
            return gamma_primal(members, c, gamma);
        }
        let p: Vec<f64> = c.iter().zip(raw).map(|(a, b)| a + theta * b / norm).collect();
        gamma_primal(members, &p, gamma)
    };
    // coarse grid of directions
    let k = 4usize;
    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let raw: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
        if idx.iter().any(|&i| i > 0) {
            starts.push((eval(&raw), raw));
        }
        let mut p = 0;
        while p < n {
            idx[p] += 1;
            if idx[p] <= k {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == n {
            break;
        }
    }
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    starts.truncate(12);
    let mut best = f64::NEG_INFINITY;
    for (v0, x0) in starts {
        let norm = x0.iter().map(|x| x.powf(r)).sum::<f64>().powf(1.0 / r);
        let mut x: Vec<f64> = x0.iter().map(|v| v / norm).collect();
        let mut v = v0;
        let mut h = 0.25;
        while h > 1e-9 {
            let mut improved = false;
            let mut moves: Vec<Vec<f64>> = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let mut d = vec![0.0; n];
                    d[i] += h;
                    d[j] -= h;
                    moves.push(d);
                    for l in (j + 1)..n {
                        if l == i {
                            continue;
                        }
                        let mut d = vec![0.0; n];
                        d[i] -= h;
                        d[j] += h / 2.0;
                        d[l] += h / 2.0;
                        moves.push(d);
                    }
                }
                let mut d = vec![0.0; n];
                d[i] = h;
                moves.push(d);
            }
            for d in moves {
                let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| (a + b).max(0.0)).collect();
                let ny = y.iter().map(|x| x.powf(r)).sum::<f64>().powf(1.0 / r);
                if ny == 0.0 {
                    continue;
                }
                let y: Vec<f64> = y.iter().map(|a| a / ny).collect();
                let vy = eval(&y);
                if vy > v + 1e-15 {
                    x = y;
                    v = vy;
                    improved = true;
                }
            }
            if !improved {
                h /= 2.0;
            }
        }
        best = best.max(v);
    }
    best
}
