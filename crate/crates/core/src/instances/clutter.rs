//! Clutters, antichain reduction and blocker enumeration.
//!
//! Subsets are sorted, duplicate-free `Vec<usize>`; enumeration works on
//! `u64` bit masks internally.

use serde::{Deserialize, Serialize};

use crate::error::{guard, invalid, Result};

/// Largest ground set accepted by [`blocker_enumerate`].
pub const BLOCKER_ENUMERATION_LIMIT: usize = 20;

/// A family of mutually noncomparable subsets of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clutter {
    n: usize,
    subsets: Vec<Vec<usize>>,
}

/// How a blocker element was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockerStructure {
    /// Edge cut; `source_side` lists the nodes on the source (or node-0) shore.
    Cut { source_side: Vec<usize> },
    /// Cells of the `rows x cols` submatrix of an assignment system.
    Submatrix { rows: Vec<usize>, cols: Vec<usize> },
    Raw,
}

/// A minimal subset hitting every member of a clutter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockerElement {
    pub elements: Vec<usize>,
    pub structure: BlockerStructure,
}

impl BlockerElement {
    pub fn raw(elements: Vec<usize>) -> Self {
        BlockerElement {
            elements,
            structure: BlockerStructure::Raw,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

pub(crate) fn canonical(subset: &[usize]) -> Vec<usize> {
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

pub(crate) fn is_subset(a: &[usize], b: &[usize]) -> bool {
    // both sorted
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

impl Clutter {
    /// Builds a clutter over `0..n`, rejecting empty families, empty or
    /// out-of-range subsets and comparable pairs.
    pub fn new(n: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(invalid("clutter must have at least one member"));
        }
        let mut subsets: Vec<Vec<usize>> = subsets.iter().map(|s| canonical(s)).collect();
        for s in &subsets {
            if s.is_empty() {
                return Err(invalid("clutter members must be nonempty"));
            }
            if s.iter().any(|&e| e >= n) {
                return Err(invalid(format!("element out of range 0..{n}")));
            }
        }
        subsets.sort();
        for w in subsets.windows(2) {
            if w[0] == w[1] {
                return Err(invalid(format!("duplicate member {:?}", w[0])));
            }
        }
        for (i, a) in subsets.iter().enumerate() {
            for (j, b) in subsets.iter().enumerate() {
                if i != j && a.len() < b.len() && is_subset(a, b) {
                    return Err(invalid(format!("{a:?} is a strict subset of {b:?}")));
                }
            }
        }
        Ok(Clutter { n, subsets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Members in lexicographic order.
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// The blocker of this clutter, itself a clutter.
    pub fn blocker(&self) -> Result<Clutter> {
        let elements = blocker_enumerate(self)?;
        Ok(Clutter {
            n: self.n,
            subsets: elements.into_iter().map(|b| b.elements).collect(),
        })
    }
}

/// Removes every subset that strictly contains another member (and
/// duplicates). The ground set is taken as `0..=max id`.
pub fn antichain_reduce(family: &[Vec<usize>]) -> Result<Clutter> {
    if family.is_empty() {
        return Err(invalid("family must be nonempty"));
    }
    let n = family.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut sets: Vec<Vec<usize>> = family.iter().map(|s| canonical(s)).collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets.dedup();
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for s in sets {
        if !kept.iter().any(|k| is_subset(k, &s)) {
            kept.push(s);
        }
    }
    Clutter::new(n.max(1), kept)
}

pub(crate) fn to_mask(subset: &[usize]) -> u64 {
    subset.iter().fold(0u64, |m, &e| m | (1u64 << e))
}

pub(crate) fn from_mask(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

/// All inclusion-minimal sets hitting every mask in `members`
/// (Berge's incremental algorithm). Result sorted by the canonical subset order.
pub(crate) fn minimal_transversals(members: &[u64]) -> Vec<u64> {
    let mut current: Vec<u64> = vec![0];
    for &member in members {
        let mut next: Vec<u64> = Vec::with_capacity(current.len());
        for &t in &current {
            if t & member != 0 {
                next.push(t);
            } else {
                let mut bits = member;
                while bits != 0 {
                    let low = bits & bits.wrapping_neg();
                    next.push(t | low);
                    bits ^= low;
                }
            }
        }
        current = minimize(next);
    }
    let mut out = current;
    out.sort_by(|&a, &b| from_mask(a).cmp(&from_mask(b)));
    out
}

fn minimize(mut sets: Vec<u64>) -> Vec<u64> {
    sets.sort_by_key(|m| (m.count_ones(), *m));
    sets.dedup();
    let mut kept: Vec<u64> = Vec::with_capacity(sets.len());
    for s in sets {
        if !kept.iter().any(|&k| k & s == k) {
            kept.push(s);
        }
    }
    kept
}

/// Enumerates the blocker of `clutter`: all minimal subsets meeting every member.
pub fn blocker_enumerate(clutter: &Clutter) -> Result<Vec<BlockerElement>> {
    if clutter.n > BLOCKER_ENUMERATION_LIMIT {
        return Err(guard(format!(
            "blocker enumeration needs a ground set of at most {BLOCKER_ENUMERATION_LIMIT} elements, got {}; use the structural oracle",
            clutter.n
        )));
    }
    let masks: Vec<u64> = clutter.subsets.iter().map(|s| to_mask(s)).collect();
    Ok(minimal_transversals(&masks)
        .into_iter()
        .map(|m| BlockerElement::raw(from_mask(m)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sets(b: &[BlockerElement]) -> Vec<Vec<usize>> {
        b.iter().map(|e| e.elements.clone()).collect()
    }

    #[test]
    fn reduce_drops_superset() {
        let c = antichain_reduce(&[vec![1, 2], vec![1, 2, 3], vec![3]]).unwrap();
        assert_eq!(c.subsets(), &[vec![1, 2], vec![3]]);
        let c = antichain_reduce(&[vec![1], vec![2]]).unwrap();
        assert_eq!(c.subsets(), &[vec![1], vec![2]]);
        assert!(antichain_reduce(&[]).is_err());
    }

    #[test]
    fn comparable_members_rejected() {
        assert!(Clutter::new(3, vec![vec![0], vec![0, 1]]).is_err());
        assert!(Clutter::new(3, vec![vec![]]).is_err());
    }

    #[test]
    fn cardinality_blocker() {
        let mut members = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                members.push(vec![a, b]);
            }
        }
        let c = Clutter::new(4, members).unwrap();
        let b = sets(&blocker_enumerate(&c).unwrap());
        assert_eq!(
            b,
            vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]
        );
    }

    #[test]
    fn singleton_is_self_blocking() {
        let c = Clutter::new(2, vec![vec![1]]).unwrap();
        assert_eq!(sets(&blocker_enumerate(&c).unwrap()), vec![vec![1]]);
    }

    #[test]
    fn triangle_paths_give_two_cuts() {
        // sa=0, at=1, st=2; paths {0,1} and {2}
        let c = Clutter::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert_eq!(
            sets(&blocker_enumerate(&c).unwrap()),
            vec![vec![0, 2], vec![1, 2]]
        );
    }

    #[test]
    fn enumeration_guard() {
        let c = Clutter::new(21, vec![vec![20]]).unwrap();
        assert!(matches!(
            blocker_enumerate(&c),
            Err(crate::Error::ScaleGuard(_))
        ));
    }

    fn family(n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
        prop::collection::vec(
            prop::collection::btree_set(0..n, 1..=n).prop_map(|s| s.into_iter().collect()),
            1..10,
        )
    }

    fn bottleneck(family: &[Vec<usize>], c: &[f64]) -> f64 {
        family
            .iter()
            .map(|s| s.iter().map(|&j| c[j]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn blocker_is_an_involution(f in family(7)) {
            let c = antichain_reduce(&f).unwrap();
            let c7 = Clutter::new(7, c.subsets().to_vec()).unwrap();
            prop_assert_eq!(c7.blocker().unwrap().blocker().unwrap(), c7);
        }

        #[test]
        fn reduction_preserves_bottleneck(
            f in family(6),
            costs in prop::collection::vec(prop::collection::vec(-10i32..10, 6), 20),
        ) {
            let c = antichain_reduce(&f).unwrap();
            for s in c.subsets() {
                for t in c.subsets() {
                    prop_assert!(s == t || !is_subset(s, t));
                }
            }
            for cost in costs {
                let cost: Vec<f64> = cost.into_iter().map(f64::from).collect();
                prop_assert_eq!(bottleneck(&f, &cost), bottleneck(c.subsets(), &cost));
            }
        }
    }
}
