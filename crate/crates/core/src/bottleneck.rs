//! Deterministic bottleneck and Γ-sum evaluation.
//!
//! `Z(c) = min_{x in X} max_{j in x} c_j` is found by binary search over the
//! distinct costs with the threshold oracle. Its max-min dual runs over the
//! blocker of `X` and is evaluated independently through the blocker oracle.

use serde::{Deserialize, Serialize};

use crate::error::{domain, guard, Result};
use crate::instances::{
    from_mask, minimal_transversals, to_mask, BlockerElement, Clutter, CombinatorialSystem,
};
use crate::search::{self, Objective};
use crate::stats::top_gamma_sum;

/// Largest ground set accepted by [`gamma_blocker_enumerate`].
pub const GAMMA_BLOCKER_N_LIMIT: usize = 8;
/// Largest Γ accepted by [`gamma_blocker_enumerate`].
pub const GAMMA_BLOCKER_GAMMA_LIMIT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckResult {
    pub value: f64,
    pub argmin_subset: Vec<usize>,
    pub dual_witness: BlockerElement,
}

fn distinct_sorted(c: &[f64]) -> Vec<f64> {
    let mut v = c.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `Z(c)` without witnesses.
pub fn bottleneck(system: &CombinatorialSystem, c: &[f64]) -> Result<f64> {
    system.check_costs(c)?;
    let levels = distinct_sorted(c);
    // smallest level that admits a member; the top level always does
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let allowed: Vec<bool> = c.iter().map(|&x| x <= levels[mid]).collect();
        if system.member_within(&allowed).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(levels[lo])
}

/// `Z(c)` with a member attaining it and a blocker element whose smallest
/// cost equals it.
pub fn bottleneck_value(system: &CombinatorialSystem, c: &[f64]) -> Result<BottleneckResult> {
    let value = bottleneck(system, c)?;
    let allowed: Vec<bool> = c.iter().map(|&x| x <= value).collect();
    let argmin_subset = system
        .member_within(&allowed)
        .expect("threshold found by search is feasible");
    // elements costing at least Z meet every member
    let heavy: Vec<usize> = (0..c.len()).filter(|&j| c[j] >= value).collect();
    let dual_witness = system.blocker_element(heavy);
    Ok(BottleneckResult {
        value,
        argmin_subset,
        dual_witness,
    })
}

/// `max_{y in F} min_{j in y} c_j` through the blocker oracle: the largest
/// level `t` admitting a blocker element avoiding every element cheaper than `t`.
pub fn dual_bottleneck_value(system: &CombinatorialSystem, c: &[f64]) -> Result<f64> {
    system.check_costs(c)?;
    let levels = distinct_sorted(c);
    let clear = |t: f64| -> Result<bool> {
        let w: Vec<f64> = c.iter().map(|&x| if x < t { 1.0 } else { 0.0 }).collect();
        Ok(system.min_weight_blocker(&w)?.0 == 0.0)
    };
    // the lowest level is always clear
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if clear(levels[mid])? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(levels[lo])
}

struct TopGamma<'a> {
    c: &'a [f64],
    gamma: usize,
    floor: f64,
}

impl Objective for TopGamma<'_> {
    fn lower_bound(&self, partial: &[usize]) -> f64 {
        let missing = self.gamma.saturating_sub(partial.len());
        top_gamma_sum(partial.iter().map(|&j| self.c[j]), self.gamma) + missing as f64 * self.floor
    }

    fn value(&self, member: &[usize]) -> Option<f64> {
        Some(top_gamma_sum(member.iter().map(|&j| self.c[j]), self.gamma))
    }
}

pub(crate) fn check_gamma(system: &CombinatorialSystem, gamma: usize) -> Result<()> {
    if gamma == 0 {
        return Err(domain("gamma must be at least 1"));
    }
    let min = system.min_member_size();
    if gamma > min {
        return Err(domain(format!(
            "gamma = {gamma} exceeds the smallest member size {min}"
        )));
    }
    Ok(())
}

/// `Z_Γ(c) = min_{x in X}` (sum of the Γ largest costs in `x`), with a
/// minimizing member (lexicographically smallest among ties).
pub fn gamma_sum_value(
    system: &CombinatorialSystem,
    c: &[f64],
    gamma: usize,
) -> Result<(f64, Vec<usize>)> {
    system.check_costs(c)?;
    check_gamma(system, gamma)?;
    let floor = c.iter().copied().fold(f64::INFINITY, f64::min);
    let obj = TopGamma { c, gamma, floor };
    let best = search::minimize(system, &obj, search::DEFAULT_NODE_BUDGET)?
        .expect("every member is admissible");
    Ok((best.value, best.member))
}

/// All `Γ`-subsets of `0..n` in lexicographic order.
pub fn gamma_subsets(n: usize, gamma: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for j in start..=n.saturating_sub(left) {
            cur.push(j);
            rec(j + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if gamma <= n {
        rec(0, n, gamma, &mut Vec::new(), &mut out);
    }
    out
}

/// The Γ-blocker: minimal families of Γ-subsets containing a Γ-subset of
/// every clutter member.
pub fn gamma_blocker_enumerate(clutter: &Clutter, gamma: usize) -> Result<Vec<Vec<Vec<usize>>>> {
    let n = clutter.n();
    if n > GAMMA_BLOCKER_N_LIMIT || gamma > GAMMA_BLOCKER_GAMMA_LIMIT {
        return Err(guard(format!(
            "Γ-blocker enumeration supports n <= {GAMMA_BLOCKER_N_LIMIT} and Γ <= {GAMMA_BLOCKER_GAMMA_LIMIT}, got n = {n}, Γ = {gamma}"
        )));
    }
    if gamma == 0 {
        return Err(domain("gamma must be at least 1"));
    }
    let universe = gamma_subsets(n, gamma);
    let mut masks = Vec::with_capacity(clutter.subsets().len());
    for x in clutter.subsets() {
        if x.len() < gamma {
            return Err(domain(format!("member {x:?} has fewer than {gamma} elements")));
        }
        let ids: Vec<usize> = universe
            .iter()
            .enumerate()
            .filter(|(_, s)| s.iter().all(|e| x.contains(e)))
            .map(|(i, _)| i)
            .collect();
        masks.push(to_mask(&ids));
    }
    Ok(minimal_transversals(&masks)
        .into_iter()
        .map(|m| from_mask(m).into_iter().map(|i| universe[i].clone()).collect())
        .collect())
}

/// `max_{y in F_Γ} min_{s in y} sum_{j in s} c_j`.
pub fn gamma_dual_value(gamma_blocker: &[Vec<Vec<usize>>], c: &[f64]) -> f64 {
    gamma_blocker
        .iter()
        .map(|y| {
            y.iter()
                .map(|s| s.iter().map(|&j| c[j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Every member of the feasible family (test oracle, small systems only).
pub fn brute_force_members(system: &CombinatorialSystem) -> Result<Vec<Vec<usize>>> {
    system.members(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::Edge;
    use proptest::prelude::*;

    fn triangle() -> CombinatorialSystem {
        CombinatorialSystem::path(3, vec![Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)], 0, 2)
            .unwrap()
    }

    fn brute_z(members: &[Vec<usize>], c: &[f64]) -> f64 {
        members
            .iter()
            .map(|x| x.iter().map(|&j| c[j]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn triangle_value_and_witnesses() {
        let r = bottleneck_value(&triangle(), &[3.0, 5.0, 7.0]).unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!(r.argmin_subset, vec![0, 1]);
        assert_eq!(r.dual_witness.elements, vec![1, 2]);
        assert_eq!(dual_bottleneck_value(&triangle(), &[3.0, 5.0, 7.0]).unwrap(), 5.0);
    }

    #[test]
    fn assignment_value() {
        let a = CombinatorialSystem::assignment(2).unwrap();
        let c = [1.0, 2.0, 3.0, 4.0];
        let r = bottleneck_value(&a, &c).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.argmin_subset, vec![1, 2]);
        let min_dual = r.dual_witness.elements.iter().map(|&j| c[j]).fold(f64::INFINITY, f64::min);
        assert_eq!(min_dual, 3.0);
        assert_eq!(dual_bottleneck_value(&a, &c).unwrap(), 3.0);
        assert_eq!(gamma_sum_value(&a, &c, 2).unwrap(), (5.0, vec![0, 3]));
    }

    #[test]
    fn constant_and_singleton() {
        let a = CombinatorialSystem::assignment(3).unwrap();
        assert_eq!(bottleneck(&a, &[2.5; 9]).unwrap(), 2.5);
        let s = CombinatorialSystem::explicit(2, vec![vec![1]]).unwrap();
        assert_eq!(dual_bottleneck_value(&s, &[0.0, 9.0]).unwrap(), 9.0);
    }

    #[test]
    fn gamma_sum_examples() {
        let e = CombinatorialSystem::explicit(3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(gamma_sum_value(&e, &[1.0, 5.0, 2.0], 2).unwrap().0, 7.0);
        assert!(matches!(
            gamma_sum_value(&e, &[1.0, 5.0, 2.0], 4),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn gamma_blockers() {
        let a = CombinatorialSystem::assignment(2).unwrap();
        let fg = gamma_blocker_enumerate(&a.clutter(false).unwrap(), 2).unwrap();
        assert_eq!(fg, vec![vec![vec![0, 3], vec![1, 2]]]);

        let c = Clutter::new(3, vec![vec![1, 2]]).unwrap();
        assert_eq!(gamma_blocker_enumerate(&c, 2).unwrap(), vec![vec![vec![1, 2]]]);

        let c = Clutter::new(4, vec![vec![1, 2], vec![2, 3]]).unwrap();
        assert_eq!(
            gamma_blocker_enumerate(&c, 1).unwrap(),
            vec![vec![vec![1], vec![3]], vec![vec![2]]]
        );
        let big = Clutter::new(9, vec![vec![8]]).unwrap();
        assert!(gamma_blocker_enumerate(&big, 1).is_err());
    }

    #[test]
    fn member_enumeration() {
        assert_eq!(brute_force_members(&triangle()).unwrap().len(), 2);
    }

    fn systems() -> impl Strategy<Value = CombinatorialSystem> {
        prop_oneof![
            crate::instances::tests::random_graph()
                .prop_map(|(n, e)| CombinatorialSystem::path(n, e, 0, n - 1).unwrap()),
            crate::instances::tests::random_graph()
                .prop_map(|(n, e)| CombinatorialSystem::tree(n, e).unwrap()),
            (1usize..=4).prop_map(|m| CombinatorialSystem::assignment(m).unwrap()),
            prop::collection::vec(prop::collection::btree_set(0usize..6, 1..4), 1..6).prop_map(|f| {
                CombinatorialSystem::explicit(6, f.into_iter().map(|s| s.into_iter().collect()).collect())
                    .unwrap()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn primal_equals_dual(sys in systems(), c in prop::collection::vec(-20i32..20, 16)) {
            let c: Vec<f64> = c[..sys.n()].iter().map(|&x| f64::from(x)).collect();
            let members = brute_force_members(&sys).unwrap();
            let r = bottleneck_value(&sys, &c).unwrap();
            prop_assert_eq!(r.value, brute_z(&members, &c));
            prop_assert_eq!(r.value, dual_bottleneck_value(&sys, &c).unwrap());
            let max_x = r.argmin_subset.iter().map(|&j| c[j]).fold(f64::NEG_INFINITY, f64::max);
            let min_y = r.dual_witness.elements.iter().map(|&j| c[j]).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(max_x, r.value);
            prop_assert_eq!(min_y, r.value);
            prop_assert!(sys.hits_all(&r.dual_witness.elements));
        }

        #[test]
        fn shift_and_monotonicity(
            sys in systems(),
            c in prop::collection::vec(-20i32..20, 16),
            bump in prop::collection::vec(0i32..5, 16),
            kappa in -10i32..10,
        ) {
            let c: Vec<f64> = c[..sys.n()].iter().map(|&x| f64::from(x)).collect();
            let up: Vec<f64> = c.iter().zip(&bump).map(|(a, &b)| a + f64::from(b)).collect();
            let shifted: Vec<f64> = c.iter().map(|a| a + f64::from(kappa)).collect();
            let z = bottleneck(&sys, &c).unwrap();
            prop_assert!(z <= bottleneck(&sys, &up).unwrap());
            prop_assert_eq!(bottleneck(&sys, &shifted).unwrap(), z + f64::from(kappa));
        }

        #[test]
        fn gamma_sum_matches_enumeration(sys in systems(), c in prop::collection::vec(-20i32..20, 16), g in 1usize..3) {
            let c: Vec<f64> = c[..sys.n()].iter().map(|&x| f64::from(x)).collect();
            prop_assume!(g <= sys.min_member_size());
            let members = brute_force_members(&sys).unwrap();
            let brute = members.iter().map(|x| top_gamma_sum(x.iter().map(|&j| c[j]), g)).fold(f64::INFINITY, f64::min);
            let (v, x) = gamma_sum_value(&sys, &c, g).unwrap();
            prop_assert_eq!(v, brute);
            let first = members.iter().find(|x| top_gamma_sum(x.iter().map(|&j| c[j]), g) == brute).unwrap();
            prop_assert_eq!(&x, first);
            if g == 1 {
                prop_assert_eq!(v, bottleneck(&sys, &c).unwrap());
            }
            let shifted: Vec<f64> = c.iter().map(|a| a + 3.0).collect();
            prop_assert_eq!(gamma_sum_value(&sys, &shifted, g).unwrap().0, v + 3.0 * g as f64);
        }

        #[test]
        fn gamma_duality(
            f in prop::collection::vec(prop::collection::btree_set(0usize..6, 2..5), 1..5),
            c in prop::collection::vec(-9i32..9, 6),
            g in 1usize..=2,
        ) {
            let sys = CombinatorialSystem::explicit(6, f.into_iter().map(|s| s.into_iter().collect()).collect()).unwrap();
            let c: Vec<f64> = c.iter().map(|&x| f64::from(x)).collect();
            let fg = gamma_blocker_enumerate(&sys.clutter(false).unwrap(), g).unwrap();
            prop_assert_eq!(gamma_dual_value(&fg, &c), gamma_sum_value(&sys, &c, g).unwrap().0);
        }
    }
}
