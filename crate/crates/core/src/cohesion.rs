//! Cohesive sets, maximal cohesive sets and cohesive expansion.
//!
//! A non-empty set `M` is cohesive when every member places at least half of
//! its weight inside `M`, and maximal cohesive when additionally no outsider
//! places strictly more than half of its weight inside `M`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::InfluenceNetwork;
use crate::scalar::Scalar;

pub const DEFAULT_ENUMERATION_BOUND: usize = 16;

/// Subset of `{0, .., parent_n - 1}`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeSet {
    members: Vec<usize>,
    parent_n: usize,
}

impl NodeSet {
    pub fn new(parent_n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&v| v >= parent_n) {
            return Err(Error::InvalidNode { node: bad, n: parent_n });
        }
        Ok(Self { members, parent_n })
    }

    pub fn full(parent_n: usize) -> Self {
        Self {
            members: (0..parent_n).collect(),
            parent_n,
        }
    }

    pub fn from_indicator(indicator: &[bool]) -> Self {
        Self {
            members: (0..indicator.len()).filter(|&i| indicator[i]).collect(),
            parent_n: indicator.len(),
        }
    }

    pub fn from_mask(parent_n: usize, mask: u64) -> Self {
        Self {
            members: (0..parent_n).filter(|&i| mask >> i & 1 == 1).collect(),
            parent_n,
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn parent_n(&self) -> usize {
        self.parent_n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.parent_n
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut ind = vec![false; self.parent_n];
        for &v in &self.members {
            ind[v] = true;
        }
        ind
    }

    pub fn complement(&self) -> Self {
        let ind = self.indicator();
        Self {
            members: (0..self.parent_n).filter(|&i| !ind[i]).collect(),
            parent_n: self.parent_n,
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        debug_assert_eq!(self.parent_n, other.parent_n);
        Self::new(self.parent_n, self.members.iter().chain(&other.members).copied())
            .expect("members already in range")
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members.iter().all(|&v| other.contains(v))
    }
}

/// Result of a cohesive expansion together with the admission order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpansionTrace {
    pub result: NodeSet,
    /// `(node, step)`: `node` joined at iteration `step` (1-based).
    pub additions: Vec<(usize, usize)>,
}

fn check_set<W: Scalar>(net: &InfluenceNetwork<W>, m: &NodeSet) -> Result<()> {
    if m.parent_n() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: m.parent_n(),
        });
    }
    if m.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(())
}

pub(crate) fn cohesive_indicator<W: Scalar>(net: &InfluenceNetwork<W>, ind: &[bool]) -> bool {
    (0..net.n()).filter(|&i| ind[i]).all(|i| {
        let row = net.scaled(i);
        2 * row.mass_in(ind) >= row.den
    })
}

pub(crate) fn closed_indicator<W: Scalar>(net: &InfluenceNetwork<W>, ind: &[bool]) -> bool {
    (0..net.n()).filter(|&i| !ind[i]).all(|i| {
        let row = net.scaled(i);
        2 * row.mass_in(ind) <= row.den
    })
}

pub fn is_cohesive<W: Scalar>(net: &InfluenceNetwork<W>, m: &NodeSet) -> Result<bool> {
    check_set(net, m)?;
    Ok(cohesive_indicator(net, &m.indicator()))
}

pub fn is_maximal_cohesive<W: Scalar>(net: &InfluenceNetwork<W>, m: &NodeSet) -> Result<bool> {
    check_set(net, m)?;
    let ind = m.indicator();
    Ok(cohesive_indicator(net, &ind) && closed_indicator(net, &ind))
}

/// Iterates "admit an outsider with strictly more than half of its weight
/// inside the current set" to a fixed point.
///
/// One node is admitted per iteration. Among several qualifiers the one that
/// comes first in `order_hint` (a permutation of all nodes) is taken; without
/// a hint the lowest index wins.
pub fn cohesive_expansion<W: Scalar>(
    net: &InfluenceNetwork<W>,
    m: &NodeSet,
    order_hint: Option<&[usize]>,
) -> Result<ExpansionTrace> {
    check_set(net, m)?;
    let n = net.n();
    let order: Vec<usize> = match order_hint {
        Some(hint) => {
            let mut seen = vec![false; n];
            for &v in hint {
                if v >= n || std::mem::replace(&mut seen[v], true) {
                    return Err(Error::Parse("order hint must be a permutation of the nodes".into()));
                }
            }
            if hint.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: hint.len() });
            }
            hint.to_vec()
        }
        None => (0..n).collect(),
    };
    let mut inside = m.indicator();
    let mut mass: Vec<u64> = (0..n).map(|i| net.scaled(i).mass_in(&inside)).collect();
    let mut additions = Vec::new();
    loop {
        let next = order
            .iter()
            .copied()
            .find(|&i| !inside[i] && 2 * mass[i] > net.scaled(i).den);
        let Some(k) = next else { break };
        inside[k] = true;
        additions.push((k, additions.len() + 1));
        for &i in net.in_neighbors(k) {
            mass[i] += scaled_weight(net, i, k);
        }
    }
    Ok(ExpansionTrace {
        result: NodeSet::from_indicator(&inside),
        additions,
    })
}

fn scaled_weight<W: Scalar>(net: &InfluenceNetwork<W>, i: usize, j: usize) -> u64 {
    let row = net.scaled(i);
    row.entries
        .binary_search_by_key(&j, |(k, _)| *k)
        .map(|pos| row.entries[pos].1)
        .unwrap_or(0)
}

fn check_bound(n: usize, bound: usize) -> Result<()> {
    if n > bound || n > 63 {
        return Err(Error::BoundExceeded {
            what: "maximal cohesive set enumeration",
            size: n as u128,
            bound: bound.min(63) as u128,
        });
    }
    Ok(())
}

fn maximal_cohesive_mask<W: Scalar>(net: &InfluenceNetwork<W>, mask: u64) -> bool {
    (0..net.n()).all(|i| {
        let row = net.scaled(i);
        let twice = 2 * row.mass_in_mask(mask);
        if mask >> i & 1 == 1 {
            twice >= row.den
        } else {
            twice <= row.den
        }
    })
}

/// Every maximal cohesive set, by exhaustive subset check. Refuses networks
/// with more than `bound` nodes.
pub fn enumerate_maximal_cohesive_sets<W: Scalar>(
    net: &InfluenceNetwork<W>,
    bound: usize,
) -> Result<Vec<NodeSet>> {
    let n = net.n();
    check_bound(n, bound)?;
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut masks: Vec<u64> = (1..=full)
        .into_par_iter()
        .filter(|&mask| maximal_cohesive_mask(net, mask))
        .collect();
    masks.sort_unstable_by_key(|m| (m.count_ones(), *m));
    Ok(masks.into_iter().map(|m| NodeSet::from_mask(n, m)).collect())
}

/// Some maximal cohesive set other than the whole node set, if one exists.
pub fn nontrivial_maximal_cohesive_set<W: Scalar>(
    net: &InfluenceNetwork<W>,
    bound: usize,
) -> Result<Option<NodeSet>> {
    let n = net.n();
    check_bound(n, bound)?;
    let full = (1u64 << n) - 1;
    let found = (1..full)
        .into_par_iter()
        .filter(|&mask| maximal_cohesive_mask(net, mask))
        .min_by_key(|m| (m.count_ones(), *m));
    Ok(found.map(|m| NodeSet::from_mask(n, m)))
}

pub fn has_nontrivial_maximal_cohesive_set<W: Scalar>(
    net: &InfluenceNetwork<W>,
    bound: usize,
) -> Result<bool> {
    nontrivial_maximal_cohesive_set(net, bound).map(|s| s.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn set(n: usize, m: &[usize]) -> NodeSet {
        NodeSet::new(n, m.iter().copied()).unwrap()
    }

    #[test]
    fn full_set_is_maximal_cohesive() {
        let net = fixtures::lattice::<Q>(3, 3);
        assert!(is_cohesive(&net, &NodeSet::full(9)).unwrap());
        assert!(is_maximal_cohesive(&net, &NodeSet::full(9)).unwrap());
    }

    #[test]
    fn singleton_with_half_self_weight() {
        let half = InfluenceNetwork::from_rows(
            vec![vec![(0, Q::new(1, 2)), (1, Q::new(1, 2))], vec![(1, Q::from_integer(1))]],
            false,
        )
        .unwrap();
        assert!(is_cohesive(&half, &set(2, &[0])).unwrap());
        let less = InfluenceNetwork::from_rows(
            vec![vec![(0, Q::new(2, 5)), (1, Q::new(3, 5))], vec![(1, Q::from_integer(1))]],
            false,
        )
        .unwrap();
        assert!(!is_cohesive(&less, &set(2, &[0])).unwrap());
    }

    #[test]
    fn clique_of_two_disjoint_cliques_is_maximal() {
        let net = fixtures::disjoint_cliques::<Q>(&[3, 3]);
        assert!(is_maximal_cohesive(&net, &set(6, &[0, 1, 2])).unwrap());
        assert!(!is_cohesive(&net, &set(6, &[0, 3])).unwrap());
    }

    #[test]
    fn empty_sets_are_rejected() {
        let net = fixtures::complete_uniform::<Q>(3);
        let empty = NodeSet::new(3, []).unwrap();
        assert!(matches!(is_cohesive(&net, &empty), Err(Error::EmptySet)));
        assert!(matches!(cohesive_expansion(&net, &empty, None), Err(Error::EmptySet)));
    }

    #[test]
    fn expansion_of_maximal_set_is_fixed_point() {
        let net = fixtures::disjoint_cliques::<Q>(&[2, 3]);
        let m = set(5, &[2, 3, 4]);
        let trace = cohesive_expansion(&net, &m, None).unwrap();
        assert_eq!(trace.result, m);
        assert!(trace.additions.is_empty());
    }

    #[test]
    fn expansion_records_admissions() {
        // ring with unit weights: node i listens to i+1, so the set grows backwards
        let net = fixtures::ring::<Q>(4);
        let trace = cohesive_expansion(&net, &set(4, &[0]), None).unwrap();
        assert!(trace.result.is_full());
        assert_eq!(trace.additions, vec![(3, 1), (2, 2), (1, 3)]);
    }

    #[test]
    fn enumeration_examples() {
        let complete = fixtures::complete_without_self_loops::<Q>(4);
        assert_eq!(enumerate_maximal_cohesive_sets(&complete, 16).unwrap(), vec![NodeSet::full(4)]);
        assert!(!has_nontrivial_maximal_cohesive_set(&complete, 16).unwrap());

        // with self-loops and weight 1/4 any pair holds exactly half of each member's mass
        let looped = fixtures::complete_uniform::<Q>(4);
        let sets = enumerate_maximal_cohesive_sets(&looped, 16).unwrap();
        assert_eq!(sets.len(), 7);
        assert!(sets.contains(&set(4, &[0, 1])));

        let cliques = fixtures::disjoint_cliques::<Q>(&[3, 3]);
        assert_eq!(
            enumerate_maximal_cohesive_sets(&cliques, 16).unwrap(),
            vec![set(6, &[0, 1, 2]), set(6, &[3, 4, 5]), NodeSet::full(6)]
        );

        // 2-cliques with weight 1/2: a self-loop alone already carries half the
        // mass, so every non-empty subset is maximal cohesive
        let pairs = fixtures::disjoint_cliques::<Q>(&[2, 2]);
        assert_eq!(enumerate_maximal_cohesive_sets(&pairs, 16).unwrap().len(), 15);

        let single = fixtures::isolated::<Q>(1);
        assert_eq!(enumerate_maximal_cohesive_sets(&single, 16).unwrap(), vec![NodeSet::full(1)]);
        assert!(!has_nontrivial_maximal_cohesive_set(&single, 16).unwrap());
    }

    #[test]
    fn bridged_cliques_have_nontrivial_sets() {
        let net = fixtures::bridged_cliques::<Q>(3, Q::new(2, 5));
        assert!(has_nontrivial_maximal_cohesive_set(&net, 16).unwrap());
        // node 2 puts only 2/5 on {0, 1}, so the pair is already maximal
        assert_eq!(nontrivial_maximal_cohesive_set(&net, 16).unwrap(), Some(set(6, &[0, 1])));
        let sets = enumerate_maximal_cohesive_sets(&net, 16).unwrap();
        assert!(sets.contains(&set(6, &[0, 1, 2])));
        assert!(sets.contains(&set(6, &[3, 4, 5])));
    }

    #[test]
    fn enumeration_refuses_large_networks() {
        let net = fixtures::ring::<Q>(20);
        assert!(matches!(
            enumerate_maximal_cohesive_sets(&net, 16),
            Err(Error::BoundExceeded { .. })
        ));
    }
}
