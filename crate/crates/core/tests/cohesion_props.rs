mod common;

use common::{random_net, rng, TIE_DENS};
use median_consensus::cohesion::*;
use median_consensus::Network64;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn random_set(n: usize, mask: u64) -> Option<NodeSet> {
    let s = NodeSet::from_mask(n, mask & ((1u64 << n) - 1));
    (!s.is_empty()).then_some(s)
}

fn expand(net: &Network64, m: &NodeSet) -> NodeSet {
    cohesive_expansion(net, m, None).unwrap().result
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn expansion_ignores_admission_order(seed in any::<u64>(), n in 2usize..=12, mask in any::<u64>()) {
        let net = random_net(seed, n, 5, TIE_DENS);
        let Some(m) = random_set(n, mask) else { return Ok(()) };
        let base = expand(&net, &m);
        let mut r = rng(seed ^ 7);
        for _ in 0..20 {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut r);
            let trace = cohesive_expansion(&net, &m, Some(&order)).unwrap();
            prop_assert_eq!(&trace.result, &base);
        }
    }

    #[test]
    fn expansion_trace_is_consistent(seed in any::<u64>(), n in 2usize..=12, mask in any::<u64>()) {
        let net = random_net(seed, n, 5, TIE_DENS);
        let Some(m) = random_set(n, mask) else { return Ok(()) };
        let trace = cohesive_expansion(&net, &m, None).unwrap();
        let mut inside = m.indicator();
        for (k, &(node, step)) in trace.additions.iter().enumerate() {
            prop_assert_eq!(step, k + 1);
            prop_assert!(!inside[node]);
            let row = net.scaled(node);
            prop_assert!(2 * row.mass_in(&inside) > row.den);
            inside[node] = true;
        }
        prop_assert_eq!(NodeSet::from_indicator(&inside), trace.result);
    }

    #[test]
    fn union_of_cohesive_sets_is_cohesive(seed in any::<u64>(), n in 2usize..=10, a in any::<u64>(), b in any::<u64>()) {
        let net = random_net(seed, n, 5, TIE_DENS);
        let (Some(m1), Some(m2)) = (random_set(n, a), random_set(n, b)) else { return Ok(()) };
        if is_cohesive(&net, &m1).unwrap() && is_cohesive(&net, &m2).unwrap() {
            prop_assert!(is_cohesive(&net, &m1.union(&m2)).unwrap());
        }
    }

    #[test]
    fn expansion_is_monotone(seed in any::<u64>(), n in 2usize..=10, a in any::<u64>(), b in any::<u64>()) {
        let net = random_net(seed, n, 5, TIE_DENS);
        let (Some(m), Some(extra)) = (random_set(n, a), random_set(n, b)) else { return Ok(()) };
        let bigger = m.union(&extra);
        prop_assert!(expand(&net, &m).is_subset(&expand(&net, &bigger)));
        let both = expand(&net, &m).union(&expand(&net, &extra));
        prop_assert!(both.is_subset(&expand(&net, &bigger)));
    }

    #[test]
    fn expansion_of_cohesive_set_is_smallest_maximal_superset(seed in any::<u64>(), n in 2usize..=10, mask in any::<u64>()) {
        let net = random_net(seed, n, 5, TIE_DENS);
        let Some(m) = random_set(n, mask) else { return Ok(()) };
        if !is_cohesive(&net, &m).unwrap() {
            return Ok(());
        }
        let e = expand(&net, &m);
        prop_assert!(is_maximal_cohesive(&net, &e).unwrap());
        for s in enumerate_maximal_cohesive_sets(&net, 16).unwrap() {
            if m.is_subset(&s) {
                prop_assert!(e.is_subset(&s));
            }
        }
    }

    #[test]
    fn cohesive_partition(seed in any::<u64>(), n in 2usize..=10, mask in any::<u64>()) {
        let net = random_net(seed, n, 5, TIE_DENS);
        for s in enumerate_maximal_cohesive_sets(&net, 16).unwrap() {
            if !s.is_full() {
                prop_assert!(is_maximal_cohesive(&net, &s.complement()).unwrap());
            }
        }
        let Some(m) = random_set(n, mask) else { return Ok(()) };
        if is_cohesive(&net, &m).unwrap() && !is_maximal_cohesive(&net, &m).unwrap() {
            let e = expand(&net, &m);
            prop_assert!(e.is_full() || (is_maximal_cohesive(&net, &e).unwrap()
                && is_maximal_cohesive(&net, &e.complement()).unwrap()));
        }
    }

    #[test]
    fn enumeration_matches_the_predicate(seed in any::<u64>(), n in 1usize..=8) {
        let net = random_net(seed, n, 4, TIE_DENS);
        let sets = enumerate_maximal_cohesive_sets(&net, 16).unwrap();
        prop_assert!(sets.contains(&NodeSet::full(n)));
        for mask in 1u64..1 << n {
            let s = NodeSet::from_mask(n, mask);
            prop_assert_eq!(sets.contains(&s), is_maximal_cohesive(&net, &s).unwrap());
        }
    }
}
