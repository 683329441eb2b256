//! Equilibria, their structural characterisation, and exact decisions about
//! whether consensus is reachable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohesion::{
    closed_indicator, cohesive_expansion, cohesive_indicator, enumerate_maximal_cohesive_sets, NodeSet,
};
use crate::dynamics::{
    apply_sequence, default_budget, ensemble, med_at, EnsembleConfig, InitialSpec, OpinionState,
    ReplicaSchedule, UpdateSchedule,
};
use crate::error::{Error, Result};
use crate::median::clamped_median;
use crate::network::{InfluenceNetwork, ScaledRow};
use crate::scalar::Scalar;

/// Default cap on the number of labelled states visited by [`enumerate_equilibria`].
pub const DEFAULT_STATE_BUDGET: u128 = 1_000_000;
/// Default node bound for the ternary reachability search.
pub const DEFAULT_DECISION_BOUND: usize = 12;
/// Default node bound for the search over orderings of distinct opinions.
pub const DEFAULT_ORDER_TYPE_BOUND: usize = 7;
/// Hard cap on the state space of either search (one byte per state).
pub const MAX_SEARCH_STATES: u64 = 1 << 26;

fn check_len<O, W: Scalar>(net: &InfluenceNetwork<W>, x: &[O]) -> Result<()> {
    if x.len() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: x.len(),
        });
    }
    Ok(())
}

fn both_sides_maximal<W: Scalar>(net: &InfluenceNetwork<W>, low: &[bool]) -> bool {
    let high: Vec<bool> = low.iter().map(|b| !b).collect();
    cohesive_indicator(net, low)
        && closed_indicator(net, low)
        && cohesive_indicator(net, &high)
        && closed_indicator(net, &high)
}

/// Equilibrium test through cuts: `x` is a consensus, or for every pair of
/// consecutive distinct values the nodes below the cut and the nodes above it
/// both form maximal cohesive sets.
pub fn is_equilibrium_structural<O: Ord + Clone, W: Scalar>(
    net: &InfluenceNetwork<W>,
    x: &[O],
) -> Result<bool> {
    check_len(net, x)?;
    let ranks = OpinionState::from(x.to_vec()).ranks();
    let levels = ranks.iter().copied().max().map_or(0, |m| m + 1);
    Ok((0..levels.saturating_sub(1)).all(|r| {
        let low: Vec<bool> = ranks.iter().map(|&v| v <= r).collect();
        both_sides_maximal(net, &low)
    }))
}

fn state_count(radix: usize, n: usize) -> Option<u128> {
    (radix as u128).checked_pow(n as u32)
}

/// All fixed points among the `R^n` states over `labels`, found by checking
/// every node's median directly. States are listed lexicographically with
/// node 0 most significant.
pub fn enumerate_equilibria<O, W>(
    net: &InfluenceNetwork<W>,
    labels: &[O],
    budget: u128,
) -> Result<Vec<OpinionState<O>>>
where
    O: Ord + Clone + Send + Sync,
    W: Scalar,
{
    let mut labels = labels.to_vec();
    labels.sort();
    labels.dedup();
    if labels.is_empty() {
        return Err(Error::EmptyProfile);
    }
    let n = net.n();
    let r = labels.len();
    let total = state_count(r, n).filter(|&t| t <= budget).ok_or(Error::BoundExceeded {
        what: "labelled states",
        size: state_count(r, n).unwrap_or(u128::MAX),
        bound: budget,
    })?;
    let fixed: Vec<u64> = (0..total as u64)
        .into_par_iter()
        .filter(|&idx| {
            let mut digits = vec![0u32; n];
            let mut rest = idx;
            for d in digits.iter_mut().rev() {
                *d = (rest % r as u64) as u32;
                rest /= r as u64;
            }
            (0..n).all(|i| med_at(net, &digits, i) == digits[i])
        })
        .collect();
    Ok(fixed
        .into_iter()
        .map(|idx| {
            let mut state = vec![labels[0].clone(); n];
            let mut rest = idx;
            for v in state.iter_mut().rev() {
                *v = labels[(rest % r as u64) as usize].clone();
                rest /= r as u64;
            }
            OpinionState::new(state)
        })
        .collect())
}

/// An update sequence together with the equilibrium it ends in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpdateSequence<O> {
    pub schedule: UpdateSchedule,
    pub terminal: OpinionState<O>,
}

fn rank_med<W: Scalar>(net: &InfluenceNetwork<W>, state: &[u32], i: usize) -> u32 {
    med_at(net, state, i)
}

/// Builds an update sequence that drives `x0` to an equilibrium, one cut at a
/// time from the lowest value upwards.
///
/// For each cut, nodes on the low side with a strict majority of weight above
/// the cut are updated (lowest index first) until none is left; then the low
/// side is grown by cohesive expansion and the admitted nodes are updated in
/// admission order. The result is replayed and checked before it is returned.
pub fn build_update_sequence<O: Ord + Clone, W: Scalar>(
    net: &InfluenceNetwork<W>,
    x0: &[O],
) -> Result<UpdateSequence<O>> {
    check_len(net, x0)?;
    let n = net.n();
    let initial = OpinionState::from(x0.to_vec());
    let mut state = initial.ranks();
    let levels = state.iter().copied().max().map_or(0, |m| m + 1);
    let mut seq = Vec::new();
    let apply = |state: &mut Vec<u32>, i: usize, seq: &mut Vec<usize>| {
        let new = rank_med(net, state, i);
        state[i] = new;
        seq.push(i);
        new
    };

    for r in 0..levels.saturating_sub(1) {
        loop {
            let high: Vec<bool> = state.iter().map(|&v| v > r).collect();
            let mover = (0..n).find(|&i| {
                let row = net.scaled(i);
                !high[i] && 2 * row.mass_in(&high) > row.den
            });
            let Some(i) = mover else { break };
            if apply(&mut state, i, &mut seq) <= r {
                return Err(Error::ReplayMismatch(format!(
                    "node {i} has a strict majority above cut {r} but stayed below"
                )));
            }
        }
        let low: Vec<bool> = state.iter().map(|&v| v <= r).collect();
        if !low.iter().any(|&b| b) {
            continue;
        }
        let trace = cohesive_expansion(net, &NodeSet::from_indicator(&low), None)?;
        for (i, _) in trace.additions {
            if apply(&mut state, i, &mut seq) > r {
                return Err(Error::ReplayMismatch(format!(
                    "node {i} was admitted below cut {r} but moved above it"
                )));
            }
        }
    }

    let replay = apply_sequence(net, x0, &seq)?;
    let terminal = replay.last().expect("non-empty").clone();
    if !crate::dynamics::is_equilibrium(net, &terminal)? {
        return Err(Error::ReplayMismatch(
            "constructed sequence does not end in an equilibrium".into(),
        ));
    }
    Ok(UpdateSequence {
        schedule: UpdateSchedule::sequence(seq),
        terminal,
    })
}

/// A ternary initial state with exactly one zero, and an update sequence that
/// takes it to the all-zero state at `target_time`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusCertificate {
    pub initial: OpinionState<i8>,
    pub sequence: Vec<usize>,
    pub target_time: usize,
}

impl ConsensusCertificate {
    pub fn new(initial: Vec<i8>, sequence: Vec<usize>) -> Self {
        Self {
            initial: OpinionState::new(initial),
            target_time: sequence.len(),
            sequence,
        }
    }

    pub fn schedule(&self) -> UpdateSchedule {
        UpdateSchedule::sequence(self.sequence.clone())
    }

    /// Replays the certificate and checks every claim it makes.
    pub fn verify<W: Scalar>(&self, net: &InfluenceNetwork<W>) -> Result<()> {
        let bad = |msg: String| Err(Error::ReplayMismatch(msg));
        check_len(net, &self.initial)?;
        if self.initial.iter().any(|v| !(-1..=1).contains(v)) {
            return bad("initial state is not ternary".into());
        }
        if self.initial.iter().filter(|&&v| v == 0).count() != 1 {
            return bad("initial state must have exactly one zero".into());
        }
        if self.sequence.len() != self.target_time {
            return bad(format!(
                "sequence has {} steps but target time is {}",
                self.sequence.len(),
                self.target_time
            ));
        }
        let states = apply_sequence(net, &self.initial, &self.sequence)?;
        if states.last().expect("non-empty").iter().any(|&v| v != 0) {
            return bad("replay does not end at the all-zero state".into());
        }
        Ok(())
    }
}

const UNVISITED: u8 = u8::MAX;
const TARGET: u8 = u8::MAX - 1;

struct SearchFound {
    initial: Vec<u8>,
    sequence: Vec<usize>,
}

struct SearchOutcome {
    found: Option<SearchFound>,
    explored: u64,
}

fn decode(mut idx: u64, radix: u64, out: &mut [u8]) {
    for d in out.iter_mut() {
        *d = (idx % radix) as u8;
        idx /= radix;
    }
}

/// Breadth-first search backwards from `targets`. A predecessor of `t`
/// through agent `i` differs from `t` only at `i`, and updating `i` there
/// yields `t_i`. Stops at the first layer containing a qualifying state and
/// returns the smallest such state with its forward path, which is therefore
/// a shortest one.
fn backward_search<M, Q>(n: usize, radix: u8, targets: &[u64], med: M, qualifies: Q) -> SearchOutcome
where
    M: Fn(&[u8], usize) -> u8 + Sync,
    Q: Fn(&[u8]) -> bool + Sync,
{
    assert!(n < TARGET as usize);
    let r = radix as u64;
    let total = r.pow(n as u32);
    let pow: Vec<u64> = (0..n).map(|i| r.pow(i as u32)).collect();
    let mut visited = vec![UNVISITED; total as usize];
    let mut frontier: Vec<u64> = targets.to_vec();
    for &t in targets {
        visited[t as usize] = TARGET;
    }
    let mut explored = frontier.len() as u64;
    let mut digits = vec![0u8; n];

    loop {
        let hit = frontier
            .iter()
            .copied()
            .filter(|&s| {
                decode(s, r, &mut digits);
                qualifies(&digits)
            })
            .min();
        if let Some(start) = hit {
            let mut sequence = Vec::new();
            let mut s = start;
            while visited[s as usize] != TARGET {
                let i = visited[s as usize] as usize;
                decode(s, r, &mut digits);
                let new = med(&digits, i);
                s = s + new as u64 * pow[i] - digits[i] as u64 * pow[i];
                sequence.push(i);
            }
            decode(start, r, &mut digits);
            return SearchOutcome {
                found: Some(SearchFound {
                    initial: digits,
                    sequence,
                }),
                explored,
            };
        }

        let seen = &visited;
        let candidates: Vec<(u64, u8)> = frontier
            .par_iter()
            .flat_map_iter(|&t| {
                let mut d = vec![0u8; n];
                decode(t, r, &mut d);
                let mut out = Vec::new();
                for i in 0..n {
                    let ti = d[i];
                    for v in (0..radix).filter(|&v| v != ti) {
                        let s = t - ti as u64 * pow[i] + v as u64 * pow[i];
                        if seen[s as usize] != UNVISITED {
                            continue;
                        }
                        d[i] = v;
                        if med(&d, i) == ti {
                            out.push((s, i as u8));
                        }
                    }
                    d[i] = ti;
                }
                out
            })
            .collect();

        frontier.clear();
        for (s, i) in candidates {
            if visited[s as usize] == UNVISITED {
                visited[s as usize] = i;
                frontier.push(s);
            }
        }
        explored += frontier.len() as u64;
        if frontier.is_empty() {
            return SearchOutcome { found: None, explored };
        }
    }
}

fn check_search_bound(n: usize, radix: usize, bound: usize, what: &'static str) -> Result<()> {
    let states = state_count(radix, n).unwrap_or(u128::MAX);
    if n > bound || states > MAX_SEARCH_STATES as u128 {
        return Err(Error::BoundExceeded {
            what,
            size: n as u128,
            bound: bound as u128,
        });
    }
    Ok(())
}

/// Median class of node `i` in a ternary state (0, 1, 2 standing for -1, 0, 1).
pub(crate) fn ternary_med(row: &ScaledRow, digits: &[u8], i: usize) -> u8 {
    let mut mass = [0u64; 3];
    for &(j, w) in &row.entries {
        mass[digits[j] as usize] += w;
    }
    let den = row.den;
    let lo = if 2 * mass[0] >= den {
        0
    } else if 2 * (mass[0] + mass[1]) >= den {
        1
    } else {
        2
    };
    let hi = if 2 * (mass[0] + mass[1]) <= den {
        2
    } else if 2 * mass[0] <= den {
        1
    } else {
        0
    };
    digits[i].clamp(lo, hi)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsensusDecision {
    pub reachable: bool,
    pub certificate: Option<ConsensusCertificate>,
    pub states_explored: u64,
    pub bound: usize,
}

/// Exact decision over ternary states: is there a state with exactly one zero
/// and an update sequence that reaches the all-zero state? When there is, the
/// certificate is a shortest one (ties go to the smallest base-3 encoding,
/// node 0 least significant, digits 0/1/2 for -1/0/1).
pub fn decide_consensus_reachable<W: Scalar>(
    net: &InfluenceNetwork<W>,
    bound: usize,
) -> Result<ConsensusDecision> {
    let n = net.n();
    check_search_bound(n, 3, bound, "ternary reachability search")?;
    let target: u64 = (0..n).map(|i| 3u64.pow(i as u32)).sum();
    let out = backward_search(
        n,
        3,
        &[target],
        |d, i| ternary_med(net.scaled(i), d, i),
        |d| d.iter().filter(|&&v| v == 1).count() == 1,
    );
    let certificate = out.found.map(|f| {
        let initial = f.initial.iter().map(|&d| d as i8 - 1).collect();
        ConsensusCertificate::new(initial, f.sequence)
    });
    Ok(ConsensusDecision {
        reachable: certificate.is_some(),
        certificate,
        states_explored: out.explored,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderTypeDecision {
    pub reachable: bool,
    /// Ranks of a witnessing initial state; any opinions in the same order work.
    pub initial: Option<Vec<u32>>,
    pub sequence: Vec<usize>,
    pub states_explored: u64,
}

/// Exact decision over initial states with `n` distinct opinions: only their
/// order matters, so states are rank vectors and the targets are the `n`
/// constant vectors.
pub fn decide_consensus_from_distinct<W: Scalar>(
    net: &InfluenceNetwork<W>,
    bound: usize,
) -> Result<OrderTypeDecision> {
    let n = net.n();
    check_search_bound(n, n, bound.min(16), "order-type reachability search")?;
    let unit: u64 = (0..n).map(|i| (n as u64).pow(i as u32)).sum();
    let targets: Vec<u64> = (0..n as u64).map(|c| c * unit).collect();
    let out = backward_search(
        n,
        n as u8,
        &targets,
        |d, i| {
            let row = net.scaled(i);
            let mut buf = [(0u8, 0u64); 16];
            let k = row.entries.len();
            for (slot, &(j, w)) in buf.iter_mut().zip(&row.entries) {
                *slot = (d[j], w);
            }
            clamped_median(d[i], &mut buf[..k], row.den)
        },
        |d| {
            let mask = d.iter().fold(0u32, |m, &v| m | 1 << v);
            mask.count_ones() as usize == d.len()
        },
    );
    Ok(match out.found {
        Some(f) => OrderTypeDecision {
            reachable: true,
            initial: Some(f.initial.iter().map(|&v| v as u32).collect()),
            sequence: f.sequence,
            states_explored: out.explored,
        },
        None => OrderTypeDecision {
            reachable: false,
            initial: None,
            sequence: Vec::new(),
            states_explored: out.explored,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReachabilityAgreement {
    pub ternary: bool,
    pub order_type: bool,
}

impl ReachabilityAgreement {
    pub fn agree(&self) -> bool {
        self.ternary == self.order_type
    }
}

/// Runs both exact searches independently.
pub fn check_reachability_equivalence<W: Scalar>(net: &InfluenceNetwork<W>, bound: usize) -> Result<ReachabilityAgreement> {
    let (ternary, order) = rayon::join(
        || decide_consensus_reachable(net, bound),
        || decide_consensus_from_distinct(net, bound),
    );
    Ok(ReachabilityAgreement {
        ternary: ternary?.reachable,
        order_type: order?.reachable,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassifyBounds {
    /// Largest `n` for exhaustive maximal-cohesive-set enumeration.
    pub cohesion: usize,
    /// Largest `n` for the exact ternary search.
    pub decision: usize,
    /// Monte Carlo replicas used beyond the decision bound.
    pub replicas: usize,
    pub seed: u64,
}

impl Default for ClassifyBounds {
    fn default() -> Self {
        Self {
            cohesion: crate::cohesion::DEFAULT_ENUMERATION_BOUND,
            decision: DEFAULT_DECISION_BOUND,
            replicas: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum ReachabilityMethod {
    ExactTernarySearch { states_explored: u64 },
    /// Runs from distinct random opinions; a consensus run proves
    /// reachability, finding none proves nothing.
    MonteCarloFalsification {
        replicas: usize,
        seed: u64,
        budget: usize,
        consensus_runs: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionScope {
    pub bounds: ClassifyBounds,
    pub cohesion_enumerated: bool,
    pub reachability: ReachabilityMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationReport {
    pub n: usize,
    /// The whole node set is the only maximal cohesive set; `None` when `n`
    /// exceeds the enumeration bound.
    pub consensus_certain: Option<bool>,
    pub dissensus_witness: Option<NodeSet>,
    /// Initial conditions that keep the witness apart, stated as a condition.
    pub separation_recipe: Option<String>,
    /// The decisive subgraph has no globally reachable node.
    pub dissensus_certain: bool,
    pub globally_reachable_node: Option<usize>,
    pub indecisive_edges: Vec<(usize, usize)>,
    /// `None` when beyond the decision bound and no consensus run was found.
    pub consensus_reachable: Option<bool>,
    pub certificate: Option<ConsensusCertificate>,
    pub scope: DecisionScope,
}

pub fn classify<W: Scalar>(net: &InfluenceNetwork<W>, bounds: &ClassifyBounds) -> Result<ClassificationReport> {
    let n = net.n();
    let cohesion_enumerated = n <= bounds.cohesion && n <= 63;
    let (consensus_certain, dissensus_witness) = if cohesion_enumerated {
        let sets = enumerate_maximal_cohesive_sets(net, bounds.cohesion)?;
        let witness = sets.into_iter().find(|s| !s.is_full());
        (Some(witness.is_none()), witness)
    } else {
        (None, None)
    };
    let separation_recipe = dissensus_witness.as_ref().map(|m| {
        format!(
            "max of x_j(0) over j in {:?} < min of x_k(0) over k outside it",
            m.members()
        )
    });
    let decisive = net.decisive_subgraph();
    let globally_reachable_node = decisive.globally_reachable_node();
    let indecisive_edges: Vec<(usize, usize)> = decisive.indecisive_edges().collect();

    let (consensus_reachable, certificate, reachability) = if n <= bounds.decision {
        let d = decide_consensus_reachable(net, bounds.decision)?;
        (
            Some(d.reachable),
            d.certificate,
            ReachabilityMethod::ExactTernarySearch {
                states_explored: d.states_explored,
            },
        )
    } else {
        let budget = default_budget(n);
        let config = EnsembleConfig {
            replicas: bounds.replicas.max(1),
            seed: bounds.seed,
            budget,
            schedule: ReplicaSchedule::UniformRandom,
        };
        let report = ensemble(net, &InitialSpec::Distinct, &config)?;
        (
            (report.consensus > 0).then_some(true),
            None,
            ReachabilityMethod::MonteCarloFalsification {
                replicas: config.replicas,
                seed: bounds.seed,
                budget,
                consensus_runs: report.consensus,
            },
        )
    };

    Ok(ClassificationReport {
        n,
        consensus_certain,
        dissensus_witness,
        separation_recipe,
        dissensus_certain: globally_reachable_node.is_none(),
        globally_reachable_node,
        indecisive_edges,
        consensus_reachable,
        certificate,
        scope: DecisionScope {
            bounds: bounds.clone(),
            cohesion_enumerated,
            reachability,
        },
    })
}
