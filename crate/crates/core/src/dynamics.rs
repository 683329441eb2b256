//! The weighted-median opinion process.
//!
//! At each tick one agent replaces its opinion by the weighted median of its
//! out-neighbours' opinions, ties broken towards its current opinion. Only the
//! order of opinions matters, so runs are executed on the ranks of the
//! distinct initial values and mapped back at the end.

use std::collections::BTreeMap;
use std::ops::Deref;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohesion::NodeSet;
use crate::error::{Error, Result};
use crate::median::clamped_median;
use crate::network::InfluenceNetwork;
use crate::scalar::Scalar;
use crate::Rational;

/// One opinion per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpinionState<O>(Vec<O>);

impl<O> OpinionState<O> {
    pub fn new(values: Vec<O>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<O> {
        self.0
    }
}

impl<O: Ord + Clone> OpinionState<O> {
    pub fn is_consensus(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    /// Sorted distinct values.
    pub fn distinct_values(&self) -> Vec<O> {
        let mut v = self.0.clone();
        v.sort();
        v.dedup();
        v
    }

    /// Each entry replaced by its rank among the distinct values.
    pub fn ranks(&self) -> Vec<u32> {
        let distinct = self.distinct_values();
        self.0
            .iter()
            .map(|v| distinct.binary_search(v).expect("value present") as u32)
            .collect()
    }
}

impl<O> Deref for OpinionState<O> {
    type Target = [O];

    fn deref(&self) -> &[O] {
        &self.0
    }
}

impl<O> From<Vec<O>> for OpinionState<O> {
    fn from(v: Vec<O>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScheduleKind {
    /// Update these nodes in order.
    Sequence { nodes: Vec<usize> },
    /// Pick a node uniformly at random, with replacement, at every tick.
    UniformRandom { seed: u64, stream: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpdateSchedule {
    pub kind: ScheduleKind,
    pub budget: usize,
}

impl UpdateSchedule {
    pub fn sequence(nodes: Vec<usize>) -> Self {
        let budget = nodes.len();
        Self {
            kind: ScheduleKind::Sequence { nodes },
            budget,
        }
    }

    pub fn uniform(seed: u64, budget: usize) -> Self {
        Self {
            kind: ScheduleKind::UniformRandom { seed, stream: 0 },
            budget,
        }
    }
}

/// `ceil(200 n ln(n + 1))`; finite-time absorption comes without a rate, so
/// this is an engineering default and exhaustion is always reported.
pub fn default_budget(n: usize) -> usize {
    let n = n as f64;
    ((200.0 * n * (n + 1.0).ln()).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step<O> {
    pub time: usize,
    pub node: usize,
    pub old: O,
    pub new: O,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory<O> {
    pub initial: OpinionState<O>,
    pub steps: Vec<Step<O>>,
    pub terminal: OpinionState<O>,
    pub converged: bool,
    pub steps_used: usize,
}

impl<O: Ord + Clone> Trajectory<O> {
    /// Applies the recorded steps to the initial state.
    pub fn replay_recorded(&self) -> OpinionState<O> {
        let mut x = self.initial.0.clone();
        for s in &self.steps {
            x[s.node] = s.new.clone();
        }
        OpinionState(x)
    }

    /// Recomputes every recorded step from the network and checks it.
    pub fn verify<W: Scalar>(&self, net: &InfluenceNetwork<W>) -> bool {
        let mut x = self.initial.0.clone();
        for s in &self.steps {
            if x[s.node] != s.old || med_at(net, &x, s.node) != s.new {
                return false;
            }
            x[s.node] = s.new.clone();
        }
        x == self.terminal.0 && (!self.converged || is_equilibrium(net, &x).unwrap_or(false))
    }
}

fn check_state<O, W: Scalar>(net: &InfluenceNetwork<W>, x: &[O]) -> Result<()> {
    if x.len() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: x.len(),
        });
    }
    Ok(())
}

/// `Med_i(x; W)` with the closest-median tie-break.
pub fn med_at<O: Ord + Clone, W: Scalar>(net: &InfluenceNetwork<W>, x: &[O], i: usize) -> O {
    let row = net.scaled(i);
    let mut pairs: Vec<(&O, u64)> = row.entries.iter().map(|&(j, w)| (&x[j], w)).collect();
    clamped_median(&x[i], &mut pairs, row.den).clone()
}

/// State after node `i` updates.
pub fn step<O: Ord + Clone, W: Scalar>(
    net: &InfluenceNetwork<W>,
    x: &[O],
    i: usize,
) -> Result<OpinionState<O>> {
    check_state(net, x)?;
    net.check_node(i)?;
    let mut next = x.to_vec();
    next[i] = med_at(net, x, i);
    Ok(OpinionState(next))
}

/// Whether no single update changes the state.
pub fn is_equilibrium<O: Ord + Clone, W: Scalar>(net: &InfluenceNetwork<W>, x: &[O]) -> Result<bool> {
    check_state(net, x)?;
    Ok((0..net.n()).all(|i| med_at(net, x, i) == x[i]))
}

/// States `x(0), x(1), .., x(T)` along a fixed update sequence, with no early stop.
pub fn apply_sequence<O: Ord + Clone, W: Scalar>(
    net: &InfluenceNetwork<W>,
    x0: &[O],
    nodes: &[usize],
) -> Result<Vec<OpinionState<O>>> {
    check_state(net, x0)?;
    let mut states = vec![OpinionState(x0.to_vec())];
    for &i in nodes {
        let next = step(net, states.last().expect("non-empty"), i)?;
        states.push(next);
    }
    Ok(states)
}

/// Incremental engine over rank-encoded opinions. Tracks which nodes would
/// move if picked; after an update only the updated node and its in-neighbours
/// are re-examined.
pub(crate) struct Engine<'a, W> {
    net: &'a InfluenceNetwork<W>,
    state: Vec<u32>,
    unstable: Vec<bool>,
    unstable_count: usize,
    scratch: Vec<(u32, u64)>,
}

impl<'a, W: Scalar> Engine<'a, W> {
    pub(crate) fn new(net: &'a InfluenceNetwork<W>, state: Vec<u32>) -> Self {
        let mut engine = Self {
            net,
            state,
            unstable: vec![false; net.n()],
            unstable_count: 0,
            scratch: Vec::new(),
        };
        for i in 0..net.n() {
            engine.refresh(i);
        }
        engine
    }

    fn med(&mut self, i: usize) -> u32 {
        let row = self.net.scaled(i);
        self.scratch.clear();
        self.scratch
            .extend(row.entries.iter().map(|&(j, w)| (self.state[j], w)));
        clamped_median(self.state[i], &mut self.scratch, row.den)
    }

    fn refresh(&mut self, i: usize) {
        let moving = self.med(i) != self.state[i];
        if moving != self.unstable[i] {
            self.unstable[i] = moving;
            if moving {
                self.unstable_count += 1;
            } else {
                self.unstable_count -= 1;
            }
        }
    }

    /// Updates node `i`; returns `(old, new)`.
    pub(crate) fn update(&mut self, i: usize) -> (u32, u32) {
        let old = self.state[i];
        if !self.unstable[i] {
            return (old, old);
        }
        let new = self.med(i);
        self.state[i] = new;
        self.refresh(i);
        for k in 0..self.net.in_neighbors(i).len() {
            let p = self.net.in_neighbors(i)[k];
            self.refresh(p);
        }
        (old, new)
    }

    pub(crate) fn at_equilibrium(&self) -> bool {
        self.unstable_count == 0
    }

    pub(crate) fn state(&self) -> &[u32] {
        &self.state
    }
}

struct RankRun {
    steps: Vec<(usize, usize, u32, u32)>,
    terminal: Vec<u32>,
    converged: bool,
    steps_used: usize,
}

fn run_ranks<W: Scalar>(
    net: &InfluenceNetwork<W>,
    ranks: Vec<u32>,
    schedule: &UpdateSchedule,
    record: bool,
) -> Result<RankRun> {
    let n = net.n();
    let mut engine = Engine::new(net, ranks);
    let mut steps = Vec::new();
    let mut used = 0;
    let mut tick = |engine: &mut Engine<'_, W>, t: usize, i: usize| {
        let (old, new) = engine.update(i);
        if record {
            steps.push((t, i, old, new));
        }
    };
    match &schedule.kind {
        ScheduleKind::Sequence { nodes } => {
            if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidNode { node: bad, n });
            }
            for &i in nodes.iter().take(schedule.budget) {
                if engine.at_equilibrium() {
                    break;
                }
                used += 1;
                tick(&mut engine, used, i);
            }
        }
        ScheduleKind::UniformRandom { seed, stream } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(*stream);
            while used < schedule.budget && !engine.at_equilibrium() {
                let i = rng.random_range(0..n);
                used += 1;
                tick(&mut engine, used, i);
            }
        }
    }
    Ok(RankRun {
        steps,
        converged: engine.at_equilibrium(),
        terminal: engine.state().to_vec(),
        steps_used: used,
    })
}

/// Runs the process from `x0` along `schedule`.
///
/// Stops as soon as the state is an equilibrium (checked at `t = 0` and after
/// every update). Running out of budget is not an error: the trajectory comes
/// back with `converged = false`.
pub fn run<O: Ord + Clone, W: Scalar>(
    net: &InfluenceNetwork<W>,
    x0: &[O],
    schedule: &UpdateSchedule,
) -> Result<Trajectory<O>> {
    check_state(net, x0)?;
    let initial = OpinionState(x0.to_vec());
    let values = initial.distinct_values();
    let out = run_ranks(net, initial.ranks(), schedule, true)?;
    let value = |r: u32| values[r as usize].clone();
    Ok(Trajectory {
        steps: out
            .steps
            .into_iter()
            .map(|(time, node, old, new)| Step {
                time,
                node,
                old: value(old),
                new: value(new),
            })
            .collect(),
        terminal: OpinionState(out.terminal.into_iter().map(value).collect()),
        converged: out.converged,
        steps_used: out.steps_used,
        initial,
    })
}

/// Source of initial states for ensembles.
pub trait InitialSampler: Sync {
    type Opinion: Ord + Clone + Send;

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Self::Opinion>;
}

/// Always the same state.
pub struct FixedState<O>(pub Vec<O>);

impl<O: Ord + Clone + Send + Sync> InitialSampler for FixedState<O> {
    type Opinion = O;

    fn sample(&self, _n: usize, _rng: &mut ChaCha8Rng) -> Vec<O> {
        self.0.clone()
    }
}

/// Built-in initial-state distributions, all with exact rational opinions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialSpec {
    /// The same state for every replica.
    Explicit(Vec<Rational>),
    /// iid uniform over the labels `0, 1, .., k-1`.
    IidLabels { k: usize },
    /// iid uniform over the grid `-1 + 2j/resolution`, `j = 0..=resolution`.
    IidGrid { resolution: usize },
    /// A uniformly random permutation of `0, .., n-1`.
    Distinct,
    /// Distinct opinions with every member of `set` strictly below every
    /// non-member.
    Separated { set: NodeSet },
}

impl InitialSpec {
    pub fn describe(&self) -> String {
        match self {
            InitialSpec::Explicit(v) => format!("explicit({} values)", v.len()),
            InitialSpec::IidLabels { k } => format!("iid-labels(k={k})"),
            InitialSpec::IidGrid { resolution } => format!("iid-grid(resolution={resolution})"),
            InitialSpec::Distinct => "distinct".into(),
            InitialSpec::Separated { set } => format!("separated(set={:?})", set.members()),
        }
    }
}

impl InitialSampler for InitialSpec {
    type Opinion = Rational;

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Rational> {
        let int = |v: usize| Rational::from_integer(BigInt::from(v));
        match self {
            InitialSpec::Explicit(v) => v.clone(),
            InitialSpec::IidLabels { k } => (0..n).map(|_| int(rng.random_range(0..*k))).collect(),
            InitialSpec::IidGrid { resolution } => {
                let g = (*resolution).max(1);
                (0..n)
                    .map(|_| {
                        let j = rng.random_range(0..=g) as i64;
                        Rational::new(BigInt::from(2 * j - g as i64), BigInt::from(g))
                    })
                    .collect()
            }
            InitialSpec::Distinct => {
                let mut v: Vec<usize> = (0..n).collect();
                v.shuffle(rng);
                v.into_iter().map(int).collect()
            }
            InitialSpec::Separated { set } => {
                let m = set.len();
                let mut low: Vec<usize> = (0..m).collect();
                let mut high: Vec<usize> = (m..n).collect();
                low.shuffle(rng);
                high.shuffle(rng);
                let (mut low, mut high) = (low.into_iter(), high.into_iter());
                (0..n)
                    .map(|i| {
                        let v = if set.contains(i) { low.next() } else { high.next() };
                        int(v.expect("set fits the network"))
                    })
                    .collect()
            }
        }
    }
}

/// How replicas pick updating agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicaSchedule {
    UniformRandom,
    Sequence(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnsembleConfig {
    pub replicas: usize,
    pub seed: u64,
    pub budget: usize,
    pub schedule: ReplicaSchedule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub converged: bool,
    pub consensus: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusEntry {
    /// Terminal state as ranks among its own distinct values.
    pub pattern: Vec<u32>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub replicas: usize,
    pub budget: usize,
    pub converged: usize,
    pub budget_exhausted: usize,
    pub consensus: usize,
    pub converged_fraction: f64,
    pub consensus_fraction: f64,
    pub mean_steps: f64,
    pub min_steps: usize,
    pub max_steps: usize,
    pub census: Vec<CensusEntry>,
    pub outcomes: Vec<ReplicaOutcome>,
}

/// Generator for replica `r`: seeded once from `seed`, separated by stream.
/// Stream `2r` feeds the initial state and `2r + 1` the update schedule.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent replicas in parallel; the report does not depend on the
/// number of worker threads.
pub fn ensemble<W: Scalar, S: InitialSampler>(
    net: &InfluenceNetwork<W>,
    sampler: &S,
    config: &EnsembleConfig,
) -> Result<EnsembleReport> {
    if config.replicas == 0 {
        return Err(Error::Parse("ensemble needs at least one replica".into()));
    }
    let n = net.n();
    let results: Vec<(ReplicaOutcome, Vec<u32>)> = (0..config.replicas)
        .into_par_iter()
        .map(|r| -> Result<(ReplicaOutcome, Vec<u32>)> {
            let mut init_rng = replica_rng(config.seed, 2 * r as u64);
            let x0 = OpinionState(sampler.sample(n, &mut init_rng));
            check_state(net, &x0)?;
            let schedule = match &config.schedule {
                ReplicaSchedule::UniformRandom => UpdateSchedule {
                    kind: ScheduleKind::UniformRandom {
                        seed: config.seed,
                        stream: 2 * r as u64 + 1,
                    },
                    budget: config.budget,
                },
                ReplicaSchedule::Sequence(nodes) => UpdateSchedule {
                    kind: ScheduleKind::Sequence { nodes: nodes.clone() },
                    budget: config.budget.min(nodes.len()),
                },
            };
            let out = run_ranks(net, x0.ranks(), &schedule, false)?;
            let pattern = OpinionState(out.terminal).ranks();
            let consensus = out.converged && pattern.iter().all(|&p| p == 0);
            Ok((
                ReplicaOutcome {
                    replica: r,
                    converged: out.converged,
                    consensus,
                    steps: out.steps_used,
                },
                pattern,
            ))
        })
        .collect::<Result<_>>()?;

    let mut census: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut outcomes = Vec::with_capacity(results.len());
    for (outcome, pattern) in results {
        *census.entry(pattern).or_default() += 1;
        outcomes.push(outcome);
    }
    let mut census: Vec<CensusEntry> = census
        .into_iter()
        .map(|(pattern, count)| CensusEntry { pattern, count })
        .collect();
    census.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.pattern.cmp(&b.pattern)));

    let replicas = config.replicas;
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let consensus = outcomes.iter().filter(|o| o.consensus).count();
    let total_steps: usize = outcomes.iter().map(|o| o.steps).sum();
    Ok(EnsembleReport {
        replicas,
        budget: config.budget,
        converged,
        budget_exhausted: replicas - converged,
        consensus,
        converged_fraction: converged as f64 / replicas as f64,
        consensus_fraction: consensus as f64 / replicas as f64,
        mean_steps: total_steps as f64 / replicas as f64,
        min_steps: outcomes.iter().map(|o| o.steps).min().unwrap_or(0),
        max_steps: outcomes.iter().map(|o| o.steps).max().unwrap_or(0),
        census,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    #[test]
    fn consensus_is_fixed() {
        let net = fixtures::lattice::<Q>(3, 3);
        let x = vec![4; 9];
        for i in 0..9 {
            assert_eq!(step(&net, &x, i).unwrap().into_inner(), x);
        }
        assert!(is_equilibrium(&net, &x).unwrap());
        let traj = run(&net, &x, &UpdateSchedule::uniform(1, 100)).unwrap();
        assert!(traj.converged);
        assert_eq!(traj.steps_used, 0);
        assert!(traj.steps.is_empty());
    }

    #[test]
    fn majority_of_other_opinion_flips_a_node() {
        // node 0 puts 3/5 on node 1, which holds the other opinion
        let net = InfluenceNetwork::from_rows(
            vec![
                vec![(0, Q::new(2, 5)), (1, Q::new(3, 5))],
                vec![(1, Q::from_integer(1))],
            ],
            false,
        )
        .unwrap();
        assert_eq!(step(&net, &[0, 1], 0).unwrap().into_inner(), vec![1, 1]);
        assert!(!is_equilibrium(&net, &[0, 1]).unwrap());
    }

    #[test]
    fn two_blocks_with_distinct_opinions_are_an_equilibrium() {
        let net = fixtures::bridged_cliques::<Q>(3, Q::new(2, 5));
        assert!(is_equilibrium(&net, &[0, 0, 0, 1, 1, 1]).unwrap());
        assert!(is_equilibrium(&net, &[0, 0, 1, 1, 1, 1]).unwrap());
        assert!(!is_equilibrium(&net, &[0, 1, 0, 1, 1, 1]).unwrap());
    }

    #[test]
    fn step_rejects_invalid_node() {
        let net = fixtures::ring::<Q>(3);
        assert!(matches!(step(&net, &[1, 2, 3], 3), Err(Error::InvalidNode { .. })));
        assert!(matches!(step(&net, &[1, 2], 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sequence_schedule_and_exhaustion() {
        let net = fixtures::ring::<Q>(3);
        // a ring copies its successor: after updating 1 then 0 everybody holds 3
        let traj = run(&net, &[1, 2, 3], &UpdateSchedule::sequence(vec![1, 0])).unwrap();
        assert!(traj.converged);
        assert_eq!(traj.terminal.into_inner(), vec![3, 3, 3]);
        let short = run(&net, &[1, 2, 3], &UpdateSchedule::sequence(vec![1])).unwrap();
        assert!(!short.converged);
        assert_eq!(short.steps_used, 1);
    }

    #[test]
    fn complete_graph_reaches_consensus() {
        let net = fixtures::complete_without_self_loops::<Q>(8);
        let x0: Vec<i32> = vec![0, 1, 2, 3, 0, 1, 2, 3];
        let traj = run(&net, &x0, &UpdateSchedule::uniform(11, 100_000)).unwrap();
        assert!(traj.converged);
        assert!(traj.terminal.is_consensus());
        assert!(traj.verify(&net));
        assert_eq!(traj.replay_recorded(), traj.terminal);
    }

    #[test]
    fn engine_matches_direct_check() {
        let net = fixtures::lattice::<Q>(4, 4);
        let x: Vec<u32> = (0..16).map(|i| (i * 7 % 5) as u32).collect();
        let engine = Engine::new(&net, x.clone());
        assert_eq!(engine.at_equilibrium(), is_equilibrium(&net, &x).unwrap());
    }

    #[test]
    fn default_budget_grows_like_n_log_n() {
        assert_eq!(default_budget(1), 139);
        assert!(default_budget(900) > 1_000_000);
    }

    #[test]
    fn single_replica_sequence_ensemble_matches_run() {
        let net = fixtures::ring::<Q>(3);
        let config = EnsembleConfig {
            replicas: 1,
            seed: 0,
            budget: 10,
            schedule: ReplicaSchedule::Sequence(vec![1, 0]),
        };
        let report = ensemble(&net, &FixedState(vec![1, 2, 3]), &config).unwrap();
        let traj = run(&net, &[1, 2, 3], &UpdateSchedule::sequence(vec![1, 0])).unwrap();
        assert_eq!(report.outcomes[0].steps, traj.steps_used);
        assert_eq!(report.outcomes[0].converged, traj.converged);
        assert_eq!(report.consensus, 1);
    }
}
