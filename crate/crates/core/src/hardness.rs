//! Monotone NAE3SAT and its encoding as a sink-variable-clause network.
//!
//! Node layout of an SVC network with `n` variables and `m` clauses:
//! the sink is node 0, variable `i` (1-based) owns nodes `2i-1` (`v_i`) and
//! `2i` (its shadow), and clause `j` is node `2n+j`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::equilibria::{decide_consensus_reachable, ConsensusCertificate};
use crate::error::{Error, Result};
use crate::network::InfluenceNetwork;
use crate::scalar::Scalar;

/// Default variable bound for [`brute_force_nae3sat`].
pub const DEFAULT_SAT_BOUND: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Nae3SatInstance {
    num_vars: usize,
    clauses: Vec<[usize; 3]>,
}

impl Nae3SatInstance {
    /// Checks indices (1-based) and that every variable occurs somewhere.
    /// Clauses repeating one variable three times are accepted here; the text
    /// parser rejects them.
    pub fn new(num_vars: usize, clauses: Vec<[usize; 3]>) -> Result<Self> {
        if num_vars == 0 || clauses.is_empty() {
            return Err(Error::InvalidInstance("need at least one variable and one clause".into()));
        }
        let mut used = vec![false; num_vars];
        for (j, c) in clauses.iter().enumerate() {
            for &k in c {
                if k == 0 || k > num_vars {
                    return Err(Error::InvalidInstance(format!(
                        "clause {} uses variable {k}, expected 1..={num_vars}",
                        j + 1
                    )));
                }
                used[k - 1] = true;
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(Error::InvalidInstance(format!("variable {} appears in no clause", k + 1)));
        }
        Ok(Self { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[[usize; 3]] {
        &self.clauses
    }

    pub fn has_triple(&self) -> bool {
        self.clauses.iter().any(|c| c[0] == c[1] && c[1] == c[2])
    }

    /// Whether `assignment` (entries `-1`/`1`, variable 1 first) leaves no
    /// clause with three equal values.
    pub fn is_satisfied_by(&self, assignment: &[i8]) -> bool {
        assignment.len() == self.num_vars
            && assignment.iter().all(|&v| v == -1 || v == 1)
            && self.clauses.iter().all(|c| {
                let vals = c.map(|k| assignment[k - 1]);
                !(vals[0] == vals[1] && vals[1] == vals[2])
            })
    }
}

impl fmt::Display for Nae3SatInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p nae3sat {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            writeln!(f, "{} {} {}", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}

impl FromStr for Nae3SatInstance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_instance(s)
    }
}

/// Parses `p nae3sat n m` followed by `m` lines of three positive indices.
/// Blank lines and lines starting with `c` are ignored.
pub fn parse_instance(source: &str) -> Result<Nae3SatInstance> {
    let bad = |line: usize, msg: &str| Error::Parse(format!("line {line}: {msg}"));
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('c'));
    let (hline, header) = lines.next().ok_or_else(|| Error::Parse("empty instance".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, m) = match fields.as_slice() {
        ["p", "nae3sat", n, m] => (
            n.parse::<usize>().map_err(|_| bad(hline, "bad variable count"))?,
            m.parse::<usize>().map_err(|_| bad(hline, "bad clause count"))?,
        ),
        _ => return Err(bad(hline, "expected header `p nae3sat <vars> <clauses>`")),
    };
    let mut clauses = Vec::with_capacity(m);
    for (k, line) in lines {
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(k, "clause entries must be positive integers"))?;
        let [a, b, c] = idx[..] else {
            return Err(bad(k, "a clause has exactly three indices"));
        };
        if a == b && b == c {
            return Err(bad(k, "a clause may repeat a variable at most twice"));
        }
        clauses.push([a, b, c]);
    }
    if clauses.len() != m {
        return Err(Error::Parse(format!("header announces {m} clauses, found {}", clauses.len())));
    }
    Nae3SatInstance::new(n, clauses)
}

/// First satisfying assignment in lexicographic order (`-1 < 1`, variable 1
/// most significant), or `None`.
pub fn brute_force_nae3sat(inst: &Nae3SatInstance, bound: usize) -> Result<Option<Vec<i8>>> {
    let n = inst.num_vars;
    if n > bound || n >= 64 {
        return Err(Error::BoundExceeded {
            what: "NAE3SAT variables",
            size: n as u128,
            bound: bound as u128,
        });
    }
    let mut assignment = vec![-1i8; n];
    for idx in 0u64..1 << n {
        for (k, v) in assignment.iter_mut().enumerate() {
            *v = if idx >> (n - 1 - k) & 1 == 1 { 1 } else { -1 };
        }
        if inst.is_satisfied_by(&assignment) {
            return Ok(Some(assignment));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "role", content = "index")]
pub enum SvcRole {
    Sink,
    Variable(usize),
    Shadow(usize),
    Clause(usize),
}

impl fmt::Display for SvcRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvcRole::Sink => write!(f, "s"),
            SvcRole::Variable(i) => write!(f, "v{i}"),
            SvcRole::Shadow(i) => write!(f, "~v{i}"),
            SvcRole::Clause(j) => write!(f, "c{j}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvcGraph<W> {
    pub network: InfluenceNetwork<W>,
    pub roles: Vec<SvcRole>,
    pub instance: Nae3SatInstance,
}

impl<W> SvcGraph<W> {
    pub const SINK: usize = 0;

    pub fn variable(&self, i: usize) -> usize {
        2 * i - 1
    }

    pub fn shadow(&self, i: usize) -> usize {
        2 * i
    }

    pub fn clause(&self, j: usize) -> usize {
        2 * self.instance.num_vars + j
    }
}

/// Builds the SVC network. A variable listed twice in a clause gets one edge
/// of weight 2/5; listed three times, one edge of weight 3/5.
pub fn build_svc<W: Scalar>(inst: &Nae3SatInstance) -> SvcGraph<W> {
    let n = inst.num_vars;
    let m = inst.clauses.len();
    let frac = |p: i64, q: i64| W::from_fraction(p, q);
    let clause_node = |j: usize| 2 * n + j;
    let mut rows: Vec<Vec<(usize, W)>> = Vec::with_capacity(2 * n + m + 1);
    let mut roles = Vec::with_capacity(2 * n + m + 1);

    rows.push(vec![(0, W::one())]);
    roles.push(SvcRole::Sink);
    for i in 1..=n {
        let (v, shadow) = (2 * i - 1, 2 * i);
        rows.push(vec![(v, frac(1, 3)), (shadow, frac(1, 3)), (clause_node(m), frac(1, 3))]);
        roles.push(SvcRole::Variable(i));
        rows.push(vec![(v, W::one())]);
        roles.push(SvcRole::Shadow(i));
    }
    for (j, clause) in inst.clauses.iter().enumerate() {
        let prev = if j == 0 { 0 } else { clause_node(j) };
        let mut row = vec![(prev, frac(2, 5))];
        let mut vars = clause.to_vec();
        vars.sort_unstable();
        for chunk in vars.chunk_by(|a, b| a == b) {
            row.push((2 * chunk[0] - 1, frac(chunk.len() as i64, 5)));
        }
        rows.push(row);
        roles.push(SvcRole::Clause(j + 1));
    }
    let labels = roles.iter().map(|r| r.to_string()).collect();
    let network = InfluenceNetwork::from_rows(rows, false)
        .and_then(|net| net.with_labels(labels))
        .expect("SVC rows are stochastic");
    SvcGraph {
        network,
        roles,
        instance: inst.clone(),
    }
}

/// The certificate from the hardness argument: sink at 0, `v_i` at the
/// assigned value, its shadow at the opposite value, every clause at +1;
/// clauses are updated in order, then each variable node and its shadow.
/// The certificate is replayed before it is returned.
pub fn certificate_from_assignment<W: Scalar>(
    svc: &SvcGraph<W>,
    assignment: &[i8],
) -> Result<ConsensusCertificate> {
    if !svc.instance.is_satisfied_by(assignment) {
        return Err(Error::Unsatisfied);
    }
    let n = svc.instance.num_vars;
    let m = svc.instance.clauses.len();
    let mut initial = vec![0i8; 2 * n + m + 1];
    for (k, &a) in assignment.iter().enumerate() {
        initial[svc.variable(k + 1)] = a;
        initial[svc.shadow(k + 1)] = -a;
    }
    for j in 1..=m {
        initial[svc.clause(j)] = 1;
    }
    let mut sequence: Vec<usize> = (1..=m).map(|j| svc.clause(j)).collect();
    for i in 1..=n {
        sequence.push(svc.variable(i));
        sequence.push(svc.shadow(i));
    }
    let cert = ConsensusCertificate::new(initial, sequence);
    cert.verify(&svc.network)?;
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundtripBounds {
    pub sat: usize,
    pub decision: usize,
}

impl Default for RoundtripBounds {
    fn default() -> Self {
        Self {
            sat: DEFAULT_SAT_BOUND,
            // n <= 4 variables and m <= 4 clauses give 13 nodes
            decision: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundtripReport {
    pub assignment: Option<Vec<i8>>,
    pub consensus_reachable: bool,
    pub search_certificate: Option<ConsensusCertificate>,
}

impl RoundtripReport {
    pub fn satisfiable(&self) -> bool {
        self.assignment.is_some()
    }

    pub fn agree(&self) -> bool {
        self.satisfiable() == self.consensus_reachable
    }
}

/// Solves the instance by brute force and, independently, decides consensus
/// reachability on its SVC network.
pub fn reduction_roundtrip<W: Scalar>(inst: &Nae3SatInstance, bounds: RoundtripBounds) -> Result<RoundtripReport> {
    let svc = build_svc::<W>(inst);
    let (sat, decision) = rayon::join(
        || brute_force_nae3sat(inst, bounds.sat),
        || decide_consensus_reachable(&svc.network, bounds.decision),
    );
    let decision = decision?;
    Ok(RoundtripReport {
        assignment: sat?,
        consensus_reachable: decision.reachable,
        search_certificate: decision.certificate,
    })
}
