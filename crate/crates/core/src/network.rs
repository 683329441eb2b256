//! Influence networks, decisive links and global reachability.

use std::collections::BTreeSet;

use num_integer::Integer;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rows whose common denominator exceeds this are rejected; it keeps every
/// doubled mass inside `u64`.
pub const MAX_ROW_DENOMINATOR: u64 = 1 << 62;

/// Out-degree up to which decisiveness is decided by subset enumeration.
pub const ENUMERATION_DEGREE_LIMIT: usize = 20;

/// A row of `W` rescaled to integers over the row's common denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledRow {
    pub den: u64,
    pub entries: Vec<(usize, u64)>,
}

impl ScaledRow {
    /// Mass the row places on members of `set`.
    pub fn mass_in(&self, set: &[bool]) -> u64 {
        self.entries.iter().filter(|(j, _)| set[*j]).map(|(_, w)| w).sum()
    }

    pub fn mass_in_mask(&self, mask: u64) -> u64 {
        self.entries
            .iter()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Weighted directed graph with an exact row-stochastic influence matrix.
///
/// Rows are stored sparsely; `N_i` is the set of columns with non-zero weight.
/// Self-loops are allowed. Immutable after construction.
#[derive(Debug, Clone)]
pub struct InfluenceNetwork<W> {
    n: usize,
    rows: Vec<Vec<(usize, W)>>,
    scaled: Vec<ScaledRow>,
    in_neighbors: Vec<Vec<usize>>,
    labels: Option<Vec<String>>,
}

impl<W: Scalar> InfluenceNetwork<W> {
    /// Builds a network from sparse rows of `(column, weight)` pairs.
    ///
    /// Zero weights are dropped. With `normalize` each row is divided by its
    /// sum; otherwise rows must already sum to exactly one.
    pub fn from_rows(rows: Vec<Vec<(usize, W)>>, normalize: bool) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyProfile);
        }
        let mut clean = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            let mut row: Vec<(usize, W)> = row;
            for (j, w) in &row {
                if *j >= n {
                    return Err(Error::InvalidNode { node: *j, n });
                }
                if *w < W::zero() {
                    return Err(Error::NegativeWeight { row: i, col: *j });
                }
            }
            row.retain(|(_, w)| !w.is_zero());
            row.sort_by_key(|(j, _)| *j);
            if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::Parse(format!("duplicate entry ({i}, {})", pair[0].0)));
            }
            let sum = row.iter().map(|(_, w)| w.clone()).fold(W::zero(), |a, b| a + b);
            if normalize {
                if sum.is_zero() {
                    return Err(Error::RowSum { row: i, sum: sum.to_string() });
                }
                for entry in &mut row {
                    entry.1 = entry.1.clone() / sum.clone();
                }
            } else if sum != W::one() {
                return Err(Error::RowSum { row: i, sum: sum.to_string() });
            }
            clean.push(row);
        }
        let scaled = clean
            .iter()
            .enumerate()
            .map(|(i, row)| scale_row(i, row))
            .collect::<Result<Vec<_>>>()?;
        let mut in_neighbors = vec![Vec::new(); n];
        for (i, row) in clean.iter().enumerate() {
            for (j, _) in row {
                in_neighbors[*j].push(i);
            }
        }
        Ok(Self {
            n,
            rows: clean,
            scaled,
            in_neighbors,
            labels: None,
        })
    }

    pub fn from_dense(matrix: Vec<Vec<W>>, normalize: bool) -> Result<Self> {
        let n = matrix.len();
        let mut rows = Vec::with_capacity(n);
        for row in matrix {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            rows.push(row.into_iter().enumerate().collect());
        }
        Self::from_rows(rows, normalize)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, W)] {
        &self.rows[i]
    }

    pub fn scaled(&self, i: usize) -> &ScaledRow {
        &self.scaled[i]
    }

    pub fn in_neighbors(&self, j: usize) -> &[usize] {
        &self.in_neighbors[j]
    }

    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().map(|(j, _)| *j)
    }

    pub fn weight(&self, i: usize, j: usize) -> W {
        match self.rows[i].binary_search_by_key(&j, |(k, _)| *k) {
            Ok(pos) => self.rows[i][pos].1.clone(),
            Err(_) => W::zero(),
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.rows[i].binary_search_by_key(&j, |(k, _)| *k).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// All edges `(i, j, w_ij)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &W)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |(j, w)| (i, *j, w)))
    }

    pub fn check_node(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::InvalidNode { node: i, n: self.n })
        }
    }

    /// The same network with node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: perm.len() });
        }
        let mut rows = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            rows[perm[i]] = row.iter().map(|(j, w)| (perm[*j], w.clone())).collect();
        }
        Self::from_rows(rows, false)
    }

    /// Whether `(i, j)` is a decisive out-link: some `θ ⊆ N_i` containing `j`
    /// has mass strictly above one half, and strictly below one half once `j`
    /// is removed.
    pub fn is_decisive(&self, i: usize, j: usize) -> Result<bool> {
        self.check_node(i)?;
        if !self.has_edge(i, j) {
            return Err(Error::NotAnEdge { from: i, to: j });
        }
        let row = &self.scaled[i];
        Ok(if row.entries.len() <= ENUMERATION_DEGREE_LIMIT {
            decisive_by_enumeration(row, j)
        } else {
            decisive_by_dp(row, j)
        })
    }

    /// Classifies every edge as decisive or indecisive.
    pub fn decisive_subgraph(&self) -> DecisiveSubgraph<'_, W> {
        let decisive: Vec<Vec<usize>> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                self.out_neighbors(i)
                    .filter(|&j| self.is_decisive(i, j).expect("edge exists"))
                    .collect()
            })
            .collect();
        DecisiveSubgraph { parent: self, decisive }
    }
}

fn scale_row<W: Scalar>(i: usize, row: &[(usize, W)]) -> Result<ScaledRow> {
    let mut fracs = Vec::with_capacity(row.len());
    let mut den: u128 = 1;
    for (j, w) in row {
        let (p, q) = w.to_fraction().ok_or(Error::DenominatorTooLarge { row: i })?;
        den = den.lcm(&(q as u128));
        if den > MAX_ROW_DENOMINATOR as u128 {
            return Err(Error::DenominatorTooLarge { row: i });
        }
        fracs.push((*j, p as u128, q as u128));
    }
    let entries = fracs
        .into_iter()
        .map(|(j, p, q)| (j, (p * (den / q)) as u64))
        .collect();
    Ok(ScaledRow { den: den as u64, entries })
}

/// Reformulated test: some `θ' ⊆ N_i \ {j}` has `2·S(θ') < den` and
/// `2·(S(θ') + w_ij) > den`.
fn window(row: &ScaledRow, j: usize) -> (u64, Vec<u64>) {
    let wj = row
        .entries
        .iter()
        .find(|(k, _)| *k == j)
        .map(|(_, w)| *w)
        .expect("j is an out-neighbor");
    let others = row
        .entries
        .iter()
        .filter(|(k, _)| *k != j)
        .map(|(_, w)| *w)
        .collect();
    (wj, others)
}

fn qualifies(sum: u64, wj: u64, den: u64) -> bool {
    2 * sum < den && 2 * (sum + wj) > den
}

/// Exhaustive subset-sum enumeration; exponential in the out-degree.
pub fn decisive_by_enumeration(row: &ScaledRow, j: usize) -> bool {
    let (wj, others) = window(row, j);
    let mut sums = vec![0u64];
    for w in others {
        let len = sums.len();
        for k in 0..len {
            let s = sums[k] + w;
            // sums at or above one half can never satisfy the lower bound
            if 2 * s < row.den {
                sums.push(s);
            }
        }
    }
    sums.into_iter().any(|s| qualifies(s, wj, row.den))
}

/// Pseudo-polynomial subset-sum over the achievable sums below one half.
pub fn decisive_by_dp(row: &ScaledRow, j: usize) -> bool {
    let (wj, others) = window(row, j);
    let limit = row.den.div_ceil(2); // sums s with 2s < den are s < limit
    if limit <= 1 << 24 {
        let mut reach = vec![false; limit as usize];
        reach[0] = true;
        for w in others {
            let w = w as usize;
            if w >= reach.len() {
                continue;
            }
            for s in (w..reach.len()).rev() {
                if reach[s - w] {
                    reach[s] = true;
                }
            }
        }
        reach
            .iter()
            .enumerate()
            .any(|(s, &r)| r && qualifies(s as u64, wj, row.den))
    } else {
        let mut reach = BTreeSet::from([0u64]);
        for w in others {
            let shifted: Vec<u64> = reach
                .iter()
                .map(|s| s + w)
                .filter(|s| 2 * s < row.den)
                .collect();
            reach.extend(shifted);
        }
        reach.into_iter().any(|s| qualifies(s, wj, row.den))
    }
}

/// The parent network with every indecisive out-link removed.
#[derive(Debug, Clone)]
pub struct DecisiveSubgraph<'a, W> {
    parent: &'a InfluenceNetwork<W>,
    decisive: Vec<Vec<usize>>,
}

impl<'a, W: Scalar> DecisiveSubgraph<'a, W> {
    pub fn parent(&self) -> &'a InfluenceNetwork<W> {
        self.parent
    }

    pub fn decisive_out(&self, i: usize) -> &[usize] {
        &self.decisive[i]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.decisive
    }

    pub fn is_decisive_edge(&self, i: usize, j: usize) -> bool {
        self.decisive[i].binary_search(&j).is_ok()
    }

    pub fn decisive_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.decisive
            .iter()
            .enumerate()
            .flat_map(|(i, out)| out.iter().map(move |j| (i, *j)))
    }

    pub fn indecisive_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent
            .edges()
            .map(|(i, j, _)| (i, j))
            .filter(|(i, j)| !self.is_decisive_edge(*i, *j))
    }

    /// Some node reachable from every node along decisive links.
    pub fn globally_reachable_node(&self) -> Option<usize> {
        globally_reachable_node(&self.decisive)
    }

    pub fn has_globally_reachable_node(&self) -> bool {
        self.globally_reachable_node().is_some()
    }
}

/// Smallest node reachable from every node of the directed graph, if any.
///
/// A node is globally reachable exactly when its strongly connected component
/// is the unique sink of the condensation.
pub fn globally_reachable_node(adjacency: &[Vec<usize>]) -> Option<usize> {
    let n = adjacency.len();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (i, out) in adjacency.iter().enumerate() {
        for &j in out {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }
    let components = tarjan_scc(&graph);
    let mut component_of = vec![0usize; n];
    for (c, members) in components.iter().enumerate() {
        for v in members {
            component_of[v.index()] = c;
        }
    }
    let mut is_sink = vec![true; components.len()];
    for (i, out) in adjacency.iter().enumerate() {
        for &j in out {
            if component_of[i] != component_of[j] {
                is_sink[component_of[i]] = false;
            }
        }
    }
    let mut sinks = (0..components.len()).filter(|&c| is_sink[c]);
    let sink = sinks.next()?;
    if sinks.next().is_some() {
        return None;
    }
    components[sink].iter().map(|v| v.index()).min()
}
