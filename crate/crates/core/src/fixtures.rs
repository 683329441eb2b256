//! Standard networks used by tests, the acceptance suite and the CLI.

use rand::seq::index::sample;
use rand::Rng;

use crate::network::InfluenceNetwork;
use crate::scalar::Scalar;

fn build<W: Scalar>(rows: Vec<Vec<(usize, W)>>) -> InfluenceNetwork<W> {
    InfluenceNetwork::from_rows(rows, false).expect("fixture rows are stochastic")
}

fn frac<W: Scalar>(p: usize, q: usize) -> W {
    W::from_fraction(p as i64, q as i64)
}

/// Every node weights every node (itself included) by `1/n`.
pub fn complete_uniform<W: Scalar>(n: usize) -> InfluenceNetwork<W> {
    build((0..n).map(|_| (0..n).map(|j| (j, frac(1, n))).collect()).collect())
}

/// Complete graph without self-loops: every node weights each other node by
/// `1/(n-1)`. For `n >= 3` the only maximal cohesive set is the whole graph,
/// which fails for [`complete_uniform`] at even `n` (any half is maximal).
pub fn complete_without_self_loops<W: Scalar>(n: usize) -> InfluenceNetwork<W> {
    if n == 1 {
        return isolated(1);
    }
    build(
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| (j, frac(1, n - 1))).collect())
            .collect(),
    )
}

/// Isolated nodes, each listening only to itself.
pub fn isolated<W: Scalar>(n: usize) -> InfluenceNetwork<W> {
    build((0..n).map(|i| vec![(i, W::one())]).collect())
}

/// Directed ring `i -> i+1 (mod n)` with unit weights.
pub fn ring<W: Scalar>(n: usize) -> InfluenceNetwork<W> {
    build((0..n).map(|i| vec![((i + 1) % n, W::one())]).collect())
}

/// Disjoint cliques with uniform weights inside each clique, self-loops included.
pub fn disjoint_cliques<W: Scalar>(sizes: &[usize]) -> InfluenceNetwork<W> {
    let mut rows = Vec::new();
    let mut start = 0;
    for &k in sizes {
        for _ in 0..k {
            rows.push((start..start + k).map(|j| (j, frac(1, k))).collect());
        }
        start += k;
    }
    build(rows)
}

/// Two `k`-cliques joined by a reciprocal bridge between node `k-1` and node `k`.
///
/// The two bridge endpoints put `bridge` on the other side and spread the rest
/// uniformly over their own clique (self-loop included); all other nodes are
/// uniform over their clique. With `bridge <= 1/2` both cliques are maximal
/// cohesive.
pub fn bridged_cliques<W: Scalar>(k: usize, bridge: W) -> InfluenceNetwork<W> {
    let n = 2 * k;
    let inner = (W::one() - bridge.clone()) / frac(k, 1);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let block = if i < k { 0..k } else { k..n };
        let row = if i == k - 1 || i == k {
            let other = if i == k - 1 { k } else { k - 1 };
            let mut r: Vec<(usize, W)> = block.map(|j| (j, inner.clone())).collect();
            r.push((other, bridge.clone()));
            r
        } else {
            block.map(|j| (j, frac(1, k))).collect()
        };
        rows.push(row);
    }
    build(rows)
}

/// Four-node star: the centre (node 0) weights itself 2/7, leaf 1 by 1/7 and
/// leaves 2, 3 by 2/7 each; every leaf listens only to the centre. The link
/// from the centre to leaf 1 is the only indecisive one.
pub fn star_with_light_link<W: Scalar>() -> InfluenceNetwork<W> {
    build(vec![
        vec![(0, frac(2, 7)), (1, frac(1, 7)), (2, frac(2, 7)), (3, frac(2, 7))],
        vec![(0, W::one())],
        vec![(0, W::one())],
        vec![(0, W::one())],
    ])
}

/// `rows x cols` grid, four-neighbourhood plus self-loop, uniform weights.
/// Node `(r, c)` has index `r * cols + c`.
pub fn lattice<W: Scalar>(rows: usize, cols: usize) -> InfluenceNetwork<W> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut nbrs = vec![r * cols + c];
            if r > 0 {
                nbrs.push((r - 1) * cols + c);
            }
            if r + 1 < rows {
                nbrs.push((r + 1) * cols + c);
            }
            if c > 0 {
                nbrs.push(r * cols + c - 1);
            }
            if c + 1 < cols {
                nbrs.push(r * cols + c + 1);
            }
            let d = nbrs.len();
            out.push(nbrs.into_iter().map(|j| (j, frac(1, d))).collect());
        }
    }
    build(out)
}

/// Random sparse network: each row picks between one and `max_degree`
/// distinct out-neighbours (self allowed) and splits a random denominator
/// from `denominators` among them in positive integer parts.
pub fn random_network<W: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    max_degree: usize,
    denominators: &[usize],
) -> InfluenceNetwork<W> {
    let rows = (0..n)
        .map(|_| {
            let den = denominators[rng.random_range(0..denominators.len())];
            let deg = rng.random_range(1..=max_degree.min(n).min(den));
            let cols = sample(rng, n, deg).into_vec();
            let parts = random_composition(rng, den, deg);
            cols.into_iter()
                .zip(parts)
                .map(|(j, p)| (j, frac(p, den)))
                .collect()
        })
        .collect();
    build(rows)
}

/// `total` split into `k` positive integer parts, uniformly over compositions.
pub fn random_composition<R: Rng + ?Sized>(rng: &mut R, total: usize, k: usize) -> Vec<usize> {
    assert!(k >= 1 && k <= total);
    let mut cuts = sample(rng, total - 1, k - 1).into_vec();
    cuts.iter_mut().for_each(|c| *c += 1);
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(k);
    let mut prev = 0;
    for c in cuts {
        parts.push(c - prev);
        prev = c;
    }
    parts.push(total - prev);
    parts
}
