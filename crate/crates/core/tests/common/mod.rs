#![allow(dead_code)]

use median_consensus::fixtures::{self, random_network};
use median_consensus::Network64;
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Q = Ratio<i64>;

/// Row denominators that rule out subsets weighing exactly one half.
pub const ODD_DENS: &[usize] = &[3, 5, 7, 9, 11, 15];
/// Row denominators that allow exact-half ties.
pub const TIE_DENS: &[usize] = &[2, 4, 6, 8, 10, 12];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_net(seed: u64, n: usize, max_degree: usize, dens: &[usize]) -> Network64 {
    random_network(&mut rng(seed), n, max_degree, dens)
}

/// Hand-built networks with at most six nodes.
pub fn small_fixtures() -> Vec<(String, Network64)> {
    vec![
        ("complete-3".into(), fixtures::complete_uniform(3)),
        ("complete-4".into(), fixtures::complete_uniform(4)),
        ("complete-no-loops-5".into(), fixtures::complete_without_self_loops(5)),
        ("complete-no-loops-6".into(), fixtures::complete_without_self_loops(6)),
        ("isolated-3".into(), fixtures::isolated(3)),
        ("ring-5".into(), fixtures::ring(5)),
        ("cliques-3-3".into(), fixtures::disjoint_cliques(&[3, 3])),
        ("cliques-2-2".into(), fixtures::disjoint_cliques(&[2, 2])),
        ("bridged-2/5".into(), fixtures::bridged_cliques(3, Q::new(2, 5))),
        ("bridged-1/7".into(), fixtures::bridged_cliques(3, Q::new(1, 7))),
        ("star".into(), fixtures::star_with_light_link()),
        ("lattice-2x3".into(), fixtures::lattice(2, 3)),
    ]
}

/// Fixtures plus random networks (odd and tie-prone) with `n <= 6`.
pub fn fixed_point_corpus(random: usize) -> Vec<(String, Network64)> {
    let mut out = small_fixtures();
    for k in 0..random {
        let dens = if k % 2 == 0 { ODD_DENS } else { TIE_DENS };
        let n = 2 + k % 5;
        out.push((format!("random-{k}"), random_net(1000 + k as u64, n, 4, dens)));
    }
    out
}
