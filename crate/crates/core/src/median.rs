//! Weighted medians of opinion profiles.
//!
//! A value `v` of the profile is a weighted median when the mass strictly
//! below `v` and the mass strictly above `v` are both at most one half. The
//! set of such values is always a contiguous run of the sorted distinct
//! values. When the run has more than one element the updating agent takes
//! the median closest to its own opinion; because every profile value inside
//! the run is itself a median, that choice is never tied.

use crate::error::{Error, Result};
use crate::scalar::{Mass, Scalar};

/// Validated weight vector: non-negative entries summing to exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weights<W> {
    entries: Vec<W>,
}

impl<W: Scalar> Weights<W> {
    pub fn new(entries: Vec<W>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if let Some(pos) = entries.iter().position(|w| *w < W::zero()) {
            return Err(Error::InvalidWeights(format!("entry {pos} is negative")));
        }
        let total = entries.iter().cloned().fold(W::zero(), |a, b| a + b);
        if total != W::one() {
            return Err(Error::InvalidWeights(format!("entries sum to {total}, expected 1")));
        }
        Ok(Self { entries })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyProfile);
        }
        let each = W::from_fraction(1, n as i64);
        Self::new(vec![each; n])
    }

    pub fn as_slice(&self) -> &[W] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Median set of a profile together with the tie-broken choice for one
/// reference opinion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MedianResult<O> {
    pub median_set: Vec<O>,
    pub chosen: O,
}

fn check_dims<O, W: Scalar>(x: &[O], w: &Weights<W>) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyProfile);
    }
    if x.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: x.len(),
        });
    }
    Ok(())
}

/// All weighted medians of `x` under `w`, ascending.
pub fn weighted_median_set<O, W>(x: &[O], w: &Weights<W>) -> Result<Vec<O>>
where
    O: Ord + Clone,
    W: Scalar,
{
    check_dims(x, w)?;
    let pairs = x.iter().cloned().zip(w.as_slice().iter().cloned()).collect();
    Ok(median_set_by_mass(pairs, &W::one()))
}

/// Median set for arbitrary `(value, mass)` pairs with the given total mass.
///
/// Equal values are aggregated before the two inequalities are tested.
pub fn median_set_by_mass<O: Ord + Clone, M: Mass>(mut pairs: Vec<(O, M)>, total: &M) -> Vec<O> {
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let mut strata: Vec<(O, M)> = Vec::with_capacity(pairs.len());
    for (v, m) in pairs {
        match strata.last_mut() {
            Some((last, acc)) if *last == v => *acc = acc.clone() + m,
            _ => strata.push((v, m)),
        }
    }
    // mass above v is total - through, so "above <= 1/2" is total <= 2 * through
    let mut below = M::zero();
    let mut out = Vec::new();
    for (v, m) in strata {
        let through = below.clone() + m;
        if below.clone() + below.clone() <= *total && *total <= through.clone() + through.clone() {
            out.push(v);
        }
        below = through;
    }
    out
}

/// The element of a median run closest to `reference`.
///
/// Panics if `reference` lies strictly inside the run without belonging to
/// it, which would contradict the run structure of median sets.
pub fn closest_in_run<O: Ord + Clone>(run: &[O], reference: &O) -> O {
    let first = run.first().expect("median sets are non-empty");
    let last = run.last().expect("median sets are non-empty");
    if reference < first {
        return first.clone();
    }
    if reference > last {
        return last.clone();
    }
    assert!(
        run.binary_search(reference).is_ok(),
        "reference inside the median run must itself be a median"
    );
    reference.clone()
}

/// Median set plus the tie-broken choice for `reference`.
pub fn weighted_median<O, W>(x: &[O], w: &Weights<W>, reference: &O) -> Result<MedianResult<O>>
where
    O: Ord + Clone,
    W: Scalar,
{
    check_dims(x, w)?;
    if !x.contains(reference) {
        return Err(Error::ReferenceNotInProfile);
    }
    let median_set = weighted_median_set(x, w)?;
    let chosen = closest_in_run(&median_set, reference);
    Ok(MedianResult { median_set, chosen })
}

/// The weighted median closest to `reference` (the updating agent's opinion).
pub fn med_i<O, W>(x: &[O], w: &Weights<W>, reference: &O) -> Result<O>
where
    O: Ord + Clone,
    W: Scalar,
{
    weighted_median(x, w, reference).map(|r| r.chosen)
}

/// Hot-path median: returns the same value as [`med_i`] but only needs the
/// positively weighted entries.
///
/// The endpoints of a median run always carry positive mass, and anything
/// strictly inside the run is chosen only when it is the reference itself, so
/// clamping the reference into `[lo, hi]` reproduces the tie-broken choice.
/// `pairs` is reordered in place.
pub fn clamped_median<O: Ord + Copy, M: Mass + Copy>(reference: O, pairs: &mut [(O, M)], total: M) -> O {
    debug_assert!(!pairs.is_empty());
    pairs.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut lo = None;
    let mut hi = pairs[0].0;
    let mut below = M::zero();
    let mut k = 0;
    while k < pairs.len() {
        let v = pairs[k].0;
        let mut through = below;
        while k < pairs.len() && pairs[k].0 == v {
            through = through + pairs[k].1;
            k += 1;
        }
        if below + below <= total {
            hi = v;
        }
        if lo.is_none() && total <= through + through {
            lo = Some(v);
        }
        below = through;
    }
    let lo = lo.expect("total mass reaches one half");
    reference.clamp(lo, hi)
}

/// Minimisers of `z -> sum_j w_j |z - x_j|` over the profile values.
///
/// Independent characterisation of the median set through the best-response
/// interpretation of the update rule. Only numeric opinions can be passed.
pub fn best_response_oracle<W: Scalar>(x: &[W], w: &Weights<W>) -> Result<Vec<W>> {
    check_dims(x, w)?;
    let mut candidates: Vec<W> = x.to_vec();
    candidates.sort();
    candidates.dedup();
    let cost = |z: &W| -> W {
        x.iter()
            .zip(w.as_slice())
            .map(|(xj, wj)| {
                let d = if z > xj { z.clone() - xj.clone() } else { xj.clone() - z.clone() };
                wj.clone() * d
            })
            .fold(W::zero(), |a, b| a + b)
    };
    let costs: Vec<W> = candidates.iter().map(cost).collect();
    let best = costs.iter().min().expect("non-empty profile").clone();
    Ok(candidates
        .into_iter()
        .zip(costs)
        .filter(|(_, c)| *c == best)
        .map(|(z, _)| z)
        .collect())
}
