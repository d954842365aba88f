//! Rejection-sampling volume estimates for `box ∩ Laguerre cell`.
//!
//! One pass draws uniform points in a box and classifies each into its
//! Laguerre cell, so all `n` cell volumes come from the same sample. With
//! `m >= ln(2n/eta) / (2 tol^2)` points, Hoeffding plus a union bound over
//! cells gives `|v_j - vol_j| <= tol * vol(box)` for every `j` with
//! probability at least `1 - eta`.
//!
//! Randomness is ChaCha8 seeded through [`substream_seed`], so a pass
//! depends only on `(seed, call, box)` and parallel evaluation over boxes
//! reproduces the serial result.

use super::{classify_point, dist_sq, Hyperrectangle, SampleSet};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hoeffding sample count for `cells` simultaneous fractions.
pub fn mc_sample_count(cells: usize, tol: f64, eta: f64) -> f64 {
    ((2.0 * cells as f64 / eta).ln() / (2.0 * tol * tol)).ceil()
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the substream used for `box_index` during evaluation `call`.
pub fn substream_seed(seed: u64, call: u64, box_index: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ call) ^ box_index)
}

/// Uniform sampler over a box.
pub struct BoxSampler<'a> {
    region: &'a Hyperrectangle,
    rng: ChaCha8Rng,
}

impl<'a> BoxSampler<'a> {
    pub fn new(region: &'a Hyperrectangle, seed: u64) -> Self {
        Self {
            region,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn fill(&mut self, x: &mut [f64]) {
        for (d, v) in x.iter_mut().enumerate() {
            let (a, b) = (self.region.lo()[d], self.region.hi()[d]);
            *v = a + (b - a) * self.rng.gen::<f64>();
        }
    }
}

/// Per-cell tallies from one sampling pass over a box.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BoxTally {
    pub samples: u64,
    pub counts: Vec<u64>,
    /// Per-cell sums of `|x - y_j|^2`.
    pub sq_dist: Vec<f64>,
}

pub(crate) fn sample_box(
    samples: &SampleSet,
    g: &[f64],
    region: &Hyperrectangle,
    m: u64,
    seed: u64,
) -> BoxTally {
    let n = samples.len();
    let mut counts = vec![0u64; n];
    let mut sq_dist = vec![0.0; n];
    if n == 1 {
        // Single cell: every point lands in it, no sampling needed for counts.
        counts[0] = m;
    }
    let mut sampler = BoxSampler::new(region, seed);
    let mut x = vec![0.0; region.dim()];
    for _ in 0..m {
        sampler.fill(&mut x);
        let j = if n == 1 { 0 } else { classify_point(samples, g, &x) };
        if n > 1 {
            counts[j] += 1;
        }
        sq_dist[j] += dist_sq(&x, samples.point(j));
    }
    BoxTally {
        samples: m,
        counts,
        sq_dist,
    }
}

pub(crate) fn check_g(g: &[f64]) -> Result<()> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("dual weights".into()))
    }
}

pub(crate) fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Monte-Carlo estimates of `vol(L_j(g) ∩ region)` for every cell `j`.
///
/// `tol` is the additive tolerance relative to `vol(region)`, `eta` the
/// failure probability for all cells jointly.
pub fn cell_box_volumes_mc(
    samples: &SampleSet,
    g: &[f64],
    region: &Hyperrectangle,
    tol: f64,
    eta: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_unit_interval("tolerance", tol)?;
    check_unit_interval("failure probability", eta)?;
    check_g(g)?;
    super::check_dim(samples.len(), g.len())?;
    super::check_dim(samples.dim(), region.dim())?;
    let m = mc_sample_count(samples.len(), tol, eta) as u64;
    let tally = sample_box(samples, g, region, m, seed);
    let vol = region.volume();
    Ok(tally
        .counts
        .iter()
        .map(|&c| c as f64 / m as f64 * vol)
        .collect())
}
