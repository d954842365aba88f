//! Small reference instances and random instance generators.

use crate::geometry::{BoxDensity, Hyperrectangle, Instance, SampleSet, WeightedBox};
use rand::Rng;

fn boxed(lo: Vec<f64>, hi: Vec<f64>, weight: f64) -> WeightedBox {
    WeightedBox {
        region: Hyperrectangle::new(lo, hi).expect("fixture box"),
        weight,
    }
}

fn build(dim: usize, boxes: Vec<WeightedBox>, samples: SampleSet) -> Instance {
    let density = BoxDensity::new(dim, boxes).expect("fixture density");
    Instance::new(density, samples).expect("fixture instance")
}

/// Uniform on `[-1, 1]`, samples `-1, 1` with equal demands.
pub fn fixture_a() -> Instance {
    build(
        1,
        vec![boxed(vec![-1.0], vec![1.0], 0.5)],
        SampleSet::uniform(vec![vec![-1.0], vec![1.0]]).unwrap(),
    )
}

/// Uniform on `[0, 1]`, single sample at `0.5`.
pub fn fixture_b() -> Instance {
    build(
        1,
        vec![boxed(vec![0.0], vec![1.0], 1.0)],
        SampleSet::uniform(vec![vec![0.5]]).unwrap(),
    )
}

/// Uniform on `[0, 1]`, samples `0, 1` with demands `3/4, 1/4`.
pub fn fixture_c() -> Instance {
    build(
        1,
        vec![boxed(vec![0.0], vec![1.0], 1.0)],
        SampleSet::new(vec![vec![0.0], vec![1.0]], vec![0.75, 0.25]).unwrap(),
    )
}

/// Uniform on `[-1, 1]^2`, samples `(-1, 0), (1, 0)`.
pub fn fixture_d() -> Instance {
    build(
        2,
        vec![boxed(vec![-1.0, -1.0], vec![1.0, 1.0], 0.25)],
        SampleSet::uniform(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
    )
}

/// A pair of dual weights whose gradient difference blows up with `m`.
#[derive(Debug, Clone)]
pub struct NecessityCase {
    pub m: f64,
    pub instance: Instance,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
    /// Closed-form `|grad E(g) - grad E(g')| / |g - g'|`.
    pub predicted_ratio: f64,
}

/// Samples at `-1/m, 1/m` in the uniform density on `[-1, 1]`.
pub fn necessity_close_samples(m: f64) -> NecessityCase {
    let instance = build(
        1,
        vec![boxed(vec![-1.0], vec![1.0], 0.5)],
        SampleSet::uniform(vec![vec![-1.0 / m], vec![1.0 / m]]).unwrap(),
    );
    NecessityCase {
        m,
        instance,
        g: vec![0.0, 0.0],
        g_prime: vec![0.0, 1.0 / m],
        predicted_ratio: 0.125 * 2f64.sqrt() * m,
    }
}

/// Uniform density on the thin box `[-1/m, 0] x [0, m]`, samples `(-1, 0), (1, 0)`.
pub fn necessity_thin_box(m: f64) -> NecessityCase {
    let instance = build(
        2,
        vec![boxed(vec![-1.0 / m, 0.0], vec![0.0, m], 1.0)],
        SampleSet::uniform(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
    );
    NecessityCase {
        m,
        instance,
        g: vec![0.0, 0.0],
        g_prime: vec![0.0, 1.0 / m],
        predicted_ratio: (0.125f64).sqrt() * m,
    }
}

/// Random instance in `[-1, 1]^dim` with `k` boxes and `n` uniform samples.
///
/// Boxes occupy disjoint slots along the first axis; every box width and
/// every pairwise sample distance is at least `0.3`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize, n: usize) -> Instance {
    const MIN_GAP: f64 = 0.3;
    let slot = 2.0 / k as f64;
    assert!(slot >= 2.0 * MIN_GAP, "too many boxes for the unit cube");
    let mut regions = Vec::with_capacity(k);
    for i in 0..k {
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for d in 0..dim {
            let (a, b) = if d == 0 {
                (-1.0 + i as f64 * slot, -1.0 + (i + 1) as f64 * slot)
            } else {
                (-1.0, 1.0)
            };
            let start = rng.gen_range(a..b - MIN_GAP);
            let end = rng.gen_range(start + MIN_GAP..=b);
            lo.push(start);
            hi.push(end);
        }
        regions.push(Hyperrectangle::new(lo, hi).unwrap());
    }
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let boxes = regions
        .into_iter()
        .zip(&raw)
        .map(|(region, r)| {
            let weight = r / total / region.volume();
            WeightedBox { region, weight }
        })
        .collect();

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    while points.len() < n {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let far = points
            .iter()
            .all(|q| crate::geometry::dist_sq(&p, q) >= MIN_GAP * MIN_GAP);
        if far {
            points.push(p);
        }
    }
    build(dim, boxes, SampleSet::uniform(points).unwrap())
}

/// Random instance with `l <= 2`, `k <= 2`, `2 <= n <= 4`.
pub fn random_small_instance<R: Rng + ?Sized>(rng: &mut R) -> Instance {
    let dim = rng.gen_range(1..=2);
    let k = rng.gen_range(1..=2);
    let n = rng.gen_range(2..=4);
    random_instance(rng, dim, k, n)
}
