//! Exact balanced transportation by successive shortest paths.
//!
//! Masses are scaled to integers so that augmentations never leave
//! floating-point residue. Sources are inserted one at a time; each unit of
//! supply travels along a shortest residual path to a sink with spare
//! capacity. Sinks are few and sources many, so paths are searched on the
//! sink graph where the edge `a -> b` costs
//! `min { c(i, b) - c(i, a) : flow(i, a) > 0 }`, the cheapest way to
//! reroute some source's flow from `a` to `b`. Each such minimum is kept in a
//! lazily pruned heap.
//!
//! Ties between equal-cost choices go to the smallest sink or source index.

use crate::error::{Error, Result};
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Integer units per unit of mass.
const SCALE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Largest-remainder rounding of `masses * SCALE` to integers summing to `target`.
fn to_units(masses: &[f64], target: u64) -> Vec<u64> {
    let scaled: Vec<f64> = masses.iter().map(|&m| m * SCALE).collect();
    let mut units: Vec<u64> = scaled.iter().map(|v| v.floor() as u64).collect();
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (scaled[a] - scaled[a].floor(), scaled[b] - scaled[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut sum: u64 = units.iter().sum();
    let mut k = 0;
    while sum < target {
        units[order[k % order.len()]] += 1;
        sum += 1;
        k += 1;
    }
    k = 0;
    while sum > target {
        let i = order[order.len() - 1 - k % order.len()];
        if units[i] > 0 {
            units[i] -= 1;
            sum -= 1;
        }
        k += 1;
    }
    units
}

/// Integer flows `flows[i][j]`, in units of `2^-40`.
pub(crate) struct IntegerPlan {
    pub flows: Vec<Vec<u64>>,
}

impl IntegerPlan {
    pub fn to_mass(&self) -> Vec<Vec<f64>> {
        self.flows
            .iter()
            .map(|row| row.iter().map(|&f| f as f64 / SCALE).collect())
            .collect()
    }
}

/// Minimum-cost plan moving `supply` onto `demand` with cost `cost(i, j)`.
///
/// Both mass vectors must be nonnegative and have equal totals within `1e-9`.
pub(crate) fn solve_transport<C>(supply: &[f64], demand: &[f64], cost: C) -> Result<IntegerPlan>
where
    C: Fn(usize, usize) -> f64,
{
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("transport needs sources and sinks".into()));
    }
    if supply
        .iter()
        .chain(demand)
        .any(|&v| !(v.is_finite() && v >= 0.0))
    {
        return Err(Error::InvalidInput("masses must be finite and nonnegative".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "unbalanced transport: supply {total_s} vs demand {total_d}"
        )));
    }
    let target = (total_s * SCALE).round() as u64;
    let a = to_units(supply, target);
    let mut cap = to_units(demand, target);

    let c: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| cost(i, j)).collect()).collect();
    if c.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transport cost".into()));
    }
    let scale = c.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs()));
    let tol = 1e-12 * scale;

    let mut flows = vec![vec![0u64; n]; m];
    // heaps[a * n + b] holds (c(i,b) - c(i,a), i) for sources with flow on a.
    let mut heaps: Vec<BinaryHeap<Reverse<Key>>> = (0..n * n).map(|_| BinaryHeap::new()).collect();
    let push = |heaps: &mut Vec<BinaryHeap<Reverse<Key>>>, i: usize, a: usize| {
        for b in 0..n {
            if b != a {
                heaps[a * n + b].push(Reverse(Key(c[i][b] - c[i][a], i)));
            }
        }
    };

    let mut dist = vec![0.0; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut edge = vec![None::<(f64, usize)>; n * n];
    for s in 0..m {
        let mut left = a[s];
        while left > 0 {
            for (slot, e) in edge.iter_mut().enumerate() {
                let from = slot / n;
                let heap = &mut heaps[slot];
                *e = loop {
                    match heap.peek() {
                        Some(Reverse(Key(w, i))) if flows[*i][from] > 0 => break Some((*w, *i)),
                        Some(_) => {
                            heap.pop();
                        }
                        None => break None,
                    }
                };
            }
            for j in 0..n {
                dist[j] = c[s][j];
                pred[j] = None;
            }
            for _ in 0..n {
                let mut changed = false;
                for from in 0..n {
                    for to in 0..n {
                        if let Some((w, i)) = edge[from * n + to] {
                            if dist[from] + w < dist[to] - tol {
                                dist[to] = dist[from] + w;
                                pred[to] = Some((from, i));
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let target = (0..n)
                .filter(|&j| cap[j] > 0)
                .min_by(|&x, &y| dist[x].total_cmp(&dist[y]).then(x.cmp(&y)))
                .ok_or_else(|| Error::InvalidInput("demand exhausted before supply".into()))?;

            // Walk back to collect the rerouted (source, from, to) hops.
            let mut hops = Vec::new();
            let mut at = target;
            let mut guard = 0;
            while let Some((from, i)) = pred[at] {
                hops.push((i, from, at));
                at = from;
                guard += 1;
                if guard > n {
                    return Err(Error::NonFinite("cycle in shortest-path tree".into()));
                }
            }
            let entry = at;
            let mut delta = left.min(cap[target]);
            for &(i, from, _) in &hops {
                delta = delta.min(flows[i][from]);
            }
            debug_assert!(delta > 0);
            for &(i, from, to) in &hops {
                flows[i][from] -= delta;
                if flows[i][to] == 0 {
                    push(&mut heaps, i, to);
                }
                flows[i][to] += delta;
            }
            if flows[s][entry] == 0 {
                push(&mut heaps, s, entry);
            }
            flows[s][entry] += delta;
            cap[target] -= delta;
            left -= delta;
        }
    }
    Ok(IntegerPlan { flows })
}
