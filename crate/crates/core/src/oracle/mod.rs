//! Reference solutions used to validate the dual solver.
//!
//! * exact semidiscrete transport in one dimension (monotone rearrangement),
//! * exact discrete transport against a midpoint discretization of the
//!   density, in any dimension,
//! * central finite differences of the exact energy.

mod transport;

use crate::dual::energy_exact;
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, norm_sq, BoxDensity, Instance};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Largest `resolution^l * k` accepted by [`discretize_source`].
pub const MAX_DISCRETE_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub point: Vec<f64>,
    pub mass: f64,
}

/// Midpoint discretization: each box is cut into `resolution^l` equal cells
/// and each cell's mass is placed at its center.
pub fn discretize_source(density: &BoxDensity, resolution: usize) -> Result<Vec<WeightedPoint>> {
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be >= 1".into()));
    }
    let l = density.dim();
    let per_box = (resolution as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
    if per_box.saturating_mul(density.len() as u128) > MAX_DISCRETE_POINTS as u128 {
        return Err(Error::TooLarge(format!(
            "{resolution}^{l} cells per box over {} boxes",
            density.len()
        )));
    }
    let per_box = per_box as usize;
    let mut out = Vec::with_capacity(per_box * density.len());
    for b in density.boxes() {
        let r = &b.region;
        let mass = b.weight * r.volume() / per_box as f64;
        for c in 0..per_box {
            let mut rem = c;
            let mut point = vec![0.0; l];
            // Last axis varies fastest.
            for d in (0..l).rev() {
                let i = rem % resolution;
                rem /= resolution;
                point[d] = r.lo()[d] + (i as f64 + 0.5) * r.width(d) / resolution as f64;
            }
            out.push(WeightedPoint { point, mass });
        }
    }
    Ok(out)
}

/// An optimal discrete transport plan.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlan {
    pub sources: Vec<WeightedPoint>,
    /// `flows[i][j]`: mass moved from source `i` to sample `j`.
    pub flows: Vec<Vec<f64>>,
    pub cost: f64,
}

impl DiscretePlan {
    /// Pairs `(i, j)` carrying positive flow.
    pub fn support(&self) -> BTreeSet<(usize, usize)> {
        self.flows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &f)| f > 0.0)
                    .map(move |(j, _)| (i, j))
            })
            .collect()
    }

    /// Largest deviation of the row and column sums from the marginals.
    pub fn marginal_error(&self, demands: &[f64]) -> f64 {
        let mut err: f64 = 0.0;
        for (s, row) in self.sources.iter().zip(&self.flows) {
            err = err.max((row.iter().sum::<f64>() - s.mass).abs());
        }
        for (j, b) in demands.iter().enumerate() {
            let col: f64 = self.flows.iter().map(|r| r[j]).sum();
            err = err.max((col - b).abs());
        }
        err
    }

    /// `int sum_j x . y_j d pi`.
    pub fn cross_term(&self, samples: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (s, row) in self.sources.iter().zip(&self.flows) {
            for (f, y) in row.iter().zip(samples) {
                if *f > 0.0 {
                    total += f * crate::geometry::dot(&s.point, y);
                }
            }
        }
        total
    }
}

/// Exact optimal plan at cost `|x - y|^2`.
pub fn solve_discrete_ot_exact(
    sources: &[WeightedPoint],
    samples: &[Vec<f64>],
    demands: &[f64],
) -> Result<DiscretePlan> {
    solve_discrete_ot_with_cost(sources, samples, demands, |x, y| dist_sq(x, y))
}

/// Exact optimal plan under an arbitrary cost `cost(x_i, y_j)`.
pub fn solve_discrete_ot_with_cost<C>(
    sources: &[WeightedPoint],
    samples: &[Vec<f64>],
    demands: &[f64],
    cost: C,
) -> Result<DiscretePlan>
where
    C: Fn(&[f64], &[f64]) -> f64,
{
    crate::geometry::check_dim(samples.len(), demands.len())?;
    let supply: Vec<f64> = sources.iter().map(|s| s.mass).collect();
    let plan = transport::solve_transport(&supply, demands, |i, j| {
        cost(&sources[i].point, &samples[j])
    })?;
    let flows = plan.to_mass();
    let mut total = 0.0;
    for (s, row) in sources.iter().zip(&flows) {
        for (f, y) in row.iter().zip(samples) {
            if *f > 0.0 {
                total += f * cost(&s.point, y);
            }
        }
    }
    Ok(DiscretePlan {
        sources: sources.to_vec(),
        flows,
        cost: total,
    })
}

/// Discrete transport cost and a bound on its distance to the semidiscrete optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOracle {
    pub plan: DiscretePlan,
    /// `|p* - cost| <= error_bound`.
    pub error_bound: f64,
    /// Half the diagonal of the largest discretization cell.
    pub cell_radius: f64,
}

/// Bound on `|p* - p_h|` when every unit of mass moves by at most `h`:
/// `|W - W_h| <= h` gives `|W^2 - W_h^2| <= 2 h sqrt(p_h) + h^2`.
pub fn discretization_error_bound(discrete_cost: f64, cell_radius: f64) -> f64 {
    2.0 * cell_radius * discrete_cost.max(0.0).sqrt() + cell_radius * cell_radius
}

pub fn discrete_oracle(instance: &Instance, resolution: usize) -> Result<DiscreteOracle> {
    let sources = discretize_source(&instance.density, resolution)?;
    let plan = solve_discrete_ot_exact(
        &sources,
        instance.samples.points(),
        instance.samples.demands(),
    )?;
    let cell_radius = instance
        .density
        .boxes()
        .iter()
        .map(|b| {
            let half: Vec<f64> = (0..b.region.dim())
                .map(|d| 0.5 * b.region.width(d) / resolution as f64)
                .collect();
            norm_sq(&half).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(DiscreteOracle {
        error_bound: discretization_error_bound(plan.cost, cell_radius),
        cell_radius,
        plan,
    })
}

/// Exact one-dimensional semidiscrete solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimSolution {
    pub p_star: f64,
    /// `int sum_j x y_j d pi`.
    pub cross_term: f64,
    /// Points where the cumulative source mass reaches the cumulative demand
    /// of the samples sorted by position.
    pub breakpoints: Vec<f64>,
}

pub fn semidiscrete_1d_exact(instance: &Instance) -> Result<OneDimSolution> {
    if instance.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: instance.dim(),
        });
    }
    let mut order: Vec<usize> = (0..instance.n()).collect();
    let ys: Vec<f64> = instance.samples.points().iter().map(|p| p[0]).collect();
    order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    let demands = instance.samples.demands();
    let mut boxes: Vec<(f64, f64, f64)> = instance
        .density
        .boxes()
        .iter()
        .map(|b| (b.region.lo()[0], b.region.hi()[0], b.weight))
        .collect();
    boxes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n = order.len();
    let mut k = 0;
    let mut remaining = demands[order[0]];
    let (mut p_star, mut cross) = (0.0, 0.0);
    let mut breakpoints = Vec::with_capacity(n - 1);
    for &(lo, hi, w) in &boxes {
        let mut x = lo;
        while x < hi {
            let y = ys[order[k]];
            let available = w * (hi - x);
            let (end, advance) = if k + 1 == n || available <= remaining {
                remaining -= available;
                (hi, k + 1 < n && remaining <= 1e-15)
            } else {
                (x + remaining / w, true)
            };
            p_star += w * ((end - y).powi(3) - (x - y).powi(3)) / 3.0;
            cross += w * y * (end * end - x * x) / 2.0;
            x = end;
            if advance {
                breakpoints.push(end);
                k += 1;
                remaining = demands[order[k]];
                // Samples with no demand share the same breakpoint.
                while remaining <= 0.0 && k + 1 < n {
                    breakpoints.push(end);
                    k += 1;
                    remaining = demands[order[k]];
                }
            }
        }
    }
    Ok(OneDimSolution {
        p_star,
        cross_term: cross,
        breakpoints,
    })
}

/// Central differences of the exact energy.
pub fn finite_difference_gradient(instance: &Instance, g: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    crate::geometry::check_dim(instance.n(), g.len())?;
    let mut work = g.to_vec();
    let mut out = Vec::with_capacity(g.len());
    for j in 0..g.len() {
        work[j] = g[j] + h;
        let up = energy_exact(instance, &work)?;
        work[j] = g[j] - h;
        let down = energy_exact(instance, &work)?;
        work[j] = g[j];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}
