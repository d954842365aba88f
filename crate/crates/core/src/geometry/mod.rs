//! Boxes, box densities, sample sets and Laguerre-cell geometry.
//!
//! Laguerre cell `j` for dual weights `g` is the set of points where
//! `|x - y_j|^2 - g_j` is minimal over all sites. Cells are intersections of
//! `n - 1` half-spaces `2 (y_k - y_j) . x <= g_j - g_k + |y_k|^2 - |y_j|^2`,
//! so clipping a box by them gives a convex polytope.
//!
//! Indices are zero-based throughout.

pub(crate) mod montecarlo;
mod polytope;

pub use montecarlo::{cell_box_volumes_mc, mc_sample_count, substream_seed, BoxSampler};
pub use polytope::{cell_box_integrals_exact, cell_box_volume_exact, CellIntegrals, EXACT_MAX_DIM};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for mass and demand normalization.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Closed axis-aligned box `[lo_0, hi_0] x ... x [lo_{l-1}, hi_{l-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Hyperrectangle {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidInput("box must have dimension >= 1".into()));
        }
        for (dim, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::DegenerateBox { dim, lo: a, hi: b });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn min_width(&self) -> f64 {
        (0..self.dim())
            .map(|d| self.width(d))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Closed membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&a, &b))| a <= v && v <= b)
    }

    /// True when the open interiors intersect.
    pub fn interiors_overlap(&self, other: &Hyperrectangle) -> bool {
        (0..self.dim()).all(|d| self.lo[d] < other.hi[d] && other.lo[d] < self.hi[d])
    }

    /// All `2^l` corners, corner `mask` taking `hi[d]` where bit `d` is set.
    pub fn corners(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let l = self.dim();
        (0..1usize << l).map(move |mask| {
            (0..l)
                .map(|d| if mask >> d & 1 == 1 { self.hi[d] } else { self.lo[d] })
                .collect()
        })
    }

    /// `(l-1)`-volume of the orthogonal projection onto the hyperplane with
    /// unit normal `u`: `sum_d |u_d| vol / w_d`.
    pub fn shadow_volume(&self, u: &[f64]) -> f64 {
        let vol = self.volume();
        (0..self.dim())
            .map(|d| u[d].abs() * vol / self.width(d))
            .sum()
    }
}

/// One piece `(H_i, gamma_i)` of a box density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedBox {
    pub region: Hyperrectangle,
    pub weight: f64,
}

/// Probability density that is constant on finitely many disjoint boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDensity {
    dim: usize,
    boxes: Vec<WeightedBox>,
}

impl BoxDensity {
    /// Validates dimensions, positive weights, pairwise disjointness and unit mass.
    pub fn new(dim: usize, boxes: Vec<WeightedBox>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if boxes.is_empty() {
            return Err(Error::InvalidInput("density needs at least one box".into()));
        }
        for b in &boxes {
            if b.region.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.region.dim(),
                });
            }
            if !(b.weight.is_finite() && b.weight > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "box weight must be positive and finite, got {}",
                    b.weight
                )));
            }
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].region.interiors_overlap(&boxes[j].region) {
                    return Err(Error::OverlappingBoxes {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        let mass: f64 = boxes.iter().map(|b| b.weight * b.region.volume()).sum();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                what: "box density mass",
                sum: mass,
            });
        }
        Ok(Self { dim, boxes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[WeightedBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.boxes.iter().map(|b| b.weight * b.region.volume()).sum()
    }

    /// Density value at `x` (zero off the support).
    pub fn density_at(&self, x: &[f64]) -> f64 {
        self.boxes
            .iter()
            .find(|b| b.region.contains(x))
            .map_or(0.0, |b| b.weight)
    }
}

/// Sinks `y_j` with demands `b_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    demands: Vec<f64>,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, demands: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("need at least one sample".into()));
        }
        if points.len() != demands.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: demands.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("samples must have dimension >= 1".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("sample coordinate".into()));
            }
        }
        if demands.iter().any(|&b| !(b.is_finite() && b >= 0.0)) {
            return Err(Error::InvalidInput("demands must be finite and >= 0".into()));
        }
        let sum: f64 = demands.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                what: "demands",
                sum,
            });
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(Error::DuplicateSamples {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(Self { points, demands })
    }

    /// Samples with the default demands `1/n`.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len().max(1);
        let demands = vec![1.0 / n as f64; points.len()];
        Self::new(points, demands)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.demands.iter().all(|&b| (b - u).abs() <= 1e-12)
    }

    /// `sum_j b_j y_j`.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (p, &b) in self.points.iter().zip(&self.demands) {
            for (o, v) in out.iter_mut().zip(p) {
                *o += b * v;
            }
        }
        out
    }

    /// `sum_j b_j |y_j|^2`.
    pub fn weighted_sq_norm(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.demands)
            .map(|(p, &b)| b * norm_sq(p))
            .sum()
    }

    /// Minimum pairwise distance, `None` for a single sample.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = dist_sq(&self.points[i], &self.points[j]).sqrt();
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        best
    }
}

/// A semidiscrete transport instance: source density plus sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub density: BoxDensity,
    pub samples: SampleSet,
}

impl Instance {
    pub fn new(density: BoxDensity, samples: SampleSet) -> Result<Self> {
        if density.dim() != samples.dim() {
            return Err(Error::DimensionMismatch {
                expected: density.dim(),
                got: samples.dim(),
            });
        }
        Ok(Self { density, samples })
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    /// Number of samples `n`.
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Number of boxes `k`.
    pub fn k(&self) -> usize {
        self.density.len()
    }

    pub fn stats(&self) -> InstanceStats {
        InstanceStats::compute(self)
    }
}

/// Scale constants derived from the reference set (samples and box corners).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    /// Total source mass `N`.
    pub total_mass: f64,
    /// `D`: largest norm over the reference set.
    pub max_norm: f64,
    /// `s`: min of the minimum pairwise sample distance and the minimum box width.
    pub min_separation: f64,
    /// `L = 2 n l k / s^2`.
    pub smoothness: f64,
    pub reference_set_size: usize,
    pub n: usize,
    pub dim: usize,
    pub k: usize,
}

impl InstanceStats {
    fn compute(inst: &Instance) -> Self {
        let mut max_norm: f64 = 0.0;
        let mut size = 0usize;
        for p in inst.samples.points() {
            max_norm = max_norm.max(norm_sq(p).sqrt());
            size += 1;
        }
        for b in inst.density.boxes() {
            // |corner|^2 is maximised coordinate-wise.
            let far: f64 = b
                .region
                .lo()
                .iter()
                .zip(b.region.hi())
                .map(|(a, c)| a.abs().max(c.abs()).powi(2))
                .sum();
            max_norm = max_norm.max(far.sqrt());
            size += 1 << inst.dim();
        }
        let min_width = inst
            .density
            .boxes()
            .iter()
            .map(|b| b.region.min_width())
            .fold(f64::INFINITY, f64::min);
        let min_separation = match inst.samples.min_pairwise_distance() {
            Some(d) => d.min(min_width),
            None => min_width,
        };
        let (n, dim, k) = (inst.n(), inst.dim(), inst.k());
        let smoothness = 2.0 * (n * dim * k) as f64 / (min_separation * min_separation);
        Self {
            total_mass: inst.density.total_mass(),
            max_norm,
            min_separation,
            smoothness,
            reference_set_size: size,
            n,
            dim,
            k,
        }
    }
}

/// Result of a separation-oracle query.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Inside,
    /// `normal . z <= offset` on the body while `normal . x > offset`.
    Hyperplane { normal: Vec<f64>, offset: f64 },
}

/// Membership or an axis-aligned separating face; `O(l)`.
pub fn box_separation_oracle(region: &Hyperrectangle, x: &[f64]) -> Result<Separation> {
    check_dim(region.dim(), x.len())?;
    for d in 0..region.dim() {
        if x[d] < region.lo[d] {
            let mut normal = vec![0.0; region.dim()];
            normal[d] = -1.0;
            return Ok(Separation::Hyperplane {
                normal,
                offset: -region.lo[d],
            });
        }
        if x[d] > region.hi[d] {
            let mut normal = vec![0.0; region.dim()];
            normal[d] = 1.0;
            return Ok(Separation::Hyperplane {
                normal,
                offset: region.hi[d],
            });
        }
    }
    Ok(Separation::Inside)
}

/// Half-space `normal . x <= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - dot(&self.normal, x)
    }
}

/// The bisector half-space keeping cell `j` on the near side of site `k`.
pub fn laguerre_halfspace(samples: &SampleSet, g: &[f64], j: usize, k: usize) -> HalfSpace {
    let yj = samples.point(j);
    let yk = samples.point(k);
    HalfSpace {
        normal: yk.iter().zip(yj).map(|(a, b)| 2.0 * (a - b)).collect(),
        offset: g[j] - g[k] + norm_sq(yk) - norm_sq(yj),
    }
}

/// All `n - 1` half-spaces bounding Laguerre cell `j`.
pub fn laguerre_halfspaces(samples: &SampleSet, g: &[f64], j: usize) -> Vec<HalfSpace> {
    (0..samples.len())
        .filter(|&k| k != j)
        .map(|k| laguerre_halfspace(samples, g, j, k))
        .collect()
}

/// Membership in Laguerre cell `j`, or the hyperplane of the smallest
/// violating site; `O(n l)`.
pub fn laguerre_separation_oracle(
    samples: &SampleSet,
    g: &[f64],
    j: usize,
    x: &[f64],
) -> Result<Separation> {
    if j >= samples.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: samples.len(),
        });
    }
    check_dim(samples.len(), g.len())?;
    check_dim(samples.dim(), x.len())?;
    let own = dist_sq(x, samples.point(j)) - g[j];
    for k in 0..samples.len() {
        if k == j {
            continue;
        }
        if dist_sq(x, samples.point(k)) - g[k] < own {
            let h = laguerre_halfspace(samples, g, j, k);
            return Ok(Separation::Hyperplane {
                normal: h.normal,
                offset: h.offset,
            });
        }
    }
    Ok(Separation::Inside)
}

/// `argmin_j |x - y_j|^2 - g_j`, ties to the smallest index.
pub fn classify_point(samples: &SampleSet, g: &[f64], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (j, y) in samples.points().iter().enumerate() {
        let score = dist_sq(x, y) - g[j];
        if score < best_score {
            best_score = score;
            best = j;
        }
    }
    best
}

/// Classification under the general cost `|scale x - y_j - shift|^2 - g_j`.
///
/// Also returns the gap between the best and second-best scores so callers
/// can discard near-ties.
pub fn classify_point_affine(
    samples: &SampleSet,
    g: &[f64],
    x: &[f64],
    shift: &[f64],
    scale: f64,
) -> (usize, f64) {
    let mut best = 0;
    let mut first = f64::INFINITY;
    let mut second = f64::INFINITY;
    for (j, y) in samples.points().iter().enumerate() {
        let c: f64 = x
            .iter()
            .zip(y)
            .zip(shift)
            .map(|((xi, yi), mi)| (scale * xi - yi - mi).powi(2))
            .sum();
        let score = c - g[j];
        if score < first {
            second = first;
            first = score;
            best = j;
        } else if score < second {
            second = score;
        }
    }
    (best, second - first)
}

/// Closed-form moments of a box density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `N = int d alpha`.
    pub mass: f64,
    /// `int x d alpha`.
    pub first: Vec<f64>,
    /// `int |x|^2 d alpha`.
    pub second: f64,
}

impl Moments {
    /// `N int|x|^2 - |int x|^2`, invariant under translation.
    pub fn spread(&self) -> f64 {
        self.mass * self.second - norm_sq(&self.first)
    }
}

pub fn box_moments(density: &BoxDensity) -> Moments {
    let l = density.dim();
    let mut mass = 0.0;
    let mut first = vec![0.0; l];
    let mut second = 0.0;
    for b in density.boxes() {
        let r = &b.region;
        let vol = r.volume();
        mass += b.weight * vol;
        for (d, f) in first.iter_mut().enumerate() {
            *f += b.weight * vol * 0.5 * (r.lo[d] + r.hi[d]);
        }
        let mut s = 0.0;
        for d in 0..l {
            let others: f64 = (0..l).filter(|&h| h != d).map(|h| r.width(h)).product();
            s += (r.hi[d].powi(3) - r.lo[d].powi(3)) * others;
        }
        second += b.weight * s / 3.0;
    }
    Moments {
        mass,
        first,
        second,
    }
}

/// Density values sampled on a regular grid, last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub origin: Vec<f64>,
    pub cell_widths: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Box-density approximation of a gridded density: one box per positive
/// cell, renormalized to unit mass. With `compact`, equal-valued runs along
/// the last axis are merged into a single box.
pub fn approximate_density(grid: &DensityGrid, compact: bool) -> Result<BoxDensity> {
    let l = grid.shape.len();
    if l == 0 || grid.origin.len() != l || grid.cell_widths.len() != l {
        return Err(Error::InvalidInput("grid origin/widths/shape disagree".into()));
    }
    if grid.cell_widths.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(Error::InvalidInput("cell widths must be positive".into()));
    }
    let total: usize = grid.shape.iter().product();
    if total != grid.values.len() {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: grid.values.len(),
        });
    }
    if grid.values.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::InvalidInput("density values must be finite and >= 0".into()));
    }
    let cell_vol: f64 = grid.cell_widths.iter().product();
    let mass: f64 = grid.values.iter().sum::<f64>() * cell_vol;
    if mass <= 0.0 {
        return Err(Error::InvalidInput("grid density is identically zero".into()));
    }

    let row_len = grid.shape[l - 1];
    let mut boxes = Vec::new();
    let mut index = vec![0usize; l];
    for row in 0..total / row_len {
        // Multi-index of the row start (all axes but the last).
        let mut rem = row;
        for d in (0..l - 1).rev() {
            index[d] = rem % grid.shape[d];
            rem /= grid.shape[d];
        }
        let base = row * row_len;
        let mut c = 0;
        while c < row_len {
            let v = grid.values[base + c];
            let mut end = c + 1;
            if compact {
                while end < row_len && grid.values[base + end] == v {
                    end += 1;
                }
            }
            if v > 0.0 {
                let mut lo = Vec::with_capacity(l);
                let mut hi = Vec::with_capacity(l);
                for d in 0..l - 1 {
                    lo.push(grid.origin[d] + index[d] as f64 * grid.cell_widths[d]);
                    hi.push(grid.origin[d] + (index[d] + 1) as f64 * grid.cell_widths[d]);
                }
                lo.push(grid.origin[l - 1] + c as f64 * grid.cell_widths[l - 1]);
                hi.push(grid.origin[l - 1] + end as f64 * grid.cell_widths[l - 1]);
                boxes.push(WeightedBox {
                    region: Hyperrectangle::new(lo, hi)?,
                    weight: v / mass,
                });
            }
            c = end;
        }
    }
    BoxDensity::new(l, boxes)
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
