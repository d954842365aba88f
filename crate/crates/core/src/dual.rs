//! Semidiscrete dual energy, its gradient, and inexact gradient ascent.
//!
//! For dual weights `g` the energy is
//!
//! `E(g) = sum_j int_{L_j(g)} (|x - y_j|^2 - g_j) d alpha + <g, b>`
//!
//! and `dE/dg_j = b_j - alpha(L_j(g))`. Both are evaluated box by box, either
//! exactly (clipped polytopes, `l <= 3`) or by uniform sampling.

use crate::error::{Error, Result};
use crate::geometry::{
    cell_box_integrals_exact, mc_sample_count, norm_sq, substream_seed, Instance, InstanceStats,
    Moments, SampleSet, EXACT_MAX_DIM,
};
use crate::geometry::montecarlo::{check_g, check_unit_interval, sample_box, BoxTally};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

/// How cell volumes are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeBackend {
    /// Exact when `l <= 3`, Monte-Carlo otherwise.
    #[default]
    Auto,
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
}

impl VolumeBackend {
    /// Resolves `Auto` for a given dimension.
    pub fn resolve(self, dim: usize) -> Result<Self> {
        match self {
            Self::Auto if dim <= EXACT_MAX_DIM => Ok(Self::Exact),
            Self::Auto => Ok(Self::MonteCarlo),
            Self::Exact if dim > EXACT_MAX_DIM => Err(Error::UnsupportedDimension(dim)),
            b => Ok(b),
        }
    }
}

impl FromStr for VolumeBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "exact" => Ok(Self::Exact),
            "mc" => Ok(Self::MonteCarlo),
            other => Err(Error::InvalidInput(format!("unknown backend `{other}`"))),
        }
    }
}

impl fmt::Display for VolumeBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Exact => "exact",
            Self::MonteCarlo => "mc",
        })
    }
}

/// Dual weights `g`, one per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualWeights {
    values: Vec<f64>,
}

impl DualWeights {
    pub const CENTER_TOL: f64 = 1e-9;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_g(&values)?;
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether the weights lie in the zero-sum subspace.
    pub fn is_centered(&self) -> bool {
        self.values.iter().sum::<f64>().abs() <= Self::CENTER_TOL
    }

    /// Projection onto the zero-sum subspace; leaves the energy unchanged
    /// when demands sum to one.
    pub fn centered(&self) -> Self {
        let mut values = self.values.clone();
        center(&mut values);
        Self { values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_{i,j} |g_i - g_j|`.
    pub fn spread(&self) -> f64 {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        if self.values.is_empty() {
            0.0
        } else {
            max - min
        }
    }
}

fn center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target accuracy for `sigma` (and `epsilon * D` for `mu`).
    pub epsilon: f64,
    /// Total failure probability.
    pub eta: f64,
    pub seed: u64,
    /// Stop after this many iterations even if the theoretical budget is larger.
    pub max_iters_override: Option<u64>,
    pub backend: VolumeBackend,
    /// Upper bound on Monte-Carlo samples drawn per box per evaluation.
    pub max_samples_per_box: Option<u64>,
    /// Evaluate the energy at every iterate for the trace.
    pub trace_energy: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            eta: 0.01,
            seed: 0,
            max_iters_override: None,
            backend: VolumeBackend::Auto,
            max_samples_per_box: Some(1 << 20),
            trace_energy: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit_interval("epsilon", self.epsilon)?;
        check_unit_interval("eta", self.eta)?;
        if self.max_iters_override == Some(0) {
            return Err(Error::InvalidInput("max iterations must be positive".into()));
        }
        if self.max_samples_per_box == Some(0) {
            return Err(Error::InvalidInput("sample cap must be positive".into()));
        }
        Ok(())
    }
}

/// `L = 2 n l k / s^2`.
pub fn smoothness_constant(instance: &Instance) -> Result<f64> {
    let stats = instance.stats();
    if !(stats.min_separation > 0.0) {
        return Err(Error::DegenerateSeparation);
    }
    Ok(stats.smoothness)
}

/// Energy budget `eps' = 2 eps (N int|x|^2 - |int x|^2) / (N + |int x| / D)`.
///
/// Panics if the result falls below `eps s^2 / 12`, which cannot happen for
/// a valid instance.
pub fn epsilon_prime(instance: &Instance, epsilon: f64) -> f64 {
    let moments = crate::geometry::box_moments(&instance.density);
    let stats = instance.stats();
    let value = epsilon_prime_from(&moments, &stats, epsilon);
    let floor = epsilon * stats.min_separation.powi(2) / 12.0;
    assert!(
        value >= floor * (1.0 - 1e-12),
        "eps' = {value} below its lower bound {floor}"
    );
    value
}

pub(crate) fn epsilon_prime_from(moments: &Moments, stats: &InstanceStats, epsilon: f64) -> f64 {
    let n = moments.mass;
    2.0 * epsilon * moments.spread() / (n + norm(&moments.first) / stats.max_norm)
}

/// `M = (4 / eps') * 4800 n^2 D^4 L`, rounded up and saturated to `u64`.
pub fn iteration_budget(stats: &InstanceStats, epsilon_prime: f64) -> u64 {
    let n = stats.n as f64;
    let raw = 4.0 / epsilon_prime * 4800.0 * n * n * stats.max_norm.powi(4) * stats.smoothness;
    let rounded = if (raw - raw.round()).abs() <= 1e-9 * raw {
        raw.round()
    } else {
        raw.ceil()
    };
    if rounded >= u64::MAX as f64 {
        u64::MAX
    } else {
        rounded.max(1.0) as u64
    }
}

/// Dual weights for the cost `|x - y - mu|^2` inducing the same cells as `g`
/// under `|x - y|^2`.
pub fn transform_dual_for_shift(g: &[f64], samples: &SampleSet, mu: &[f64]) -> Result<Vec<f64>> {
    crate::geometry::check_dim(samples.len(), g.len())?;
    crate::geometry::check_dim(samples.dim(), mu.len())?;
    let mu_sq = norm_sq(mu);
    Ok(g
        .iter()
        .zip(samples.points())
        .map(|(gj, y)| gj + 2.0 * crate::geometry::dot(mu, y) + mu_sq)
        .collect())
}

/// Dual weights for the cost `|sigma x - y|^2` inducing the same cells as `g`
/// under `|x - y|^2`.
pub fn transform_dual_for_scale(g: &[f64], samples: &SampleSet, sigma: f64) -> Result<Vec<f64>> {
    crate::geometry::check_dim(samples.len(), g.len())?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("scale must be positive, got {sigma}")));
    }
    Ok(g
        .iter()
        .zip(samples.points())
        .map(|(gj, y)| (1.0 - sigma) * norm_sq(y) + sigma * gj)
        .collect())
}

/// Energy and gradient evaluation for a fixed instance.
///
/// Each Monte-Carlo evaluation consumes a fresh call index, so repeated
/// evaluations at the same `g` draw independent samples while the whole
/// sequence stays reproducible from the seed.
pub struct DualEvaluator<'a> {
    instance: &'a Instance,
    backend: VolumeBackend,
    seed: u64,
    calls: u64,
    max_samples_per_box: Option<u64>,
    cap_hit: bool,
    max_norm: f64,
}

impl<'a> DualEvaluator<'a> {
    pub fn new(instance: &'a Instance, backend: VolumeBackend, seed: u64) -> Result<Self> {
        Ok(Self {
            instance,
            backend: backend.resolve(instance.dim())?,
            seed,
            calls: 0,
            max_samples_per_box: None,
            cap_hit: false,
            max_norm: instance.stats().max_norm,
        })
    }

    pub fn with_sample_cap(mut self, cap: Option<u64>) -> Self {
        self.max_samples_per_box = cap;
        self
    }

    pub fn backend(&self) -> VolumeBackend {
        self.backend
    }

    /// Whether any Monte-Carlo evaluation was truncated by the sample cap.
    pub fn sample_cap_hit(&self) -> bool {
        self.cap_hit
    }

    fn check(&self, g: &[f64]) -> Result<()> {
        crate::geometry::check_dim(self.instance.n(), g.len())?;
        check_g(g)
    }

    fn tallies(&mut self, g: &[f64], wanted: f64) -> Vec<BoxTally> {
        let mut m = wanted.max(1.0);
        if let Some(cap) = self.max_samples_per_box {
            if m > cap as f64 {
                m = cap as f64;
                self.cap_hit = true;
            }
        }
        let m = m as u64;
        let call = self.calls;
        self.calls += 1;
        let (seed, samples) = (self.seed, &self.instance.samples);
        self.instance
            .density
            .boxes()
            .par_iter()
            .enumerate()
            .map(|(i, b)| sample_box(samples, g, &b.region, m, substream_seed(seed, call, i as u64)))
            .collect()
    }

    /// `alpha(L_j(g) ∩ H_l)` for every box `l` (outer) and cell `j` (inner).
    ///
    /// With Monte-Carlo, `tol` bounds each entry's error relative to the
    /// box mass and `eta` is the joint failure probability.
    pub fn cell_masses(&mut self, g: &[f64], tol: f64, eta: f64) -> Result<Vec<Vec<f64>>> {
        self.check(g)?;
        let boxes = self.instance.density.boxes();
        match self.backend {
            VolumeBackend::MonteCarlo => {
                check_unit_interval("tolerance", tol)?;
                check_unit_interval("failure probability", eta)?;
                let wanted = mc_sample_count(self.instance.n(), tol, eta / boxes.len() as f64);
                let tallies = self.tallies(g, wanted);
                Ok(tallies
                    .iter()
                    .zip(boxes)
                    .map(|(t, b)| {
                        let mass = b.weight * b.region.volume();
                        t.counts
                            .iter()
                            .map(|&c| mass * c as f64 / t.samples as f64)
                            .collect()
                    })
                    .collect())
            }
            _ => boxes
                .iter()
                .map(|b| {
                    (0..self.instance.n())
                        .map(|j| {
                            cell_box_integrals_exact(&self.instance.samples, g, j, &b.region)
                                .map(|c| b.weight * c.volume)
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// `b_j - alpha(L_j(g))` before projection.
    ///
    /// With Monte-Carlo the Euclidean error is at most `eps_bar` with
    /// probability `1 - eta`.
    pub fn gradient_raw(&mut self, g: &[f64], eps_bar: f64, eta: f64) -> Result<Vec<f64>> {
        let n = self.instance.n();
        let tol = (eps_bar / (n as f64).sqrt()).min(0.5);
        let masses = self.cell_masses(g, tol, eta)?;
        let mut grad = self.instance.samples.demands().to_vec();
        for row in &masses {
            for (gj, m) in grad.iter_mut().zip(row) {
                *gj -= m;
            }
        }
        Ok(grad)
    }

    /// Gradient projected onto the zero-sum subspace.
    pub fn gradient(&mut self, g: &[f64], eps_bar: f64, eta: f64) -> Result<Vec<f64>> {
        let mut grad = self.gradient_raw(g, eps_bar, eta)?;
        center(&mut grad);
        Ok(grad)
    }

    /// `E(g)`; with Monte-Carlo the additive error is at most `accuracy`
    /// with probability `1 - eta`.
    pub fn energy(&mut self, g: &[f64], accuracy: f64, eta: f64) -> Result<f64> {
        self.check(g)?;
        let inst = self.instance;
        let boxes = inst.density.boxes();
        let linear: f64 = g.iter().zip(inst.samples.demands()).map(|(a, b)| a * b).sum();
        let integral = match self.backend {
            VolumeBackend::MonteCarlo => {
                if !(accuracy > 0.0) {
                    return Err(Error::InvalidInput("accuracy must be positive".into()));
                }
                check_unit_interval("failure probability", eta)?;
                let g_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let range = 4.0 * self.max_norm.powi(2) + 2.0 * g_inf;
                let wanted = (range * range * (2.0 * boxes.len() as f64 / eta).ln()
                    / (2.0 * accuracy * accuracy))
                    .ceil();
                let tallies = self.tallies(g, wanted);
                tallies
                    .iter()
                    .zip(boxes)
                    .map(|(t, b)| {
                        let sum: f64 = t
                            .sq_dist
                            .iter()
                            .zip(&t.counts)
                            .zip(g)
                            .map(|((s, &c), gj)| s - c as f64 * gj)
                            .sum();
                        b.weight * b.region.volume() * sum / t.samples as f64
                    })
                    .sum::<f64>()
            }
            _ => {
                let mut total = 0.0;
                for b in boxes {
                    for (j, gj) in g.iter().enumerate() {
                        let c = cell_box_integrals_exact(&inst.samples, g, j, &b.region)?;
                        total += b.weight * (c.sq_dist - gj * c.volume);
                    }
                }
                total
            }
        };
        let e = integral + linear;
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::NonFinite("dual energy".into()))
        }
    }
}

/// Exact energy (`l <= 3`).
pub fn energy_exact(instance: &Instance, g: &[f64]) -> Result<f64> {
    DualEvaluator::new(instance, VolumeBackend::Exact, 0)?.energy(g, 1.0, 0.5)
}

/// Exact projected gradient (`l <= 3`).
pub fn gradient_exact(instance: &Instance, g: &[f64]) -> Result<Vec<f64>> {
    DualEvaluator::new(instance, VolumeBackend::Exact, 0)?.gradient(g, 0.5, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Noisy gradient norm fell below the threshold.
    GradientThreshold,
    /// Reached the theoretical iteration budget.
    IterationBudget,
    /// Reached a user-supplied cap below the theoretical budget.
    IterationOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub t: u64,
    pub grad_norm: f64,
    pub energy: Option<f64>,
    pub step_size: f64,
    pub wallclock_ms: f64,
    /// `|g_t|_inf`.
    pub max_abs_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterates: Vec<IterateRecord>,
    /// Theoretical iteration budget `M`.
    pub budget: u64,
    /// Step at which the solver stopped.
    pub stopped_at: u64,
    pub stop_reason: StopReason,
    pub epsilon_prime: f64,
    /// Gradient noise budget used by the optimizer.
    pub noise_budget: f64,
    pub grad_threshold: f64,
    pub smoothness: f64,
    pub backend: VolumeBackend,
    pub sample_cap_hit: bool,
    pub uniform_demands: bool,
    /// `20 n D^2`.
    pub iterate_bound: f64,
    /// `16 n D^2`.
    pub spread_bound: f64,
    pub iterate_bound_violations: usize,
    pub final_spread: f64,
    pub warnings: Vec<String>,
}

impl SolverTrace {
    /// True when the accuracy guarantee applies to this run.
    pub fn guarantee_holds(&self) -> bool {
        self.stop_reason != StopReason::IterationOverride
            && !self.sample_cap_hit
            && self.uniform_demands
    }

    pub fn spread_bound_violated(&self) -> bool {
        self.final_spread > self.spread_bound
    }

    /// CSV with columns `t,grad_norm,energy_estimate,wallclock_ms`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,grad_norm,energy_estimate,wallclock_ms")?;
        for r in &self.iterates {
            let e = r.energy.map(|e| e.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.t, r.grad_norm, e, r.wallclock_ms)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub weights: DualWeights,
    /// Estimate of `E(g)` at the returned weights.
    pub energy: f64,
    pub trace: SolverTrace,
}

/// Inexact gradient ascent on `E` with step `1/L` from `g = 0`.
///
/// Stops at the first iterate whose noisy gradient norm is at most
/// `eps' / (45 n D^2)`, or after `M` iterations (or the override, if smaller).
pub fn solve_dual(instance: &Instance, config: &SolverConfig) -> Result<DualSolution> {
    config.validate()?;
    let stats = instance.stats();
    let lip = smoothness_constant(instance)?;
    let n = instance.n();
    let nd2 = n as f64 * stats.max_norm.powi(2);
    let eps_p = epsilon_prime(instance, config.epsilon);
    let budget = iteration_budget(&stats, eps_p);
    let cap = config.max_iters_override.map_or(budget, |o| o.min(budget));

    let mut eval = DualEvaluator::new(instance, config.backend, config.seed)?
        .with_sample_cap(config.max_samples_per_box);
    let backend = eval.backend();
    let exact = backend == VolumeBackend::Exact;
    // Monte-Carlo splits eps' between the optimizer and the final energy.
    let opt_budget = if exact { eps_p } else { 0.75 * eps_p };
    let energy_acc = 0.25 * eps_p;
    let noise = opt_budget / (360.0 * nd2);
    let threshold = opt_budget / (45.0 * nd2);
    // Half of eta is shared by the gradient calls, half by the final energy.
    let eta_grad = (0.5 * config.eta / budget as f64).max(f64::MIN_POSITIVE);
    let eta_energy = 0.5 * config.eta;

    let uniform = instance.samples.is_uniform();
    let mut warnings = Vec::new();
    if !uniform {
        warnings.push("non-uniform demands: iterate bounds and guarantee not asserted".into());
    }
    let iterate_bound = 20.0 * nd2;
    let spread_bound = 16.0 * nd2;

    let start = Instant::now();
    let mut g = vec![0.0; n];
    let mut iterates = Vec::new();
    let mut violations = 0usize;
    let mut t: u64 = 1;
    let stop_reason = loop {
        let grad = eval.gradient(&g, noise, eta_grad)?;
        let gn = norm(&grad);
        let energy = if config.trace_energy {
            Some(eval.energy(&g, energy_acc, eta_grad)?)
        } else {
            None
        };
        let max_abs = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_abs > iterate_bound {
            violations += 1;
        }
        iterates.push(IterateRecord {
            t,
            grad_norm: gn,
            energy,
            step_size: 1.0 / lip,
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
            max_abs_weight: max_abs,
        });
        if gn <= threshold {
            break StopReason::GradientThreshold;
        }
        if t >= cap {
            break if cap < budget {
                StopReason::IterationOverride
            } else {
                StopReason::IterationBudget
            };
        }
        for (gj, dj) in g.iter_mut().zip(&grad) {
            *gj += dj / lip;
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dual iterate at step {}", t + 1)));
        }
        t += 1;
    };

    let energy = eval.energy(&g, energy_acc, eta_energy)?;
    let weights = DualWeights::new(g)?;
    let trace = SolverTrace {
        iterates,
        budget,
        stopped_at: t,
        stop_reason,
        epsilon_prime: eps_p,
        noise_budget: noise,
        grad_threshold: threshold,
        smoothness: lip,
        backend,
        sample_cap_hit: eval.sample_cap_hit(),
        uniform_demands: uniform,
        iterate_bound,
        spread_bound,
        iterate_bound_violations: violations,
        final_spread: weights.centered().spread(),
        warnings,
    };
    Ok(DualSolution {
        weights,
        energy,
        trace,
    })
}
