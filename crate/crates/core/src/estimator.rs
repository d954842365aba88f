//! Scale and location estimates from the optimal dual energy.
//!
//! With `pi` an optimal plan at cost `|x - y|^2`, the minimizers of the
//! fitted transport cost are
//!
//! `sigma = (N rho - (sum_j b_j y_j) . int x) / (N int|x|^2 - |int x|^2)`
//!
//! `mu = (sigma int x - sum_j b_j y_j) / N`
//!
//! where `rho = int sum_j x . y_j d pi`. The plan never has to be formed:
//! `rho` follows from the energy via the primal cost identity.

use crate::dual::{solve_dual, DualWeights, SolverConfig, SolverTrace};
use crate::error::{Error, Result};
use crate::geometry::{box_moments, dot, norm_sq, Instance, Moments};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub sigma_hat: f64,
    pub mu_hat: Vec<f64>,
    /// Estimate of the cross-term `int sum_j x . y_j d pi`.
    pub rho: f64,
    pub dual_energy: f64,
    /// `N int|x|^2 - |int x|^2`.
    pub denominator: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub guarantee_holds: bool,
    pub weights: DualWeights,
    pub trace: SolverTrace,
    pub warnings: Vec<String>,
}

impl EstimationResult {
    pub fn iterations(&self) -> u64 {
        self.trace.stopped_at
    }
}

/// `p* = int|x|^2 + sum_j b_j |y_j|^2 - 2 cross`.
pub fn primal_cost_identity(moments: &Moments, sum_b_norm: f64, cross: f64) -> f64 {
    moments.second + sum_b_norm - 2.0 * cross
}

/// Inverse of [`primal_cost_identity`]: `rho = (int|x|^2 + sum_j b_j |y_j|^2 - E) / 2`.
pub fn rho_from_energy(moments: &Moments, sum_b_norm: f64, energy: f64) -> f64 {
    0.5 * (moments.second + sum_b_norm - energy)
}

/// Closed-form `(sigma, mu)` from the moments, `sum_j b_j y_j` and the cross-term.
pub fn closed_form_from_plan(
    moments: &Moments,
    sum_by: &[f64],
    cross: f64,
) -> Result<(f64, Vec<f64>)> {
    crate::geometry::check_dim(moments.first.len(), sum_by.len())?;
    let denom = moments.spread();
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator(denom));
    }
    let n = moments.mass;
    let sigma = (n * cross - dot(sum_by, &moments.first)) / denom;
    let mu = moments
        .first
        .iter()
        .zip(sum_by)
        .map(|(f, s)| (sigma * f - s) / n)
        .collect();
    Ok((sigma, mu))
}

/// Solves the dual at cost `|x - y|^2` and applies the closed form.
pub fn estimate_parameters(instance: &Instance, config: &SolverConfig) -> Result<EstimationResult> {
    let moments = box_moments(&instance.density);
    let sum_by = instance.samples.weighted_mean();
    let sum_b_norm = instance.samples.weighted_sq_norm();
    let denominator = moments.spread();
    if !(denominator > 0.0) {
        return Err(Error::DegenerateDenominator(denominator));
    }
    let sol = solve_dual(instance, config)?;
    let rho = rho_from_energy(&moments, sum_b_norm, sol.energy);
    let (sigma_hat, mu_hat) = closed_form_from_plan(&moments, &sum_by, rho)?;
    if !sigma_hat.is_finite() || mu_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("estimated parameters".into()));
    }
    let mut warnings = sol.trace.warnings.clone();
    if sigma_hat <= 0.0 {
        warnings.push(format!("degenerate scale estimate: sigma_hat = {sigma_hat}"));
    }
    Ok(EstimationResult {
        sigma_hat,
        mu_hat,
        rho,
        dual_energy: sol.energy,
        denominator,
        epsilon: config.epsilon,
        eta: config.eta,
        guarantee_holds: sol.trace.guarantee_holds(),
        weights: sol.weights,
        trace: sol.trace,
        warnings,
    })
}

/// Euclidean distance between two location vectors.
pub fn location_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let diff: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
    norm_sq(&diff).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    fn parts(inst: &Instance) -> (Moments, Vec<f64>, f64) {
        (
            box_moments(&inst.density),
            inst.samples.weighted_mean(),
            inst.samples.weighted_sq_norm(),
        )
    }

    #[test]
    fn closed_form_examples() {
        let (m, by, _) = parts(&fixtures::fixture_a());
        let (s, mu) = closed_form_from_plan(&m, &by, 0.5).unwrap();
        assert_relative_eq!(s, 1.5, epsilon = 1e-12);
        assert_relative_eq!(mu[0], 0.0, epsilon = 1e-12);
        let (m, by, _) = parts(&fixtures::fixture_d());
        let (s, mu) = closed_form_from_plan(&m, &by, 0.5).unwrap();
        assert_relative_eq!(s, 0.75, epsilon = 1e-12);
        assert!(mu.iter().all(|v| v.abs() < 1e-12));
        let (s, _) = closed_form_from_plan(&m, &by, 0.0).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn primal_identity_examples() {
        let (m, _, bn) = parts(&fixtures::fixture_a());
        assert_relative_eq!(primal_cost_identity(&m, bn, 0.5), 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(primal_cost_identity(&m, bn, (m.second + bn) / 2.0), 0.0);
        let (m, _, bn) = parts(&fixtures::fixture_b());
        assert_relative_eq!(primal_cost_identity(&m, bn, 0.25), 1.0 / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn rho_round_trip() {
        let (m, _, bn) = parts(&fixtures::fixture_d());
        for e in [0.0, 0.3, 1.7, -2.0] {
            let rho = rho_from_energy(&m, bn, e);
            assert!((primal_cost_identity(&m, bn, rho) - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_denominator_rejected() {
        let m = Moments {
            mass: 1.0,
            first: vec![1.0],
            second: 1.0,
        };
        assert!(matches!(
            closed_form_from_plan(&m, &[0.0], 0.0),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn single_sample_collapses_scale() {
        let r = estimate_parameters(&fixtures::fixture_b(), &SolverConfig::default()).unwrap();
        assert!(r.sigma_hat.abs() < 0.05);
        assert!((r.mu_hat[0] + 0.5).abs() < 0.05);
        assert!(r.warnings.iter().any(|w| w.contains("degenerate")) || r.sigma_hat > 0.0);
    }
}
