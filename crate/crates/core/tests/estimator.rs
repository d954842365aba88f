use approx::assert_relative_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wassfit::estimator::{closed_form_from_plan, location_error, primal_cost_identity};
use wassfit::geometry::{box_moments, BoxDensity, Hyperrectangle, Instance, SampleSet, WeightedBox};
use wassfit::oracle::{discrete_oracle, semidiscrete_1d_exact};
use wassfit::{estimate_parameters, fixtures, SolverConfig};

fn config(epsilon: f64) -> SolverConfig {
    SolverConfig {
        epsilon,
        eta: 0.01,
        seed: 1,
        ..SolverConfig::default()
    }
}

#[test]
fn recovers_fixture_parameters() {
    let cases = [
        (fixtures::fixture_a(), 1.5, vec![0.0]),
        (fixtures::fixture_b(), 0.0, vec![-0.5]),
        (fixtures::fixture_d(), 0.75, vec![0.0, 0.0]),
    ];
    for (inst, sigma, mu) in cases {
        let r = estimate_parameters(&inst, &config(0.05)).unwrap();
        let d = inst.stats().max_norm;
        assert!((r.sigma_hat - sigma).abs() <= 0.05);
        assert!(location_error(&r.mu_hat, &mu) <= 0.05 * d);
        assert!(r.guarantee_holds);
    }
}

/// Oracle `(sigma*, mu*)` from an exact or discretized cross-term.
fn oracle_parameters(inst: &Instance) -> (f64, Vec<f64>) {
    let cross = if inst.dim() == 1 {
        semidiscrete_1d_exact(inst).unwrap().cross_term
    } else {
        let o = discrete_oracle(inst, 120).unwrap();
        o.plan.cross_term(inst.samples.points())
    };
    closed_form_from_plan(
        &box_moments(&inst.density),
        &inst.samples.weighted_mean(),
        cross,
    )
    .unwrap()
}

#[test]
fn agrees_with_oracle_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let eps = 0.05;
    for _ in 0..8 {
        let inst = fixtures::random_small_instance(&mut rng);
        let r = estimate_parameters(&inst, &config(eps)).unwrap();
        let (sigma, mu) = oracle_parameters(&inst);
        let d = inst.stats().max_norm;
        // The discretized cross-term carries its own O(cell) error in 2D.
        let slack = if inst.dim() == 1 { 0.0 } else { 0.01 };
        assert!((r.sigma_hat - sigma).abs() <= eps + slack, "{} vs {sigma}", r.sigma_hat);
        assert!(location_error(&r.mu_hat, &mu) <= eps * d + slack);
    }
}

#[test]
fn energy_round_trips_through_rho() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..5 {
        let inst = fixtures::random_small_instance(&mut rng);
        let r = estimate_parameters(&inst, &config(0.1)).unwrap();
        let m = box_moments(&inst.density);
        let back = primal_cost_identity(&m, inst.samples.weighted_sq_norm(), r.rho);
        assert!((back - r.dual_energy).abs() <= 1e-12);
    }
}

fn translate(inst: &Instance, c: &[f64]) -> Instance {
    let boxes = inst
        .density
        .boxes()
        .iter()
        .map(|b| WeightedBox {
            region: Hyperrectangle::new(
                b.region.lo().iter().zip(c).map(|(a, s)| a + s).collect(),
                b.region.hi().iter().zip(c).map(|(a, s)| a + s).collect(),
            )
            .unwrap(),
            weight: b.weight,
        })
        .collect();
    let points = inst
        .samples
        .points()
        .iter()
        .map(|p| p.iter().zip(c).map(|(a, s)| a + s).collect())
        .collect();
    Instance::new(
        BoxDensity::new(inst.dim(), boxes).unwrap(),
        SampleSet::new(points, inst.samples.demands().to_vec()).unwrap(),
    )
    .unwrap()
}

#[test]
fn scale_estimate_is_translation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let eps = 0.05;
    for _ in 0..5 {
        let inst = fixtures::random_small_instance(&mut rng);
        let c: Vec<f64> = (0..inst.dim()).map(|d| 0.7 - 0.4 * d as f64).collect();
        let moved = translate(&inst, &c);
        let a = estimate_parameters(&inst, &config(eps)).unwrap();
        let b = estimate_parameters(&moved, &config(eps)).unwrap();
        assert!((a.sigma_hat - b.sigma_hat).abs() <= 2.0 * eps);
        // mu(x + c, y + c) = mu(x, y) + (sigma - 1) c
        let (da, db) = (inst.stats().max_norm, moved.stats().max_norm);
        for d in 0..inst.dim() {
            let expected = a.mu_hat[d] + (a.sigma_hat - 1.0) * c[d];
            let tol = eps * (da + db) + 2.0 * eps * c[d].abs();
            assert!((b.mu_hat[d] - expected).abs() <= tol);
        }
    }
}

#[test]
fn fixture_b_matches_exact_values() {
    let r = estimate_parameters(&fixtures::fixture_b(), &config(0.05)).unwrap();
    assert_relative_eq!(r.dual_energy, 1.0 / 12.0, epsilon = 1e-12);
    assert_relative_eq!(r.rho, 0.25, epsilon = 1e-12);
}
