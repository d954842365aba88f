use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wassfit::dual::{
    energy_exact, epsilon_prime, gradient_exact, smoothness_constant, solve_dual,
    transform_dual_for_scale, transform_dual_for_shift, DualEvaluator, SolverConfig,
    VolumeBackend,
};
use wassfit::fixtures;
use wassfit::geometry::{classify_point, classify_point_affine, Instance};
use wassfit::oracle::finite_difference_gradient;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn random_g(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

#[test]
fn finite_differences_match_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut instances = vec![fixtures::fixture_a(), fixtures::fixture_c(), fixtures::fixture_d()];
    for _ in 0..4 {
        instances.push(fixtures::random_small_instance(&mut rng));
    }
    for inst in &instances {
        let mut checked = 0;
        while checked < 20 {
            let g = random_g(&mut rng, inst.n(), 0.5);
            let an = gradient_exact(inst, &g).unwrap();
            // Skip points where the gradient vanishes and relative error is meaningless.
            if norm(&an) < 1e-3 {
                continue;
            }
            let fd = finite_difference_gradient(inst, &g, 1e-5).unwrap();
            let rel = norm(&diff(&fd, &an)) / norm(&an);
            assert!(rel <= 1e-3, "relative error {rel} at {g:?}");
            checked += 1;
        }
    }
}

#[test]
fn gradient_satisfies_smoothness_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let inst = fixtures::random_small_instance(&mut rng);
        let lip = smoothness_constant(&inst).unwrap();
        for _ in 0..100 {
            let g = random_g(&mut rng, inst.n(), 1.0);
            let h = random_g(&mut rng, inst.n(), 1.0);
            let dg = diff(&gradient_exact(&inst, &g).unwrap(), &gradient_exact(&inst, &h).unwrap());
            assert!(norm(&dg) <= lip * norm(&diff(&g, &h)) * (1.0 + 1e-9));
        }
    }
}

#[test]
fn energy_is_concave_along_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let inst = fixtures::random_instance(&mut rng, 2, 2, 4);
    for _ in 0..50 {
        let g = random_g(&mut rng, 4, 1.0);
        let h = random_g(&mut rng, 4, 1.0);
        let mid: Vec<f64> = g.iter().zip(&h).map(|(a, b)| 0.5 * (a + b)).collect();
        let e = |v: &[f64]| energy_exact(&inst, v).unwrap();
        assert!(e(&mid) >= 0.5 * (e(&g) + e(&h)) - 1e-12);
    }
}

#[test]
fn gradient_step_ascends_by_smoothness_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let inst = fixtures::random_small_instance(&mut rng);
        let lip = smoothness_constant(&inst).unwrap();
        let g = random_g(&mut rng, inst.n(), 0.5);
        let grad = gradient_exact(&inst, &g).unwrap();
        let next: Vec<f64> = g.iter().zip(&grad).map(|(a, d)| a + d / lip).collect();
        let gain = energy_exact(&inst, &next).unwrap() - energy_exact(&inst, &g).unwrap();
        assert!(gain >= norm(&grad).powi(2) / (3.0 * lip) - 1e-12);
    }
}

#[test]
fn solver_iterates_stay_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = SolverConfig::default();
    for _ in 0..10 {
        let inst = fixtures::random_small_instance(&mut rng);
        let sol = solve_dual(&inst, &cfg).unwrap();
        assert_eq!(sol.trace.iterate_bound_violations, 0);
        assert!(!sol.trace.spread_bound_violated());
        assert!(sol.trace.stopped_at <= sol.trace.budget);
        assert!(sol.weights.is_centered());
        assert!(sol.trace.guarantee_holds());
    }
}

#[test]
fn solver_reaches_one_dimensional_optimum() {
    let inst = fixtures::fixture_c();
    let cfg = SolverConfig::default();
    let sol = solve_dual(&inst, &cfg).unwrap();
    let exact = wassfit::oracle::semidiscrete_1d_exact(&inst).unwrap();
    assert!((sol.energy - exact.p_star).abs() <= sol.trace.epsilon_prime);
    // Boundary between the two cells sits at the breakpoint.
    let g = sol.weights.as_slice();
    let boundary = 0.5 + (g[0] - g[1]) / 2.0;
    assert!((boundary - 0.75).abs() < 1e-2);
}

#[test]
fn monte_carlo_gradient_within_noise_budget() {
    let inst = fixtures::fixture_d();
    let g = [0.3, -0.3];
    let exact = gradient_exact(&inst, &g).unwrap();
    let mut eval = DualEvaluator::new(&inst, VolumeBackend::MonteCarlo, 3).unwrap();
    let (eps_bar, eta) = (0.01, 0.05);
    let mut failures = 0;
    for _ in 0..40 {
        let raw = eval.gradient_raw(&g, eps_bar, eta).unwrap();
        assert!(raw.iter().sum::<f64>().abs() <= inst.n() as f64 * eps_bar);
        let mut centered = raw.clone();
        let mean = centered.iter().sum::<f64>() / centered.len() as f64;
        centered.iter_mut().for_each(|v| *v -= mean);
        if norm(&diff(&centered, &exact)) > eps_bar {
            failures += 1;
        }
    }
    assert!(failures as f64 / 40.0 <= eta + 0.05);
}

#[test]
fn monte_carlo_energy_within_accuracy() {
    let inst = fixtures::fixture_a();
    let g = [0.5, -0.5];
    let exact = energy_exact(&inst, &g).unwrap();
    let mut eval = DualEvaluator::new(&inst, VolumeBackend::MonteCarlo, 4).unwrap();
    for _ in 0..10 {
        let e = eval.energy(&g, 0.01, 0.05).unwrap();
        assert!((e - exact).abs() <= 0.01);
    }
}

#[test]
fn monte_carlo_solver_is_reproducible() {
    let inst = fixtures::fixture_c();
    let cfg = SolverConfig {
        backend: VolumeBackend::MonteCarlo,
        max_iters_override: Some(20),
        max_samples_per_box: Some(20_000),
        seed: 77,
        ..SolverConfig::default()
    };
    let a = solve_dual(&inst, &cfg).unwrap();
    let b = solve_dual(&inst, &cfg).unwrap();
    assert_eq!(a.weights, b.weights);
    assert_eq!(a.energy, b.energy);
    assert!(a.trace.sample_cap_hit);
    assert!(!a.trace.guarantee_holds());
}

fn lipschitz_ratio(inst: &Instance, g: &[f64], h: &[f64]) -> f64 {
    let dg = diff(&gradient_exact(inst, g).unwrap(), &gradient_exact(inst, h).unwrap());
    norm(&dg) / norm(&diff(g, h))
}

#[test]
fn necessity_families_grow_linearly() {
    for family in [fixtures::necessity_close_samples, fixtures::necessity_thin_box] {
        for m in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let case = family(m);
            let r = lipschitz_ratio(&case.instance, &case.g, &case.g_prime);
            assert!((r - case.predicted_ratio).abs() <= 1e-9 * case.predicted_ratio);
        }
    }
}

#[test]
fn epsilon_prime_lower_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let inst = fixtures::random_small_instance(&mut rng);
        let eps = rng.gen_range(0.01..0.5);
        let s = inst.stats().min_separation;
        assert!(epsilon_prime(&inst, eps) >= eps * s * s / 12.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shift_transform_preserves_cells(
        seed in any::<u64>(),
        mu in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = fixtures::random_instance(&mut rng, 2, 1, 3);
        let g = random_g(&mut rng, 3, 0.5);
        let gs = transform_dual_for_shift(&g, &inst.samples, &mu).unwrap();
        for _ in 0..200 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let (j, gap) = classify_point_affine(&inst.samples, &gs, &x, &mu, 1.0);
            if gap > 1e-9 {
                prop_assert_eq!(j, classify_point(&inst.samples, &g, &x));
            }
        }
    }

    #[test]
    fn scale_transform_preserves_cells(
        seed in any::<u64>(),
        sigma in 0.1f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = fixtures::random_instance(&mut rng, 2, 1, 3);
        let g = random_g(&mut rng, 3, 0.5);
        let gs = transform_dual_for_scale(&g, &inst.samples, sigma).unwrap();
        // Centering changes every score by the same constant.
        let mean = gs.iter().sum::<f64>() / 3.0;
        let gc: Vec<f64> = gs.iter().map(|v| v - mean).collect();
        for _ in 0..200 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let (j, gap) = classify_point_affine(&inst.samples, &gc, &x, &[0.0, 0.0], sigma);
            if gap > 1e-9 {
                prop_assert_eq!(j, classify_point(&inst.samples, &g, &x));
            }
        }
    }

    #[test]
    fn energy_invariant_under_uniform_shift(
        seed in any::<u64>(),
        c in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = fixtures::random_small_instance(&mut rng);
        let g = random_g(&mut rng, inst.n(), 0.5);
        let shifted: Vec<f64> = g.iter().map(|v| v + c).collect();
        let (a, b) = (energy_exact(&inst, &g).unwrap(), energy_exact(&inst, &shifted).unwrap());
        prop_assert!((a - b).abs() <= 1e-9);
    }
}
