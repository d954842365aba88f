use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wassfit::fixtures;
use wassfit::geometry::dist_sq;
use wassfit::oracle::{
    discrete_oracle, discretize_source, semidiscrete_1d_exact, solve_discrete_ot_exact,
    solve_discrete_ot_with_cost, WeightedPoint,
};

#[test]
fn refinement_converges_to_one_dimensional_optimum() {
    for inst in [fixtures::fixture_a(), fixtures::fixture_b(), fixtures::fixture_c()] {
        let exact = semidiscrete_1d_exact(&inst).unwrap().p_star;
        let errors: Vec<f64> = [10, 40, 160]
            .iter()
            .map(|&r| (discrete_oracle(&inst, r).unwrap().plan.cost - exact).abs())
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] <= w[0] / 2.0, "{errors:?}");
        }
    }
}

#[test]
fn discrete_cost_within_reported_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..6 {
        let inst = fixtures::random_instance(&mut rng, 1, 2, 3);
        let exact = semidiscrete_1d_exact(&inst).unwrap().p_star;
        let o = discrete_oracle(&inst, 50).unwrap();
        assert!((o.plan.cost - exact).abs() <= o.error_bound);
        assert!(o.plan.marginal_error(inst.samples.demands()) <= 1e-9);
    }
}

#[test]
fn plan_marginals_hold_in_two_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let inst = fixtures::random_instance(&mut rng, 2, 2, 4);
    let o = discrete_oracle(&inst, 60).unwrap();
    let err = o.plan.marginal_error(inst.samples.demands());
    assert!(err <= 1e-9, "{err}");
    let recomputed: f64 = o
        .plan
        .sources
        .iter()
        .zip(&o.plan.flows)
        .flat_map(|(s, row)| {
            row.iter()
                .zip(inst.samples.points())
                .map(move |(f, y)| f * dist_sq(&s.point, y))
        })
        .sum();
    assert!((recomputed - o.plan.cost).abs() <= 1e-12);
}

#[test]
fn non_uniform_demands_balance() {
    let inst = fixtures::fixture_c();
    let o = discrete_oracle(&inst, 100).unwrap();
    assert!(o.plan.marginal_error(&[0.75, 0.25]) <= 1e-9);
    let exact = semidiscrete_1d_exact(&inst).unwrap();
    assert!((o.plan.cost - exact.p_star).abs() <= o.error_bound);
}

#[test]
fn unbalanced_input_rejected() {
    let src = vec![WeightedPoint { point: vec![0.0], mass: 0.6 }];
    assert!(solve_discrete_ot_exact(&src, &[vec![1.0]], &[1.0]).is_err());
}

fn random_sources(rng: &mut ChaCha8Rng, m: usize) -> Vec<WeightedPoint> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter()
        .map(|w| WeightedPoint {
            point: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            mass: w / total,
        })
        .collect()
}

#[test]
fn plan_support_invariant_under_shift_and_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..10 {
        let sources = random_sources(&mut rng, 40);
        let ys: Vec<Vec<f64>> = (0..4)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let b = [0.25; 4];
        let base = solve_discrete_ot_exact(&sources, &ys, &b).unwrap().support();
        let mu = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let shifted = solve_discrete_ot_with_cost(&sources, &ys, &b, |x, y| {
            (0..2).map(|d| (x[d] - y[d] - mu[d]).powi(2)).sum()
        })
        .unwrap()
        .support();
        assert_eq!(base, shifted);
        for sigma in [0.5, 2.0] {
            let scaled = solve_discrete_ot_with_cost(&sources, &ys, &b, |x, y| {
                (0..2).map(|d| (sigma * x[d] - y[d]).powi(2)).sum()
            })
            .unwrap()
            .support();
            assert_eq!(base, scaled);
        }
    }
}

#[test]
fn discretization_masses_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..5 {
        let inst = fixtures::random_small_instance(&mut rng);
        let pts = discretize_source(&inst.density, 17).unwrap();
        let total: f64 = pts.iter().map(|p| p.mass).sum();
        assert!((total - 1.0).abs() <= 1e-9);
    }
}
