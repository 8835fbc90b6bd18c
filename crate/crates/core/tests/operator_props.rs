use proptest::prelude::*;
use stochgame_core::game::random_game;
use stochgame_core::{Evaluation, GameOperator, GameSpec, LipschitzOperator, ShapleyOperator, ValueFunction};

const SLACK: f64 = 1e-8;

fn game() -> impl Strategy<Value = GameSpec> {
    (any::<u64>(), 1usize..=4, 1usize..=3, 1usize..=3).prop_map(|(s, k, i, j)| random_game(s, k, i, j).unwrap())
}

fn vector(dim: usize) -> impl Strategy<Value = ValueFunction> {
    prop::collection::vec(-5.0f64..5.0, dim).prop_map(ValueFunction::exact)
}

fn theta(max_len: usize) -> impl Strategy<Value = Evaluation> {
    prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_filter_map("needs mass", |raw| {
        let s: f64 = raw.iter().sum();
        (s > 1e-3).then(|| Evaluation::from_parts(raw.iter().map(|w| w / s).collect(), None).unwrap())
    })
}

fn game_and_two_vectors() -> impl Strategy<Value = (GameSpec, ValueFunction, ValueFunction)> {
    game().prop_flat_map(|g| {
        let k = g.n_states();
        (Just(g), vector(k), vector(k))
    })
}

fn head_sum(theta: &Evaluation, n: usize) -> f64 {
    (1..=n).map(|m| theta.weight(m)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nonexpansive_in_f((g, f, h) in game_and_two_vectors(), lambda in 0.0f64..=1.0) {
        let op = GameOperator::new(&g);
        let a = op.apply(lambda, &f).unwrap();
        let b = op.apply(lambda, &h).unwrap();
        let bound = (1.0 - lambda) * f.sup_distance(&h) + a.error_bound + b.error_bound;
        prop_assert!(a.sup_distance(&b) <= bound + SLACK);
    }

    #[test]
    fn bounded_growth((g, f, _h) in game_and_two_vectors(), lambda in 0.0f64..=1.0) {
        let op = GameOperator::new(&g);
        let a = op.apply(lambda, &f).unwrap();
        let bound = op.payoff_bound() * lambda + (1.0 - lambda) * f.sup_norm() + a.error_bound;
        prop_assert!(a.sup_norm() <= bound + SLACK);
    }

    #[test]
    fn scaled_comparison(
        (g, f, h) in game_and_two_vectors(),
        lambda in 0.0f64..=1.0,
        lambda2 in 0.0f64..=1.0,
        alpha in 0.0f64..=1.0,
        beta in 0.0f64..=1.0,
    ) {
        let op = GameOperator::new(&g);
        let a = op.apply(lambda, &f).unwrap();
        let b = op.apply(lambda2, &h).unwrap();
        let lhs = a.values.iter().zip(&b.values).map(|(x, y)| (alpha * x - beta * y).abs()).fold(0.0, f64::max);
        let rhs_f = f.values.iter().zip(&h.values)
            .map(|(x, y)| (alpha * (1.0 - lambda) * x - beta * (1.0 - lambda2) * y).abs())
            .fold(0.0, f64::max);
        let rhs = op.payoff_bound() * (alpha * lambda - beta * lambda2).abs() + rhs_f;
        prop_assert!(lhs <= rhs + alpha * a.error_bound + beta * b.error_bound + SLACK);
    }

    #[test]
    fn iterate_contracts((g, f, h) in game_and_two_vectors(), th in theta(30), n in 1usize..=30) {
        let op = GameOperator::new(&g);
        let a = op.iterate(&th, n, &f).unwrap();
        let b = op.iterate(&th, n, &h).unwrap();
        let bound = th.tail_mass(n + 1) * f.sup_distance(&h);
        prop_assert!(a.sup_distance(&b) <= bound + a.error_bound + b.error_bound + SLACK);
    }

    #[test]
    fn iterate_is_bounded((g, f, _h) in game_and_two_vectors(), th in theta(30), n in 1usize..=30) {
        let op = GameOperator::new(&g);
        let a = op.iterate(&th, n, &f).unwrap();
        let bound = op.payoff_bound() * head_sum(&th, n) + th.tail_mass(n + 1) * f.sup_norm();
        prop_assert!(a.sup_norm() <= bound + a.error_bound + SLACK);
    }

    #[test]
    fn iterate_depends_on_weights(
        (g, f, _h) in game_and_two_vectors(),
        th in theta(30),
        th2 in theta(30),
        n in 1usize..=30,
    ) {
        let op = GameOperator::new(&g);
        let a = op.iterate(&th, n, &f).unwrap();
        let b = op.iterate(&th2, n, &f).unwrap();
        let head: f64 = (1..=n).map(|m| (th.weight(m) - th2.weight(m)).abs()).sum();
        let rest = (th.tail_mass(n + 1) - th2.tail_mass(n + 1)).abs();
        let bound = op.payoff_bound() * head + rest * f.sup_norm();
        prop_assert!(a.sup_distance(&b) <= bound + a.error_bound + b.error_bound + SLACK);
    }

    #[test]
    fn adapter_obeys_the_same_bounds(f in vector(3), h in vector(3), lambda in 1e-6f64..=1.0) {
        // every coordinate is 1-Lipschitz in the sup norm and |phi(0)| = 1
        let phi = |x: &[f64]| vec![x[0].max(x[1]) + 1.0, 0.5 * (x[1] + x[2]), -x[2].min(x[0]) - 0.5];
        let op = LipschitzOperator::from_nonexpansive(3, phi, 1.0).unwrap();
        let a = op.apply(lambda, &f).unwrap();
        let b = op.apply(lambda, &h).unwrap();
        prop_assert!(a.sup_distance(&b) <= (1.0 - lambda) * f.sup_distance(&h) + SLACK);
        prop_assert!(a.sup_norm() <= lambda + (1.0 - lambda) * f.sup_norm() + SLACK);
    }
}

#[test]
fn zero_discount_drops_stage_payoff() {
    let g = random_game(5, 3, 2, 2).unwrap();
    let op = GameOperator::new(&g);
    let f = ValueFunction::exact(vec![0.3, -0.2, 0.9]);
    let out = op.apply(0.0, &f).unwrap();
    // with lambda = 0 the stage payoff drops out entirely
    assert!(out.sup_norm() <= f.sup_norm() + 1e-12);
}
