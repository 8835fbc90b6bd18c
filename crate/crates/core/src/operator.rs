//! One-stage operators `Psi(lambda, f)` and their iterates along an
//! evaluation.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evaluation::Evaluation;
use crate::game::{GameSpec, ValueFunction};
use crate::math;
use crate::matrix_game::{self, Matrix, MatrixGameSolution};
use crate::{Error, Result, SOLVER_TOL};

/// A map `Psi: [0, 1] x R^K -> R^K` with
/// `|Psi(l, f) - Psi(l, g)| <= (1 - l) |f - g|` and `|Psi(l, 0)| <= C l`.
pub trait ShapleyOperator {
    /// Number of states.
    fn dim(&self) -> usize;

    /// The constant `C`.
    fn payoff_bound(&self) -> f64;

    /// `Psi(lambda, f)`, with `f.error_bound` propagated into the result.
    fn apply(&self, lambda: f64, f: &ValueFunction) -> Result<ValueFunction>;

    /// `Psi^n_theta(f)`: applies `Psi(lambda_m, .)` for `m = n` down to 1,
    /// where `lambda_m` are the stage discounts of `theta`.
    fn iterate(&self, theta: &Evaluation, n: usize, f: &ValueFunction) -> Result<ValueFunction> {
        let discounts = theta.stage_discounts(n);
        let mut g = f.clone();
        for &lambda in discounts.iter().rev() {
            g = self.apply(lambda, &g)?;
        }
        Ok(g)
    }
}

fn check_input(dim: usize, lambda: f64, f: &ValueFunction) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter { name: "lambda", value: lambda });
    }
    if f.len() != dim {
        return Err(Error::Dimension { expected: dim, found: f.len() });
    }
    if let Some(&bad) = f.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parameter { name: "f", value: bad });
    }
    Ok(())
}

/// Round-off allowance for forming `lambda g + (1 - lambda) E f`.
fn rounding_slack(scale: f64) -> f64 {
    16.0 * f64::EPSILON * (1.0 + scale)
}

/// The Shapley operator of a finite game:
/// `Psi(l, f)(k) = val(l g(k, ., .) + (1 - l) E^k f)`.
#[derive(Debug, Clone, Copy)]
pub struct GameOperator<'a> {
    game: &'a GameSpec,
    tol: f64,
}

impl<'a> GameOperator<'a> {
    pub fn new(game: &'a GameSpec) -> Self {
        Self { game, tol: SOLVER_TOL }
    }

    /// Uses `tol` as the matrix-game certificate tolerance.
    pub fn with_tolerance(game: &'a GameSpec, tol: f64) -> Self {
        Self { game, tol }
    }

    pub fn game(&self) -> &'a GameSpec {
        self.game
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// The auxiliary matrix `l g(k, ., .) + (1 - l) E^k f` at state `k`.
    pub fn stage_matrix(&self, k: usize, lambda: f64, f: &[f64]) -> Result<Matrix> {
        let g = self.game;
        let (ni, nj) = (g.n_p1(), g.n_p2());
        let mut data = Vec::with_capacity(ni * nj);
        for i in 0..ni {
            for j in 0..nj {
                let cont = if lambda < 1.0 { g.next_expectation(k, i, j, f) } else { 0.0 };
                data.push(lambda * g.payoff(k, i, j) + (1.0 - lambda) * cont);
            }
        }
        Matrix::new(ni, nj, data)
    }

    /// Solves the auxiliary game at state `k`.
    pub fn solve_state(&self, k: usize, lambda: f64, f: &[f64]) -> Result<MatrixGameSolution> {
        matrix_game::solve(&self.stage_matrix(k, lambda, f)?, self.tol)
    }

    /// `Psi(lambda, f)` together with the per-state solutions.
    pub fn apply_with_solutions(
        &self,
        lambda: f64,
        f: &ValueFunction,
    ) -> Result<(ValueFunction, Vec<MatrixGameSolution>)> {
        check_input(self.dim(), lambda, f)?;
        let sols = (0..self.dim())
            .map(|k| self.solve_state(k, lambda, &f.values))
            .collect::<Result<Vec<_>>>()?;
        let residual = sols.iter().map(|s| s.residual()).fold(0.0, f64::max);
        let values = sols.iter().map(|s| s.value).collect();
        let scale = lambda * self.payoff_bound() + (1.0 - lambda) * f.sup_norm();
        let err = (1.0 - lambda) * f.error_bound + residual + rounding_slack(scale);
        Ok((ValueFunction::new(values, err), sols))
    }

    /// The one-shot map `Phi(h)(k) = val(g(k, ., .) + E^k h)`, which is
    /// nonexpansive and satisfies `Psi(l, f) = l Phi((1 - l) f / l)`.
    pub fn one_shot(&self, h: &[f64]) -> Result<Vec<f64>> {
        // val is positively homogeneous: Phi(h) = 2 Psi(1/2, h)
        let half = self.apply(0.5, &ValueFunction::exact(h.to_vec()))?;
        Ok(half.values.iter().map(|v| 2.0 * v).collect())
    }
}

impl ShapleyOperator for GameOperator<'_> {
    fn dim(&self) -> usize {
        self.game.n_states()
    }

    fn payoff_bound(&self) -> f64 {
        self.game.payoff_bound()
    }

    fn apply(&self, lambda: f64, f: &ValueFunction) -> Result<ValueFunction> {
        self.apply_with_solutions(lambda, f).map(|(v, _)| v)
    }
}

/// Below this discount the adapter evaluates at the threshold instead.
pub const LAMBDA_FLOOR: f64 = 1e-12;

const SPOT_CHECK_PAIRS: usize = 32;
const SPOT_CHECK_SEED: u64 = 0x0005_eed0_f1ce;

/// `Psi(l, f) = l Phi((1 - l) f / l)` for a nonexpansive `Phi` with
/// `|Phi(0)| <= C0`.
pub struct LipschitzOperator<F> {
    dim: usize,
    c0: f64,
    phi: F,
}

impl<F> fmt::Debug for LipschitzOperator<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzOperator").field("dim", &self.dim).field("c0", &self.c0).finish_non_exhaustive()
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> LipschitzOperator<F> {
    /// Wraps `phi` after checking `|Phi(0)| <= c0` and the Lipschitz
    /// constant on seeded random pairs.
    pub fn from_nonexpansive(dim: usize, phi: F, c0: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        if !(c0 >= 0.0 && c0.is_finite()) {
            return Err(Error::Parameter { name: "c0", value: c0 });
        }
        let op = Self { dim, c0, phi };
        let at_zero = math::sup_norm(&op.eval(&alloc::vec![0.0; dim])?);
        if at_zero > c0 * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Parameter { name: "|phi(0)|", value: at_zero });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(SPOT_CHECK_SEED);
        let scale = 4.0 * (c0 + 1.0);
        for _ in 0..SPOT_CHECK_PAIRS {
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
            let d = math::sup_distance(&u, &v);
            if d == 0.0 {
                continue;
            }
            let ratio = math::sup_distance(&op.eval(&u)?, &op.eval(&v)?) / d;
            if ratio > 1.0 + 1e-9 {
                return Err(Error::Lipschitz { ratio });
            }
        }
        Ok(op)
    }

    fn eval(&self, h: &[f64]) -> Result<Vec<f64>> {
        let out = (self.phi)(h);
        if out.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: out.len() });
        }
        Ok(out)
    }

    fn raw(&self, lambda: f64, f: &[f64]) -> Result<Vec<f64>> {
        let scale = (1.0 - lambda) / lambda;
        let h: Vec<f64> = f.iter().map(|v| scale * v).collect();
        Ok(self.eval(&h)?.into_iter().map(|v| lambda * v).collect())
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> ShapleyOperator for LipschitzOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn payoff_bound(&self) -> f64 {
        self.c0
    }

    fn apply(&self, lambda: f64, f: &ValueFunction) -> Result<ValueFunction> {
        check_input(self.dim, lambda, f)?;
        let norm = f.sup_norm();
        let base_err = (1.0 - lambda) * f.error_bound;
        if lambda >= LAMBDA_FLOOR {
            let values = self.raw(lambda, &f.values)?;
            return Ok(ValueFunction::new(values, base_err + rounding_slack(self.c0 + norm)));
        }
        // continuity extension: evaluate at the floor and charge the drift
        // observed between the floor and half of it
        let at = self.raw(LAMBDA_FLOOR, &f.values)?;
        let half = self.raw(0.5 * LAMBDA_FLOOR, &f.values)?;
        let drift = math::sup_distance(&at, &half);
        let err = base_err + 2.0 * drift + LAMBDA_FLOOR * (self.c0 + norm) + rounding_slack(self.c0 + norm);
        Ok(ValueFunction::new(at, err))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{corpus, random_game};
    use alloc::string::ToString;
    use alloc::vec;

    fn one_state(payoff: Vec<f64>, ni: usize, nj: usize) -> GameSpec {
        GameSpec::new(vec!["s".to_string()], ni, nj, payoff, vec![1.0; ni * nj]).unwrap()
    }

    #[test]
    fn lambda_one_ignores_f() {
        let g = corpus("big_match").unwrap();
        let op = GameOperator::new(&g);
        let a = op.apply(1.0, &ValueFunction::exact(vec![5.0, -3.0, 2.0])).unwrap();
        let b = op.apply(1.0, &ValueFunction::zeros(3)).unwrap();
        assert_eq!(a.values, b.values);
        assert!((a[0] - 0.5).abs() < 1e-12 && a[1] == 1.0 && a[2] == 0.0);
    }

    #[test]
    fn single_state_separates() {
        let g = one_state(vec![3.0, 1.0, 0.0, 2.0], 2, 2);
        let op = GameOperator::new(&g);
        for (lambda, c) in [(0.3, 4.0), (0.9, -1.0), (0.0, 2.0)] {
            let v = op.apply(lambda, &ValueFunction::exact(vec![c])).unwrap();
            assert!((v[0] - (lambda * 1.5 + (1.0 - lambda) * c)).abs() < 1e-10);
        }
    }

    #[test]
    fn big_match_half_discount_per_state_oracle() {
        let g = corpus("big_match").unwrap();
        let op = GameOperator::new(&g);
        let v = op.apply(0.5, &ValueFunction::zeros(3)).unwrap();
        // with f = 0 each state is a plain matrix game scaled by 1/2
        let o = matrix_game::value_oracle(&Matrix::from_rows(&[&[0.5, 0.0], &[0.0, 0.5]]).unwrap(), 200).unwrap();
        assert!(o.lower - 1e-10 <= v[0] && v[0] <= o.upper + 1e-10);
        assert!((v[1] - 0.5).abs() < 1e-12 && v[2].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_lambda_and_dimension() {
        let g = corpus("cycle2").unwrap();
        let op = GameOperator::new(&g);
        assert!(op.apply(1.5, &ValueFunction::zeros(2)).is_err());
        assert!(op.apply(-0.1, &ValueFunction::zeros(2)).is_err());
        assert!(op.apply(0.5, &ValueFunction::zeros(3)).is_err());
    }

    #[test]
    fn iterate_examples() {
        let g = corpus("cycle2").unwrap();
        let op = GameOperator::new(&g);
        let f = ValueFunction::exact(vec![0.25, -1.0]);
        let theta = Evaluation::n_stage(2).unwrap();
        assert_eq!(op.iterate(&theta, 0, &f).unwrap(), f);
        let v = op.iterate(&theta, 2, &ValueFunction::zeros(2)).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn adapter_identity_and_constant() {
        let id = LipschitzOperator::from_nonexpansive(2, |h: &[f64]| h.to_vec(), 0.0).unwrap();
        let f = ValueFunction::exact(vec![1.0, -2.0]);
        let v = id.apply(0.25, &f).unwrap();
        assert!((v[0] - 0.75).abs() < 1e-15 && (v[1] + 1.5).abs() < 1e-15);
        let v0 = id.apply(0.0, &f).unwrap();
        assert!((v0[0] - 1.0).abs() <= v0.error_bound && v0.error_bound < 1e-9);

        let c = LipschitzOperator::from_nonexpansive(2, |_: &[f64]| vec![0.7, 0.7], 0.7).unwrap();
        let v = c.apply(0.4, &f).unwrap();
        assert!((v[0] - 0.28).abs() < 1e-15);
        assert!(c.apply(0.0, &f).unwrap()[0].abs() < 1e-11);
    }

    #[test]
    fn adapter_rejects_expansive_map() {
        let err = LipschitzOperator::from_nonexpansive(1, |h: &[f64]| vec![2.0 * h[0]], 0.0).unwrap_err();
        assert!(matches!(err, Error::Lipschitz { ratio } if ratio > 1.9));
        assert!(LipschitzOperator::from_nonexpansive(1, |_: &[f64]| vec![3.0], 1.0).is_err());
    }

    #[test]
    fn adapter_matches_game_operator() {
        let g = random_game(3, 3, 2, 2).unwrap();
        let op = GameOperator::new(&g);
        let adapter =
            LipschitzOperator::from_nonexpansive(3, |h: &[f64]| op.one_shot(h).unwrap(), g.payoff_bound()).unwrap();
        for (lambda, f) in [(0.3, [0.2, -0.5, 0.9]), (0.05, [1.0, 0.0, -1.0]), (1.0, [4.0, 4.0, 4.0])] {
            let f = ValueFunction::exact(f.to_vec());
            let a = op.apply(lambda, &f).unwrap();
            let b = adapter.apply(lambda, &f).unwrap();
            assert!(a.sup_distance(&b) <= 1e-9, "lambda {lambda}");
        }
    }
}
