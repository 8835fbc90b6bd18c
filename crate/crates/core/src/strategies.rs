//! Stage-wise discounted strategies, exact payoffs, best responses and
//! exploitability.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::evaluation::Evaluation;
use crate::game::{GameSpec, MixedAction, ValueFunction};
use crate::math;
use crate::operator::GameOperator;
use crate::values::{self, FixedPointOptions};
use crate::{Error, Result};

/// Discount used for stages with zero weight, where any action is optimal.
pub const ZERO_STAGE_LAMBDA: f64 = 1.0 / 1024.0;

const MAX_POLICY_ITERATIONS: usize = 1000;

/// A Markov strategy: one mixed action per (stage, state), optionally
/// followed by a stationary rule for every later stage.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovStrategy {
    pub stages: Vec<Vec<MixedAction>>,
    pub tail: Option<Vec<MixedAction>>,
}

impl MarkovStrategy {
    pub fn stationary(actions: Vec<MixedAction>) -> Self {
        Self { stages: Vec::new(), tail: Some(actions) }
    }

    /// Number of explicitly tabulated stages.
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Mixed action at stage `m >= 1` in state `k`.
    pub fn at(&self, m: usize, k: usize) -> Option<&MixedAction> {
        match self.stages.get(m - 1) {
            Some(s) => s.get(k),
            None => self.tail.as_ref().and_then(|t| t.get(k)),
        }
    }

    fn stage(&self, m: usize) -> Option<&[MixedAction]> {
        self.stages.get(m - 1).or(self.tail.as_ref()).map(|v| v.as_slice())
    }

    fn check(&self, n_states: usize, n_actions: usize) -> Result<()> {
        for rule in self.stages.iter().chain(self.tail.iter()) {
            if rule.len() != n_states {
                return Err(Error::Dimension { expected: n_states, found: rule.len() });
            }
            if let Some(a) = rule.iter().find(|a| a.len() != n_actions) {
                return Err(Error::Dimension { expected: n_actions, found: a.len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    /// The maximizer.
    P1,
    /// The minimizer.
    P2,
}

/// Canonical optimal actions of the `lambda`-discounted game.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalActions {
    pub lambda: f64,
    pub value: ValueFunction,
    pub p1: Vec<MixedAction>,
    pub p2: Vec<MixedAction>,
    /// Largest certificate residual of the per-state auxiliary games.
    pub residual: f64,
}

/// Solves `v_lambda` to `epsilon`, then each state's game
/// `lambda g + (1 - lambda) E v_lambda`.
pub fn optimal_actions(op: &GameOperator<'_>, lambda: f64, epsilon: f64) -> Result<OptimalActions> {
    optimal_actions_from(op, lambda, epsilon, None)
}

fn optimal_actions_from(
    op: &GameOperator<'_>,
    lambda: f64,
    epsilon: f64,
    warm: Option<ValueFunction>,
) -> Result<OptimalActions> {
    let opts = FixedPointOptions { warm_start: warm, max_iterations: None };
    let value = values::v_discounted_with(op, lambda, epsilon, &opts)?;
    let (_, sols) = op.apply_with_solutions(lambda, &value)?;
    let residual = sols.iter().map(|s| s.residual()).fold(0.0, f64::max);
    let (p1, p2) = sols.into_iter().map(|s| (s.x_star, s.y_star)).unzip();
    Ok(OptimalActions { lambda, value, p1, p2, residual })
}

/// Both players' discounted strategies for an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedStrategies {
    pub p1: MarkovStrategy,
    pub p2: MarkovStrategy,
    /// Discount actually used at each tabulated stage.
    pub discounts: Vec<f64>,
    /// Discount of the stationary tail, when there is one.
    pub tail_discount: Option<f64>,
    pub residual: f64,
}

/// At stage `m` both players use the canonical optimal actions of the
/// `lambda_m`-discounted game, `lambda_m` being the stage discount of
/// `theta`. Stages `1..=horizon` are tabulated; a geometric tail adds the
/// stationary rule of its discount.
pub fn discounted_strategy(
    op: &GameOperator<'_>,
    theta: &Evaluation,
    horizon: usize,
    epsilon: f64,
) -> Result<DiscountedStrategies> {
    let mut cache: BTreeMap<u64, OptimalActions> = BTreeMap::new();
    let mut warm: Option<ValueFunction> = None;
    let mut lookup = |lambda: f64, cache: &mut BTreeMap<u64, OptimalActions>| -> Result<OptimalActions> {
        if let Some(hit) = cache.get(&lambda.to_bits()) {
            return Ok(hit.clone());
        }
        let acts = optimal_actions_from(op, lambda, epsilon, warm.take())?;
        warm = Some(ValueFunction::exact(acts.value.values.clone()));
        cache.insert(lambda.to_bits(), acts.clone());
        Ok(acts)
    };

    let mut discounts = Vec::with_capacity(horizon);
    let (mut s1, mut s2) = (Vec::with_capacity(horizon), Vec::with_capacity(horizon));
    let mut residual: f64 = 0.0;
    for m in 1..=horizon {
        let mut lambda = theta.stage_discount(m);
        if lambda == 0.0 {
            lambda = ZERO_STAGE_LAMBDA;
        }
        let acts = lookup(lambda, &mut cache)?;
        residual = residual.max(acts.residual);
        discounts.push(lambda);
        s1.push(acts.p1);
        s2.push(acts.p2);
    }
    let (mut t1, mut t2, mut tail_discount) = (None, None, None);
    if let Some(t) = theta.tail() {
        if !theta.is_zero() {
            let acts = lookup(t.discount, &mut cache)?;
            residual = residual.max(acts.residual);
            t1 = Some(acts.p1);
            t2 = Some(acts.p2);
            tail_discount = Some(t.discount);
        }
    }
    Ok(DiscountedStrategies {
        p1: MarkovStrategy { stages: s1, tail: t1 },
        p2: MarkovStrategy { stages: s2, tail: t2 },
        discounts,
        tail_discount,
        residual,
    })
}

/// A payoff with a round-off allowance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub value: f64,
    pub error_bound: f64,
}

/// Expected stage payoff and next-state distribution at state `k`.
fn mixed_cell(game: &GameSpec, k: usize, x: &MixedAction, y: &MixedAction, next: &mut [f64], scale: f64) -> f64 {
    let mut r = 0.0;
    for (i, &xi) in x.probs().iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (j, &yj) in y.probs().iter().enumerate() {
            let w = xi * yj;
            if w == 0.0 {
                continue;
            }
            r += w * game.payoff(k, i, j);
            for &(kp, p) in game.successors(k, i, j) {
                next[kp] += scale * w * p;
            }
        }
    }
    r
}

/// Stages that must be simulated one by one: all of a finite support, or
/// the head plus any tabulated stages reaching into a geometric tail.
fn explicit_stages(theta: &Evaluation, tabulated: usize) -> usize {
    match (theta.tail(), theta.support_len()) {
        (None, Some(s)) => s,
        _ => theta.head().len().max(tabulated),
    }
}

/// `gamma_theta(sigma, tau)` from `k1`.
///
/// The explicit stages run forward on the state distribution. A geometric
/// tail is summed exactly as `d (I - (1 - lambda) P)^-1 r`, which requires
/// both strategies to be stationary there.
pub fn payoff(
    op: &GameOperator<'_>,
    theta: &Evaluation,
    sigma: &MarkovStrategy,
    tau: &MarkovStrategy,
    k1: usize,
) -> Result<Payoff> {
    let game = op.game();
    let n = game.n_states();
    if k1 >= n {
        return Err(Error::Index { what: "state set", index: k1, size: n });
    }
    sigma.check(n, game.n_p1())?;
    tau.check(n, game.n_p2())?;
    let explicit = explicit_stages(theta, sigma.horizon().max(tau.horizon()));

    let mut dist = vec![0.0; n];
    dist[k1] = 1.0;
    let mut next = vec![0.0; n];
    let mut total = math::CompensatedSum::new();
    for m in 1..=explicit {
        let w = theta.weight(m);
        let (Some(xs), Some(ys)) = (sigma.stage(m), tau.stage(m)) else {
            if theta.tail_mass(m) == 0.0 {
                break;
            }
            return Err(Error::HorizonShortfall { stage: m });
        };
        next.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            if dist[k] == 0.0 {
                continue;
            }
            let r = mixed_cell(game, k, &xs[k], &ys[k], &mut next, dist[k]);
            total.add(w * dist[k] * r);
        }
        core::mem::swap(&mut dist, &mut next);
    }

    let rest = theta.tail_mass(explicit + 1);
    if rest > 0.0 {
        let t = theta.tail().expect("remaining mass lives in the tail");
        let (Some(xs), Some(ys)) = (sigma.tail.as_ref(), tau.tail.as_ref()) else {
            return Err(Error::HorizonShortfall { stage: explicit + 1 });
        };
        // remaining weights are rest * lambda (1 - lambda)^k
        let w = stationary_values(game, t.discount, |k, next| mixed_cell(game, k, &xs[k], &ys[k], next, 1.0))?;
        total.add(rest * dist.iter().zip(&w).map(|(d, v)| d * v).sum::<f64>());
    }
    let err = 64.0 * f64::EPSILON * game.payoff_bound() * (explicit as f64 + 1.0);
    Ok(Payoff { value: total.value(), error_bound: err })
}

/// Normalized discounted values `V = lambda r + (1 - lambda) P V` of a
/// stationary rule given by `cell(k, next_row) -> r(k)`.
fn stationary_values(
    game: &GameSpec,
    lambda: f64,
    mut cell: impl FnMut(usize, &mut [f64]) -> f64,
) -> Result<Vec<f64>> {
    let n = game.n_states();
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let mut row = vec![0.0; n];
    for k in 0..n {
        row.iter_mut().for_each(|v| *v = 0.0);
        b[k] = lambda * cell(k, &mut row);
        for (kp, p) in row.iter().enumerate() {
            a[k * n + kp] = -(1.0 - lambda) * p;
        }
        a[k * n + k] += 1.0;
    }
    math::solve_linear(a, b).ok_or(Error::Precondition("singular stationary system"))
}

/// Backward induction for `responder` against the other player's fixed
/// strategy `fixed`; returns a pure Markov best response and its value.
///
/// A geometric tail is handled by policy iteration on the discounted
/// one-player problem, which needs `fixed` to be stationary there.
pub fn best_response(
    op: &GameOperator<'_>,
    theta: &Evaluation,
    fixed: &MarkovStrategy,
    responder: Player,
    k1: usize,
) -> Result<(MarkovStrategy, f64)> {
    let game = op.game();
    let n = game.n_states();
    if k1 >= n {
        return Err(Error::Index { what: "state set", index: k1, size: n });
    }
    let (n_fixed, n_resp) = match responder {
        Player::P1 => (game.n_p2(), game.n_p1()),
        Player::P2 => (game.n_p1(), game.n_p2()),
    };
    fixed.check(n, n_fixed)?;
    let better = |a: f64, b: f64| match responder {
        Player::P1 => a > b,
        Player::P2 => a < b,
    };
    // payoff and next-state row when the responder plays `a` against `mix`
    let cell = |k: usize, a: usize, mix: &MixedAction, next: &mut [f64]| -> f64 {
        let pure = MixedAction::pure(n_resp, a);
        match responder {
            Player::P1 => mixed_cell(game, k, &pure, mix, next, 1.0),
            Player::P2 => mixed_cell(game, k, mix, &pure, next, 1.0),
        }
    };

    let explicit = explicit_stages(theta, fixed.horizon());
    if let Some(stage) = (1..=explicit).find(|&m| fixed.stage(m).is_none() && theta.tail_mass(m) > 0.0) {
        return Err(Error::HorizonShortfall { stage });
    }
    let rest = theta.tail_mass(explicit + 1);
    let (mut cont, tail_policy) = if rest > 0.0 {
        let t = theta.tail().expect("remaining mass lives in the tail");
        let mix = fixed.tail.as_ref().ok_or(Error::Unsupported(
            "best response into a geometric tail needs a stationary strategy there",
        ))?;
        let (v, policy) = tail_best_response(game, t.discount, n_resp, &|k, a, next| cell(k, a, &mix[k], next), &better)?;
        (v.into_iter().map(|x| rest * x).collect::<Vec<_>>(), Some(policy))
    } else {
        (vec![0.0; n], None)
    };

    let mut stages = vec![Vec::new(); explicit];
    let mut row = vec![0.0; n];
    for m in (1..=explicit).rev() {
        let w = theta.weight(m);
        let Some(mixes) = fixed.stage(m) else {
            if theta.tail_mass(m) == 0.0 {
                // nothing left to earn: any action will do
                stages[m - 1] = vec![MixedAction::pure(n_resp, 0); n];
                continue;
            }
            return Err(Error::HorizonShortfall { stage: m });
        };
        let mut now = vec![0.0; n];
        let mut choice = Vec::with_capacity(n);
        for k in 0..n {
            let mut best = (0, f64::NAN);
            for a in 0..n_resp {
                row.iter_mut().for_each(|v| *v = 0.0);
                let r = cell(k, a, &mixes[k], &mut row);
                let q = w * r + row.iter().zip(&cont).map(|(p, c)| p * c).sum::<f64>();
                if a == 0 || better(q, best.1) {
                    best = (a, q);
                }
            }
            now[k] = best.1;
            choice.push(MixedAction::pure(n_resp, best.0));
        }
        stages[m - 1] = choice;
        cont = now;
    }
    let tail = tail_policy.map(|p| p.into_iter().map(|a| MixedAction::pure(n_resp, a)).collect());
    Ok((MarkovStrategy { stages, tail }, cont[k1]))
}

type CellFn<'a> = dyn Fn(usize, usize, &mut [f64]) -> f64 + 'a;

/// Policy iteration for the responder's normalized `lambda`-discounted
/// problem.
fn tail_best_response(
    game: &GameSpec,
    lambda: f64,
    n_resp: usize,
    cell: &CellFn<'_>,
    better: &dyn Fn(f64, f64) -> bool,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = game.n_states();
    let mut policy = vec![0usize; n];
    let mut row = vec![0.0; n];
    for _ in 0..MAX_POLICY_ITERATIONS {
        let v = stationary_values(game, lambda, |k, next| cell(k, policy[k], next))?;
        let mut changed = false;
        for k in 0..n {
            let q = |a: usize, row: &mut [f64]| {
                row.iter_mut().for_each(|x| *x = 0.0);
                let r = cell(k, a, row);
                lambda * r + (1.0 - lambda) * row.iter().zip(&v).map(|(p, c)| p * c).sum::<f64>()
            };
            let current = q(policy[k], &mut row);
            let mut best = (policy[k], current);
            for a in 0..n_resp {
                let qa = q(a, &mut row);
                // switch only on a clear improvement so the loop terminates
                if better(qa, best.1) && (qa - current).abs() > 1e-12 * (1.0 + current.abs()) {
                    best = (a, qa);
                }
            }
            if best.0 != policy[k] {
                policy[k] = best.0;
                changed = true;
            }
        }
        if !changed {
            return Ok((v, policy));
        }
    }
    Err(Error::NotConverged { iterations: MAX_POLICY_ITERATIONS, bound: f64::NAN })
}

/// Gaps of a strategy pair against a reference value `v_star`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploitability {
    /// `v* - min_tau gamma(sigma, tau)`.
    pub p1_gap: f64,
    /// `max_sigma gamma(sigma, tau) - v*`.
    pub p2_gap: f64,
    /// `min_tau gamma(sigma, tau)`.
    pub p1_guarantee: f64,
    /// `max_sigma gamma(sigma, tau)`.
    pub p2_guarantee: f64,
}

impl Exploitability {
    /// The larger gap, clipped at zero.
    pub fn worst(&self) -> f64 {
        self.p1_gap.max(self.p2_gap).max(0.0)
    }
}

pub fn exploitability(
    op: &GameOperator<'_>,
    theta: &Evaluation,
    sigma: &MarkovStrategy,
    tau: &MarkovStrategy,
    k1: usize,
    v_star: f64,
) -> Result<Exploitability> {
    let (_, p1_guarantee) = best_response(op, theta, sigma, Player::P2, k1)?;
    let (_, p2_guarantee) = best_response(op, theta, tau, Player::P1, k1)?;
    Ok(Exploitability { p1_gap: v_star - p1_guarantee, p2_gap: p2_guarantee - v_star, p1_guarantee, p2_guarantee })
}
