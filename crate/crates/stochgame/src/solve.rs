//! Single-evaluation solves and strategy reports.

use anyhow::Result;
use serde::Serialize;
use stochgame_core::evaluation::DistanceMode;
use stochgame_core::strategies::{self, discounted_strategy, exploitability};
use stochgame_core::values::v_theta;
use stochgame_core::{Evaluation, GameOperator, GameSpec, MixedAction};

use crate::io::EvalSpec;

#[derive(Debug, Clone, Serialize)]
pub struct SolveMeta {
    pub evaluation: String,
    pub eps: f64,
    pub states: Vec<String>,
    pub payoff_bound: f64,
    pub sup_weight: f64,
    /// Upper bound on the impatience with 2 pieces.
    pub impatience_2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub values: Vec<f64>,
    pub error_bound: f64,
    pub meta: SolveMeta,
}

pub fn solve(game: &GameSpec, spec: &EvalSpec, eps: f64) -> Result<SolveReport> {
    let theta = spec.build()?;
    let op = GameOperator::new(game);
    let v = v_theta(&op, &theta, eps)?;
    Ok(SolveReport {
        values: v.values,
        error_bound: v.error_bound,
        meta: SolveMeta {
            evaluation: spec.descriptor(),
            eps,
            states: game.labels().to_vec(),
            payoff_bound: game.payoff_bound(),
            sup_weight: theta.sup_weight(),
            impatience_2: theta.impatience(2, DistanceMode::UpperBound)?,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRule {
    pub stage: usize,
    pub discount: f64,
    pub p1: Vec<Vec<f64>>,
    pub p2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRule {
    pub discount: f64,
    pub p1: Vec<Vec<f64>>,
    pub p2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyReport {
    pub evaluation: String,
    pub state: String,
    pub value: f64,
    pub value_error: f64,
    /// `value - min_tau payoff(sigma, tau)`; negative means the
    /// maximizer's strategy secures more than the computed value.
    pub p1_gap: f64,
    /// `max_sigma payoff(sigma, tau) - value`.
    pub p2_gap: f64,
    pub solver_residual: f64,
    pub stages: Vec<StageRule>,
    pub tail: Option<TailRule>,
}

fn probs(rule: &[MixedAction]) -> Vec<Vec<f64>> {
    rule.iter().map(|a| a.probs().to_vec()).collect()
}

fn horizon(theta: &Evaluation) -> usize {
    theta.support_len().unwrap_or(theta.head().len())
}

/// The discounted strategy pair of `theta` and its exploitability from `k1`.
pub fn strategy_report(game: &GameSpec, spec: &EvalSpec, k1: usize, eps: f64) -> Result<StrategyReport> {
    let theta = spec.build()?;
    let op = GameOperator::new(game);
    let (v, d, e) = analyse(&op, &theta, k1, eps)?;
    let stages = (0..d.p1.horizon())
        .map(|m| StageRule {
            stage: m + 1,
            discount: d.discounts[m],
            p1: probs(&d.p1.stages[m]),
            p2: probs(&d.p2.stages[m]),
        })
        .collect();
    let tail = match (d.tail_discount, &d.p1.tail, &d.p2.tail) {
        (Some(discount), Some(a), Some(b)) => Some(TailRule { discount, p1: probs(a), p2: probs(b) }),
        _ => None,
    };
    Ok(StrategyReport {
        evaluation: spec.descriptor(),
        state: game.labels()[k1].clone(),
        value: v[k1],
        value_error: v.error_bound,
        p1_gap: e.p1_gap,
        p2_gap: e.p2_gap,
        solver_residual: d.residual,
        stages,
        tail,
    })
}

type Analysis = (stochgame_core::ValueFunction, strategies::DiscountedStrategies, strategies::Exploitability);

fn analyse(op: &GameOperator<'_>, theta: &Evaluation, k1: usize, eps: f64) -> Result<Analysis> {
    if k1 >= op.game().n_states() {
        anyhow::bail!("state {k1} out of range (0..{})", op.game().n_states());
    }
    let v = v_theta(op, theta, eps)?;
    let d = discounted_strategy(op, theta, horizon(theta), eps)?;
    let e = exploitability(op, theta, &d.p1, &d.p2, k1, v[k1])?;
    Ok((v, d, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExploitRow {
    pub n: usize,
    pub value: f64,
    pub p1_gap: f64,
    pub p2_gap: f64,
}

impl ExploitRow {
    /// The larger gap, negative parts dropped.
    pub fn worst(&self) -> f64 {
        self.p1_gap.max(self.p2_gap).max(0.0)
    }
}

/// Exploitability of the n-stage discounted strategies for each `n`.
pub fn exploitability_profile(game: &GameSpec, ns: &[usize], k1: usize, eps: f64) -> Result<Vec<ExploitRow>> {
    let op = GameOperator::new(game);
    ns.iter()
        .map(|&n| {
            let (v, _, e) = analyse(&op, &Evaluation::n_stage(n)?, k1, eps)?;
            Ok(ExploitRow { n, value: v[k1], p1_gap: e.p1_gap, p2_gap: e.p2_gap })
        })
        .collect()
}

/// True when the sequence never increases after its first maximum, up to
/// `tol`.
pub fn non_increasing_after_max(xs: &[f64], tol: f64) -> bool {
    let peak = (0..xs.len()).fold(0, |best, i| if xs[i] > xs[best] { i } else { best });
    xs[peak..].windows(2).all(|w| w[1] <= w[0] + tol)
}
