//! Reproduction of the slowly flattening counterexample at desk scale.
//!
//! For every base `N` in the config the report compares the n-stage value
//! of `(0, 1)` at the horizon of the block evaluation with the value of
//! `(0, 1)` under that evaluation, plus a sanity run with `phi = 0`.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stochgame_core::game::counterexample::{
    block_evaluation, cap_certificate, counterexample_mdp, AbsorptionLaw, CounterexampleParams, Layout,
};
use stochgame_core::values::{v_n_stage, v_theta};
use stochgame_core::GameOperator;

/// Dense transitions take `2 n^2` entries; stop well before memory does.
pub const MAX_DENSE_STATES: usize = 4097;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    TripleLog { m0: f64 },
    InverseLog { c: f64, m0: f64 },
    Constant { p: f64 },
}

impl LawSpec {
    pub fn law(self) -> AbsorptionLaw {
        match self {
            LawSpec::TripleLog { m0 } => AbsorptionLaw::TripleLog { m0 },
            LawSpec::InverseLog { c, m0 } => AbsorptionLaw::InverseLog { c, m0 },
            LawSpec::Constant { p } => AbsorptionLaw::Constant(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    /// Bases `N`; block `r` of the evaluation has length `N^(3^r)`.
    pub bases: Vec<usize>,
    /// Number of blocks kept.
    pub blocks: usize,
    pub law: LawSpec,
    /// Counter cap; the evaluation horizon when absent.
    #[serde(default)]
    pub max_count: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub base: usize,
    pub blocks: usize,
    pub horizon: usize,
    pub max_count: usize,
    pub cap_unreachable: bool,
    pub cap_payoff_exact: bool,
    pub theta_mass: f64,
    pub theta_sup_weight: f64,
    /// `v_n(0, 1)` with `n = horizon`.
    pub v_n: f64,
    /// Value of `(0, 1)` under the block evaluation.
    pub v_theta: f64,
    pub v_theta_error: f64,
    pub gap: f64,
    /// Same evaluation with absorption switched off.
    pub v_theta_no_absorption: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub config: CounterexampleConfig,
    pub rows: Vec<CounterexampleRow>,
}

pub fn reproduce_counterexample(config: &CounterexampleConfig) -> Result<CounterexampleReport> {
    let rows = config
        .bases
        .iter()
        .map(|&base| run(config, base).with_context(|| format!("base {base}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(CounterexampleReport { config: config.clone(), rows })
}

fn run(config: &CounterexampleConfig, base: usize) -> Result<CounterexampleRow> {
    let theta = block_evaluation(base, config.blocks)?;
    let horizon = theta.support_len().expect("block evaluations are finite");
    let max_count = config.max_count.unwrap_or(horizon);
    let states = Layout { max_count }.n_states();
    if states > MAX_DENSE_STATES {
        bail!("infeasible parameters: {states} states exceed the limit of {MAX_DENSE_STATES}");
    }
    let cert = cap_certificate(max_count, horizon);
    if !cert.payoff_exact {
        log::warn!("base {base}: the counter cap {max_count} may change payoffs within {horizon} stages");
    }
    let start = Layout { max_count }.waiting(1);

    let game = counterexample_mdp(&CounterexampleParams { law: config.law.law(), max_count })?;
    let op = GameOperator::new(&game);
    let v_n = v_n_stage(&op, horizon)?;
    let v_t = v_theta(&op, &theta, config.eps)?;

    let calm = counterexample_mdp(&CounterexampleParams { law: AbsorptionLaw::Constant(0.0), max_count })?;
    let calm_v = v_theta(&GameOperator::new(&calm), &theta, config.eps)?;

    log::info!("base {base}: v_n {:.6}, v_theta {:.6}", v_n[start], v_t[start]);
    Ok(CounterexampleRow {
        base,
        blocks: config.blocks,
        horizon,
        max_count,
        cap_unreachable: cert.unreachable,
        cap_payoff_exact: cert.payoff_exact,
        theta_mass: theta.mass(),
        theta_sup_weight: theta.sup_weight(),
        v_n: v_n[start],
        v_theta: v_t[start],
        v_theta_error: v_t.error_bound,
        gap: v_n[start] - v_t[start],
        v_theta_no_absorption: calm_v[start],
    })
}
