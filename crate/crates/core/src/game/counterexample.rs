//! A one-player absorbing game whose n-stage values tend to 1 while its
//! values under a family of slowly flattening evaluations stay low.
//!
//! States are `(0, m)` (waiting, payoff 0), `(1, m)` (cashing in, payoff 1)
//! and an absorbing `0*` with payoff 0. From `(0, m)`, action `C` continues
//! to `(0, m + 1)`; action `Q` is absorbed with probability `phi(m)` and
//! otherwise jumps to `(1, m^2)`. From `(1, m)` the counter runs down to
//! `(1, 1)` and then back to `(0, 1)`. Counters saturate at `max_count`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::GameSpec;
use crate::evaluation::Evaluation;
use crate::math;
use crate::{Error, Result};

pub const ACTION_CONTINUE: usize = 0;
pub const ACTION_QUIT: usize = 1;

/// Largest state counter and evaluation horizon the generators accept.
pub const MAX_COUNT_LIMIT: usize = 1 << 22;

/// Absorption probability `phi(m)` of action `Q` in state `(0, m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbsorptionLaw {
    /// `1 / ln(ln(ln(m + m0)))`.
    TripleLog { m0: f64 },
    /// `c / ln(m + m0)`.
    InverseLog { c: f64, m0: f64 },
    /// `phi(m) = p` for every `m`.
    Constant(f64),
}

impl AbsorptionLaw {
    pub fn phi(&self, m: usize) -> f64 {
        let m = m as f64;
        match *self {
            AbsorptionLaw::TripleLog { m0 } => 1.0 / math::ln(math::ln(math::ln(m + m0))),
            AbsorptionLaw::InverseLog { c, m0 } => c / math::ln(m + m0),
            AbsorptionLaw::Constant(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleParams {
    pub law: AbsorptionLaw,
    pub max_count: usize,
}

/// State indexing of the truncated game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub max_count: usize,
}

impl Layout {
    pub fn n_states(&self) -> usize {
        2 * self.max_count + 1
    }

    /// Index of `(0, m)`, `1 <= m <= max_count`.
    pub fn waiting(&self, m: usize) -> usize {
        m - 1
    }

    /// Index of `(1, m)`, `1 <= m <= max_count`.
    pub fn cashing(&self, m: usize) -> usize {
        self.max_count + m - 1
    }

    pub fn absorbed(&self) -> usize {
        2 * self.max_count
    }
}

/// Builds the truncated game; action 0 is `C`, action 1 is `Q`.
pub fn counterexample_mdp(params: &CounterexampleParams) -> Result<GameSpec> {
    let max = params.max_count;
    if max < 2 {
        return Err(Error::Parameter { name: "max_count", value: max as f64 });
    }
    if max > MAX_COUNT_LIMIT {
        return Err(Error::Size { what: "max_count", limit: MAX_COUNT_LIMIT });
    }
    let phi: Vec<f64> = (1..=max).map(|m| params.law.phi(m)).collect();
    if let Some(&bad) = phi.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
        return Err(Error::Parameter { name: "phi", value: bad });
    }

    let lay = Layout { max_count: max };
    let n = lay.n_states();
    let mut payoff = vec![0.0; n * 2];
    let mut trans = vec![0.0; n * 2 * n];
    let mut put = |k: usize, i: usize, next: usize, p: f64| trans[(k * 2 + i) * n + next] += p;
    for m in 1..=max {
        let k = lay.waiting(m);
        put(k, ACTION_CONTINUE, lay.waiting((m + 1).min(max)), 1.0);
        let jump = m.saturating_mul(m).min(max);
        put(k, ACTION_QUIT, lay.cashing(jump), 1.0 - phi[m - 1]);
        put(k, ACTION_QUIT, lay.absorbed(), phi[m - 1]);

        let k = lay.cashing(m);
        let next = if m == 1 { lay.waiting(1) } else { lay.cashing(m - 1) };
        for i in 0..2 {
            payoff[k * 2 + i] = 1.0;
            put(k, i, next, 1.0);
        }
    }
    for i in 0..2 {
        put(lay.absorbed(), i, lay.absorbed(), 1.0);
    }
    let mut labels = Vec::with_capacity(n);
    labels.extend((1..=max).map(|m| format!("(0,{m})")));
    labels.extend((1..=max).map(|m| format!("(1,{m})")));
    labels.push("0*".into());
    GameSpec::new(labels, 2, 1, payoff, trans)
}

/// Outcome of tracking the reachable support from `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapCertificate {
    pub horizon: usize,
    pub max_count: usize,
    /// No saturated transition is reachable before the last stage.
    pub unreachable: bool,
    /// Every reachable saturated transition leaves the payoff stream of the
    /// first `horizon` stages unchanged.
    pub payoff_exact: bool,
}

/// Simulates supports from `(0, 1)` over `horizon` stages.
///
/// A saturated `C` move can only matter at a later stage, and a saturated
/// `Q` jump at stage `s` is harmless when `max_count >= horizon - s`: both
/// the true and the capped state pay 1 for every remaining stage.
pub fn cap_certificate(max_count: usize, horizon: usize) -> CapCertificate {
    let lay = Layout { max_count };
    let n = lay.n_states();
    let mut reach = vec![false; n];
    let mut next = vec![false; n];
    reach[lay.waiting(1)] = true;
    let mut unreachable = true;
    let mut payoff_exact = true;
    for stage in 1..horizon {
        next.iter_mut().for_each(|b| *b = false);
        for m in 1..=max_count {
            if reach[lay.waiting(m)] {
                if m + 1 > max_count {
                    unreachable = false;
                    payoff_exact = false;
                }
                next[lay.waiting((m + 1).min(max_count))] = true;
                let sq = m.saturating_mul(m);
                if sq > max_count {
                    unreachable = false;
                    if max_count < horizon - stage {
                        payoff_exact = false;
                    }
                }
                next[lay.cashing(sq.min(max_count))] = true;
                next[lay.absorbed()] = true;
            }
            if reach[lay.cashing(m)] {
                next[if m == 1 { lay.waiting(1) } else { lay.cashing(m - 1) }] = true;
            }
        }
        next[lay.absorbed()] |= reach[lay.absorbed()];
        core::mem::swap(&mut reach, &mut next);
    }
    CapCertificate { horizon, max_count, unreachable, payoff_exact }
}

/// The equal-mass block evaluation: `blocks` consecutive blocks, block `r`
/// of length `base^(3^r)` carrying mass `1 / blocks` spread uniformly.
pub fn block_evaluation(base: usize, blocks: usize) -> Result<Evaluation> {
    if base < 2 {
        return Err(Error::Parameter { name: "base", value: base as f64 });
    }
    if blocks == 0 {
        return Err(Error::Parameter { name: "blocks", value: 0.0 });
    }
    let mut lens = Vec::with_capacity(blocks);
    let mut exp: u32 = 1;
    let mut total: usize = 0;
    for _ in 0..blocks {
        exp = exp.checked_mul(3).ok_or(Error::Size { what: "block length", limit: MAX_COUNT_LIMIT })?;
        let len = base
            .checked_pow(exp)
            .filter(|&l| l <= MAX_COUNT_LIMIT)
            .ok_or(Error::Size { what: "block length", limit: MAX_COUNT_LIMIT })?;
        total += len;
        if total > MAX_COUNT_LIMIT {
            return Err(Error::Size { what: "horizon", limit: MAX_COUNT_LIMIT });
        }
        lens.push(len);
    }
    let levels: Vec<f64> = lens.iter().map(|&l| 1.0 / (blocks as f64 * l as f64)).collect();
    let mut breakpoints = vec![1];
    for l in &lens {
        breakpoints.push(breakpoints.last().unwrap() + l);
    }
    Evaluation::piecewise_constant(&levels, &breakpoints)
}
