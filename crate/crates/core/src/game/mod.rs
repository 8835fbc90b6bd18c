//! Finite zero-sum stochastic games.

mod corpus;
pub mod counterexample;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::{Error, Result, MASS_TOL};

pub use corpus::{corpus, random_game, CORPUS_NAMES};

/// A single defect found while validating a [`GameSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape { what: &'static str, expected: usize, found: usize },
    Empty { what: &'static str },
    NonFinitePayoff { state: usize, p1: usize, p2: usize },
    NonFiniteProbability { state: usize, p1: usize, p2: usize, next: usize },
    NegativeProbability { state: usize, p1: usize, p2: usize, next: usize, value: f64 },
    RowSum { state: usize, p1: usize, p2: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Shape { what, expected, found } => {
                write!(f, "{what} has {found} entries, expected {expected}")
            }
            Violation::Empty { what } => write!(f, "{what} is empty"),
            Violation::NonFinitePayoff { state, p1, p2 } => {
                write!(f, "payoff at state {state}, actions ({p1}, {p2}) is not finite")
            }
            Violation::NonFiniteProbability { state, p1, p2, next } => write!(
                f,
                "transition probability at state {state}, actions ({p1}, {p2}) to {next} is not finite"
            ),
            Violation::NegativeProbability { state, p1, p2, next, value } => write!(
                f,
                "transition probability at state {state}, actions ({p1}, {p2}) to {next} is negative ({value})"
            ),
            Violation::RowSum { state, p1, p2, sum } => write!(
                f,
                "transition row at state {state}, actions ({p1}, {p2}) sums to {sum}"
            ),
        }
    }
}

/// Re-checks every invariant of `spec`.
pub fn validate(spec: GameSpec) -> Result<GameSpec> {
    let violations = GameSpec::check(spec.n_states(), spec.n_p1, spec.n_p2, &spec.payoff, &spec.transition);
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(Error::InvalidGame(violations))
    }
}

/// A validated finite stochastic game.
///
/// Payoffs are stored flat as `payoff[(k * nI + i) * nJ + j]`, transitions as
/// `transition[((k * nI + i) * nJ + j) * nK + k']`. Both action sets are
/// global; a state where an action is unavailable repeats a dominated row or
/// column.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    labels: Vec<String>,
    n_p1: usize,
    n_p2: usize,
    payoff: Vec<f64>,
    transition: Vec<f64>,
    bound: f64,
    succ_start: Vec<usize>,
    succ: Vec<(usize, f64)>,
}

impl GameSpec {
    pub fn new(
        labels: Vec<String>,
        n_p1: usize,
        n_p2: usize,
        payoff: Vec<f64>,
        transition: Vec<f64>,
    ) -> Result<Self> {
        let violations = Self::check(labels.len(), n_p1, n_p2, &payoff, &transition);
        if !violations.is_empty() {
            return Err(Error::InvalidGame(violations));
        }
        let bound = math::sup_norm(&payoff);
        let n = labels.len();
        let mut succ_start = Vec::with_capacity(payoff.len() + 1);
        let mut succ = Vec::new();
        succ_start.push(0);
        for row in transition.chunks(n) {
            succ.extend(row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| (k, *p)));
            succ_start.push(succ.len());
        }
        Ok(Self { labels, n_p1, n_p2, payoff, transition, bound, succ_start, succ })
    }

    /// Every violation in the raw parts, in storage order.
    pub fn check(n_states: usize, n_p1: usize, n_p2: usize, payoff: &[f64], transition: &[f64]) -> Vec<Violation> {
        let mut out = Vec::new();
        for (what, n) in [("state set", n_states), ("player 1 action set", n_p1), ("player 2 action set", n_p2)] {
            if n == 0 {
                out.push(Violation::Empty { what });
            }
        }
        if !out.is_empty() {
            return out;
        }
        let cells = n_states * n_p1 * n_p2;
        if payoff.len() != cells {
            out.push(Violation::Shape { what: "payoff", expected: cells, found: payoff.len() });
        }
        if transition.len() != cells * n_states {
            out.push(Violation::Shape { what: "transition", expected: cells * n_states, found: transition.len() });
        }
        if !out.is_empty() {
            return out;
        }
        for k in 0..n_states {
            for i in 0..n_p1 {
                for j in 0..n_p2 {
                    let cell = (k * n_p1 + i) * n_p2 + j;
                    if !payoff[cell].is_finite() {
                        out.push(Violation::NonFinitePayoff { state: k, p1: i, p2: j });
                    }
                    let row = &transition[cell * n_states..(cell + 1) * n_states];
                    let mut finite = true;
                    for (next, &p) in row.iter().enumerate() {
                        if !p.is_finite() {
                            finite = false;
                            out.push(Violation::NonFiniteProbability { state: k, p1: i, p2: j, next });
                        } else if p < 0.0 {
                            out.push(Violation::NegativeProbability { state: k, p1: i, p2: j, next, value: p });
                        }
                    }
                    if finite {
                        let sum = math::compensated_sum(row.iter().copied());
                        if (sum - 1.0).abs() > MASS_TOL {
                            out.push(Violation::RowSum { state: k, p1: i, p2: j, sum });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn n_p1(&self) -> usize {
        self.n_p1
    }

    pub fn n_p2(&self) -> usize {
        self.n_p2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `max |g|`.
    pub fn payoff_bound(&self) -> f64 {
        self.bound
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoff
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    #[inline]
    pub fn payoff(&self, k: usize, i: usize, j: usize) -> f64 {
        self.payoff[(k * self.n_p1 + i) * self.n_p2 + j]
    }

    /// Distribution of the next state after `(k, i, j)`.
    #[inline]
    pub fn transition(&self, k: usize, i: usize, j: usize) -> &[f64] {
        let n = self.n_states();
        let cell = (k * self.n_p1 + i) * self.n_p2 + j;
        &self.transition[cell * n..(cell + 1) * n]
    }

    /// Nonzero entries `(next, probability)` of the transition row.
    #[inline]
    pub fn successors(&self, k: usize, i: usize, j: usize) -> &[(usize, f64)] {
        let cell = (k * self.n_p1 + i) * self.n_p2 + j;
        &self.succ[self.succ_start[cell]..self.succ_start[cell + 1]]
    }

    /// `sum_k' q(k' | k, i, j) f(k')`.
    #[inline]
    pub fn next_expectation(&self, k: usize, i: usize, j: usize, f: &[f64]) -> f64 {
        self.successors(k, i, j).iter().map(|&(n, p)| p * f[n]).sum()
    }

    fn check_state(&self, k: usize) -> Result<()> {
        if k >= self.n_states() {
            return Err(Error::Index { what: "state set", index: k, size: self.n_states() });
        }
        Ok(())
    }

    fn check_actions(&self, x: &MixedAction, y: &MixedAction) -> Result<()> {
        if x.len() != self.n_p1 {
            return Err(Error::Dimension { expected: self.n_p1, found: x.len() });
        }
        if y.len() != self.n_p2 {
            return Err(Error::Dimension { expected: self.n_p2, found: y.len() });
        }
        Ok(())
    }

    /// `g(k, x, y)`: the bilinear expectation of the stage payoff.
    pub fn expected_payoff(&self, k: usize, x: &MixedAction, y: &MixedAction) -> Result<f64> {
        self.check_state(k)?;
        self.check_actions(x, y)?;
        let mut total = 0.0;
        for (i, &xi) in x.probs().iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.probs().iter().enumerate() {
                total += xi * yj * self.payoff(k, i, j);
            }
        }
        Ok(total)
    }

    /// `E^k_{x,y}(f)`: expectation of `f` at the next state.
    pub fn expected_next(&self, k: usize, x: &MixedAction, y: &MixedAction, f: &[f64]) -> Result<f64> {
        self.check_state(k)?;
        self.check_actions(x, y)?;
        if f.len() != self.n_states() {
            return Err(Error::Dimension { expected: self.n_states(), found: f.len() });
        }
        let mut total = 0.0;
        for (i, &xi) in x.probs().iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.probs().iter().enumerate() {
                let w = xi * yj;
                if w == 0.0 {
                    continue;
                }
                total += w * self.next_expectation(k, i, j, f);
            }
        }
        Ok(total)
    }
}

/// A real vector over states with a guaranteed sup-norm error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub error_bound: f64,
}

impl ValueFunction {
    pub fn new(values: Vec<f64>, error_bound: f64) -> Self {
        Self { values, error_bound }
    }

    /// Exact zero vector.
    pub fn zeros(n: usize) -> Self {
        Self { values: alloc::vec![0.0; n], error_bound: 0.0 }
    }

    pub fn exact(values: Vec<f64>) -> Self {
        Self { values, error_bound: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        math::sup_norm(&self.values)
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        math::sup_distance(&self.values, &other.values)
    }
}

impl core::ops::Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

/// A probability vector over an action set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedAction(Vec<f64>);

impl MixedAction {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        for (stage, &p) in probs.iter().enumerate() {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Weight { stage, weight: p });
            }
        }
        let sum = math::compensated_sum(probs.iter().copied());
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::Mass { mass: sum });
        }
        Ok(Self(probs))
    }

    /// Clips negative round-off and rescales to sum 1.
    pub(crate) fn normalized(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 || !p.is_finite() {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if sum > 0.0 {
            for p in probs.iter_mut() {
                *p /= sum;
            }
        } else {
            probs[0] = 1.0;
        }
        Self(probs)
    }

    pub fn pure(n: usize, action: usize) -> Self {
        let mut probs = alloc::vec![0.0; n];
        probs[action] = 1.0;
        Self(probs)
    }

    pub fn uniform(n: usize) -> Self {
        Self(alloc::vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Convex combination `(1 - t) self + t other`.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        Self::normalized(self.0.iter().zip(&other.0).map(|(a, b)| (1.0 - t) * a + t * b).collect())
    }
}
