//! Weighted, n-stage and discounted values with certified error bounds.

use alloc::vec::Vec;

use crate::evaluation::Evaluation;
use crate::game::ValueFunction;
use crate::math;
use crate::operator::ShapleyOperator;
use crate::{Error, Result};

/// Largest truncation horizon [`v_theta_truncated`] will iterate.
pub const MAX_TRUNCATION: usize = 1 << 24;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter { name: "epsilon", value: epsilon });
    }
    Ok(())
}

/// `v_theta`, the unique family with `v_theta = Psi(theta_1, v_shift(theta))`
/// and `v_0 = 0`.
///
/// A finite support is folded backwards from zero. A geometric tail starts
/// from the discounted value of its ratio, computed to `epsilon / 2`.
pub fn v_theta<O: ShapleyOperator + ?Sized>(op: &O, theta: &Evaluation, epsilon: f64) -> Result<ValueFunction> {
    check_epsilon(epsilon)?;
    let seed = match theta.tail() {
        Some(t) if !theta.is_zero() => v_discounted(op, t.discount, 0.5 * epsilon)?,
        _ => ValueFunction::zeros(op.dim()),
    };
    let h = theta.head().len();
    op.iterate(theta, h, &seed)
}

/// `Psi^n_theta(0)` with `n` the smallest horizon such that
/// `C sum_{m > n} theta_m <= epsilon / 2`; the truncation is charged to the
/// error bound.
pub fn v_theta_truncated<O: ShapleyOperator + ?Sized>(
    op: &O,
    theta: &Evaluation,
    epsilon: f64,
) -> Result<ValueFunction> {
    check_epsilon(epsilon)?;
    let c = op.payoff_bound();
    let mut n = theta.head().len();
    while c * theta.tail_mass(n + 1) > 0.5 * epsilon {
        if n >= MAX_TRUNCATION {
            return Err(Error::Size { what: "truncation horizon", limit: MAX_TRUNCATION });
        }
        n = (2 * n).clamp(1, MAX_TRUNCATION);
    }
    // tighten by bisection back toward the smallest admissible horizon
    let (mut lo, mut hi) = (n / 2, n);
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if c * theta.tail_mass(mid + 1) <= 0.5 * epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if c * theta.tail_mass(lo + 1) <= 0.5 * epsilon {
        hi = lo;
    }
    let mut v = op.iterate(theta, hi, &ValueFunction::zeros(op.dim()))?;
    v.error_bound += c * theta.tail_mass(hi + 1);
    Ok(v)
}

/// Options for [`v_discounted_with`].
#[derive(Debug, Clone, Default)]
pub struct FixedPointOptions {
    /// Starting point; zero when absent.
    pub warm_start: Option<ValueFunction>,
    /// Iteration cap; derived from `lambda` and `epsilon` when absent.
    pub max_iterations: Option<usize>,
}

/// `v_lambda`, the fixed point of `Psi(lambda, .)`, to accuracy `epsilon`.
pub fn v_discounted<O: ShapleyOperator + ?Sized>(op: &O, lambda: f64, epsilon: f64) -> Result<ValueFunction> {
    v_discounted_with(op, lambda, epsilon, &FixedPointOptions::default())
}

/// Fixed-point iteration. With step `d = |f_{t+1} - f_t|` and per-step
/// evaluation error `delta`, `|f_{t+1} - v_lambda| <= ((1 - lambda) d + delta) / lambda`;
/// iteration stops once that bound is at most `epsilon`.
pub fn v_discounted_with<O: ShapleyOperator + ?Sized>(
    op: &O,
    lambda: f64,
    epsilon: f64,
    opts: &FixedPointOptions,
) -> Result<ValueFunction> {
    check_epsilon(epsilon)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Parameter { name: "lambda", value: lambda });
    }
    let mut f = match &opts.warm_start {
        Some(w) => {
            if w.len() != op.dim() {
                return Err(Error::Dimension { expected: op.dim(), found: w.len() });
            }
            ValueFunction::exact(w.values.clone())
        }
        None => ValueFunction::zeros(op.dim()),
    };
    let cap = opts.max_iterations.unwrap_or_else(|| default_cap(op, lambda, epsilon, &f));
    let mut bound = f64::INFINITY;
    for it in 1..=cap {
        let next = op.apply(lambda, &f)?;
        let d = next.sup_distance(&f);
        bound = ((1.0 - lambda) * d + next.error_bound) / lambda;
        f = ValueFunction::exact(next.values);
        if bound <= epsilon {
            log::debug!("discounted lambda={lambda}: {it} iterations, bound {bound:e}");
            return Ok(ValueFunction::new(f.values, bound));
        }
    }
    Err(Error::NotConverged { iterations: cap, bound })
}

fn default_cap<O: ShapleyOperator + ?Sized>(op: &O, lambda: f64, epsilon: f64, start: &ValueFunction) -> usize {
    // the step shrinks by (1 - lambda) per iteration from at most 2C + |f0|
    let initial = 2.0 * op.payoff_bound() + start.sup_norm() + 1.0;
    let target = (epsilon * lambda).max(f64::MIN_POSITIVE);
    let steps = if lambda >= 1.0 {
        1.0
    } else {
        math::ln(initial / target).max(1.0) / -math::ln_1p(-lambda)
    };
    (2.0 * steps + 100.0).min(1e9) as usize
}

/// `v_n` via `v_k = Psi(1/k, v_{k-1})`, `v_0 = 0`.
pub fn v_n_stage<O: ShapleyOperator + ?Sized>(op: &O, n: usize) -> Result<ValueFunction> {
    if n == 0 {
        return Err(Error::Parameter { name: "n", value: 0.0 });
    }
    let mut v = ValueFunction::zeros(op.dim());
    for k in 1..=n {
        v = op.apply(1.0 / k as f64, &v)?;
    }
    Ok(v)
}

/// One point of the schedule in [`asymptotic_value_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticRow {
    pub j: u32,
    pub n: usize,
    pub lambda: f64,
    pub v_n: ValueFunction,
    pub v_lambda: ValueFunction,
    /// `|v_n - v_lambda|`.
    pub gap: f64,
    /// Largest change of either sequence since the previous row.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticEstimate {
    /// Midpoint of the last `v_n` and `v_lambda`; its `error_bound` is the
    /// last observed gap and step plus both certified errors, a diagnostic
    /// rather than a proof.
    pub estimate: ValueFunction,
    pub converged: bool,
    pub rows: Vec<AsymptoticRow>,
}

/// Follows `v_n` and `v_lambda` along `n = 2^j`, `lambda = 2^-j` for
/// `j = 1..=max_j`, stopping once the gap and both steps are below `tol`.
pub fn asymptotic_value_estimate<O: ShapleyOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_j: u32,
) -> Result<AsymptoticEstimate> {
    check_epsilon(tol)?;
    if max_j == 0 || max_j > 30 {
        return Err(Error::Parameter { name: "max_j", value: max_j as f64 });
    }
    let mut rows: Vec<AsymptoticRow> = Vec::new();
    let mut v_n = ValueFunction::zeros(op.dim());
    let mut k = 0usize;
    let mut converged = false;
    for j in 1..=max_j {
        let n = 1usize << j;
        while k < n {
            k += 1;
            v_n = op.apply(1.0 / k as f64, &v_n)?;
        }
        let lambda = math::pow(2.0, -(j as f64));
        let opts = FixedPointOptions {
            warm_start: rows.last().map(|r| r.v_lambda.clone()),
            max_iterations: None,
        };
        let v_lambda = v_discounted_with(op, lambda, 0.25 * tol, &opts)?;
        let gap = v_n.sup_distance(&v_lambda);
        let step = rows
            .last()
            .map_or(f64::INFINITY, |r| r.v_n.sup_distance(&v_n).max(r.v_lambda.sup_distance(&v_lambda)));
        rows.push(AsymptoticRow { j, n, lambda, v_n: v_n.clone(), v_lambda, gap, step });
        if gap <= tol && step <= tol {
            converged = true;
            break;
        }
    }
    let last = rows.last().expect("at least one row");
    let values = last.v_n.values.iter().zip(&last.v_lambda.values).map(|(a, b)| 0.5 * (a + b)).collect();
    let err = 0.5 * last.gap + last.step.min(1e300) + last.v_n.error_bound.max(last.v_lambda.error_bound);
    Ok(AsymptoticEstimate { estimate: ValueFunction::new(values, err), converged, rows })
}

/// A fitted bound `|v(l) - v(l')| <= c |l^s - l'^s|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderFit {
    pub exponent: f64,
    pub constant: f64,
}

impl HolderFit {
    pub fn bound(&self, l1: f64, l2: f64) -> f64 {
        self.constant * (math::pow(l1, self.exponent) - math::pow(l2, self.exponent)).abs()
    }
}

/// Fits exponents `1/M`, `M = 1..=max_m`, to `(lambda, v_lambda)` samples and
/// keeps the one with the smallest constant; each constant is the largest
/// observed ratio over all sample pairs.
pub fn fit_holder(samples: &[(f64, ValueFunction)], max_m: usize) -> Result<HolderFit> {
    if samples.len() < 2 || max_m == 0 {
        return Err(Error::Precondition("a Hölder fit needs two samples and one exponent"));
    }
    let mut best: Option<HolderFit> = None;
    for m in 1..=max_m {
        let s = 1.0 / m as f64;
        let mut c: f64 = 0.0;
        for (a, (la, va)) in samples.iter().enumerate() {
            for (lb, vb) in &samples[a + 1..] {
                let dl = (math::pow(*la, s) - math::pow(*lb, s)).abs();
                if dl > 0.0 {
                    c = c.max(va.sup_distance(vb) / dl);
                }
            }
        }
        if best.is_none_or(|b| c < b.constant) {
            best = Some(HolderFit { exponent: s, constant: c });
        }
    }
    Ok(best.expect("max_m >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{corpus, counterexample, random_game};
    use crate::operator::GameOperator;
    use alloc::vec;

    #[test]
    fn dirac_gives_one_shot_values() {
        let g = corpus("big_match").unwrap();
        let op = GameOperator::new(&g);
        let v = v_theta(&op, &Evaluation::dirac(), 1e-9).unwrap();
        let one = op.apply(1.0, &ValueFunction::zeros(3)).unwrap();
        assert_eq!(v.values, one.values);
    }

    #[test]
    fn cycle2_examples() {
        let g = corpus("cycle2").unwrap();
        let op = GameOperator::new(&g);
        let v = v_theta(&op, &Evaluation::n_stage(2).unwrap(), 1e-9).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
        // oracle: v0 = (1 - l) v1, v1 = l + (1 - l) v0
        let l: f64 = 0.5;
        let v1 = l / (1.0 - (1.0 - l) * (1.0 - l));
        let v0 = (1.0 - l) * v1;
        let v = v_discounted(&op, l, 1e-12).unwrap();
        assert!((v[0] - v0).abs() <= v.error_bound + 1e-15 && (v[0] - 1.0 / 3.0).abs() < 1e-11);
        assert!((v[1] - v1).abs() <= v.error_bound + 1e-15 && (v[1] - 2.0 / 3.0).abs() < 1e-11);
        let v = v_n_stage(&op, 2).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absorbing_value_is_constant() {
        let g = corpus("absorbing").unwrap();
        let op = GameOperator::new(&g);
        for l in [1.0, 0.5, 0.01] {
            assert!((v_discounted(&op, l, 1e-10).unwrap()[0] - 0.75).abs() < 1e-10);
        }
        assert!((v_n_stage(&op, 17).unwrap()[0] - 0.75).abs() < 1e-12);
        let est = asymptotic_value_estimate(&op, 1e-8, 10).unwrap();
        assert!(est.converged && est.rows.len() <= 2);
        assert!((est.estimate[0] - 0.75).abs() < 1e-8);
    }

    #[test]
    fn big_match_discounted_half() {
        let g = corpus("big_match").unwrap();
        let op = GameOperator::new(&g);
        let v = v_discounted(&op, 0.5, 1e-12).unwrap();
        assert!((v[0] - 0.5).abs() <= 1e-12 + v.error_bound);
        assert!((v_n_stage(&op, 1).unwrap()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn discounted_through_tail_matches_fixed_point() {
        let g = random_game(5, 3, 2, 2).unwrap();
        let op = GameOperator::new(&g);
        let eps = 1e-8;
        for l in [0.3, 0.05] {
            let a = v_theta(&op, &Evaluation::discounted(l).unwrap(), eps).unwrap();
            let b = v_discounted(&op, l, eps).unwrap();
            assert!(a.sup_distance(&b) <= a.error_bound + b.error_bound);
            assert!(a.error_bound <= eps);
        }
    }

    #[test]
    fn truncated_route_agrees() {
        let g = random_game(9, 2, 2, 2).unwrap();
        let op = GameOperator::new(&g);
        let theta = Evaluation::from_parts(vec![0.3, 0.1, 0.2], Some(crate::GeometricTail { weight: 0.08, discount: 0.2 })).unwrap();
        let a = v_theta(&op, &theta, 1e-6).unwrap();
        let b = v_theta_truncated(&op, &theta, 1e-6).unwrap();
        assert!(a.sup_distance(&b) <= a.error_bound + b.error_bound);
        assert!(b.error_bound <= 1e-6);
    }

    #[test]
    fn n_stage_matches_v_theta() {
        let g = random_game(2, 3, 3, 2).unwrap();
        let op = GameOperator::new(&g);
        let a = v_n_stage(&op, 12).unwrap();
        let b = v_theta(&op, &Evaluation::n_stage(12).unwrap(), 1e-9).unwrap();
        assert!(a.sup_distance(&b) <= 1e-12);
    }

    #[test]
    fn iteration_cap_reports_bound() {
        let g = corpus("cycle2").unwrap();
        let op = GameOperator::new(&g);
        let opts = FixedPointOptions { warm_start: None, max_iterations: Some(3) };
        match v_discounted_with(&op, 0.01, 1e-9, &opts) {
            Err(Error::NotConverged { iterations: 3, bound }) => assert!(bound > 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        assert!(v_discounted(&op, 0.0, 1e-3).is_err());
        assert!(v_theta(&op, &Evaluation::dirac(), 0.0).is_err());
    }

    #[test]
    fn counterexample_two_stage_oracle() {
        // phi = 0 and theta = (1/2, 1/2): quitting at once reaches (1, 1)
        // and collects 1 at stage 2, while continuing pays nothing
        let params = counterexample::CounterexampleParams {
            law: counterexample::AbsorptionLaw::Constant(0.0),
            max_count: 4,
        };
        let g = counterexample::counterexample_mdp(&params).unwrap();
        let op = GameOperator::new(&g);
        let v = v_theta(&op, &Evaluation::n_stage(2).unwrap(), 1e-9).unwrap();
        let lay = counterexample::Layout { max_count: 4 };
        let quit: f64 = 0.5 * 0.0 + 0.5 * 1.0;
        let cont = 0.5 * 0.0 + 0.5 * 0.0;
        assert!((v[lay.waiting(1)] - quit.max(cont)).abs() < 1e-12);
        assert_eq!(v[lay.absorbed()], 0.0);
    }

    #[test]
    fn holder_fit_recovers_square_root() {
        let samples: Vec<(f64, ValueFunction)> = [0.5, 0.25, 0.1, 0.05, 0.01]
            .iter()
            .map(|&l| (l, ValueFunction::exact(vec![2.0 * math::sqrt(l)])))
            .collect();
        let fit = fit_holder(&samples, 4).unwrap();
        assert_eq!(fit.exponent, 0.5);
        assert!((fit.constant - 2.0).abs() < 1e-12);
        assert!(fit.bound(0.2, 0.3) >= 2.0 * (math::sqrt(0.3) - math::sqrt(0.2)) - 1e-12);
    }
}
