//! Evaluations: probability weights over stages, and the zero sequence.
//!
//! An [`Evaluation`] is stored as a finite head `w_1..w_H` followed by an
//! optional geometric tail `w_{H+k} = a (1 - lambda)^(k-1)`. This covers the
//! n-stage, discounted, piecewise-constant and piecewise-discounted families
//! exactly, and keeps shifts in closed form.

mod approx;
mod blocks;

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, CompensatedSum};
use crate::{Error, Result, MASS_TOL};

pub use approx::{DistanceMode, PwcApproximation, ApproxCase, MAX_APPROX_HEAD};
pub use blocks::{Block, BlockDecomposition};

/// Same as [`Evaluation::n_stage`].
pub fn make_n_stage(n: usize) -> Result<Evaluation> {
    Evaluation::n_stage(n)
}

/// Same as [`Evaluation::discounted`].
pub fn make_discounted(lambda: f64) -> Result<Evaluation> {
    Evaluation::discounted(lambda)
}

/// Same as [`Evaluation::piecewise_constant`].
pub fn make_piecewise_constant(levels: &[f64], breakpoints: &[usize]) -> Result<Evaluation> {
    Evaluation::piecewise_constant(levels, breakpoints)
}

/// Same as [`Evaluation::piecewise_discounted`].
pub fn make_piecewise_discounted(pieces: &[DiscountedPiece]) -> Result<Evaluation> {
    Evaluation::piecewise_discounted(pieces)
}

/// The approximation of [`Evaluation::approximate_discounted`] with its
/// certified l1 bound.
pub fn approx_discounted_by_pwc(lambda: f64, epsilon: f64) -> Result<(Evaluation, f64)> {
    let a = Evaluation::approximate_discounted(lambda, epsilon)?;
    Ok((a.evaluation, a.bound))
}

/// Geometric tail `w_{H+k} = weight * (1 - discount)^(k-1)` for `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricTail {
    /// First tail weight `a`.
    pub weight: f64,
    /// Discount `lambda` in `(0, 1]`; the ratio between consecutive weights is `1 - lambda`.
    pub discount: f64,
}

impl GeometricTail {
    pub fn ratio(&self) -> f64 {
        1.0 - self.discount
    }

    pub fn mass(&self) -> f64 {
        self.weight / self.discount
    }

    /// Weight at offset `k >= 0` into the tail.
    fn weight_at(&self, k: f64) -> f64 {
        self.weight * math::survival(self.discount, k)
    }
}

/// One piece of a piecewise-discounted evaluation: stages from `start` on
/// carry `weight * (1 - discount)^(m - start)` until the next piece begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedPiece {
    pub weight: f64,
    pub discount: f64,
    pub start: usize,
}

/// A probability distribution over stages `1, 2, ...`, or the zero sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    head: Vec<f64>,
    tail: Option<GeometricTail>,
}

impl Evaluation {
    /// The zero sequence.
    pub fn zero() -> Self {
        Self { head: Vec::new(), tail: None }
    }

    /// Dirac mass at stage 1.
    pub fn dirac() -> Self {
        Self { head: vec![1.0], tail: None }
    }

    /// Uniform weight `1/n` on the first `n` stages.
    pub fn n_stage(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter { name: "n", value: 0.0 });
        }
        Ok(Self { head: vec![1.0 / n as f64; n], tail: None })
    }

    /// `lambda (1 - lambda)^(m-1)` at every stage `m`.
    pub fn discounted(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Parameter { name: "lambda", value: lambda });
        }
        if lambda == 1.0 {
            return Ok(Self::dirac());
        }
        Ok(Self { head: Vec::new(), tail: Some(GeometricTail { weight: lambda, discount: lambda }) })
    }

    /// Level `levels[p]` on stages `breakpoints[p] .. breakpoints[p+1]`, zero
    /// from `breakpoints[last]` on.
    pub fn piecewise_constant(levels: &[f64], breakpoints: &[usize]) -> Result<Self> {
        if levels.is_empty() || breakpoints.len() != levels.len() + 1 || breakpoints[0] != 1 {
            return Err(Error::Breakpoints);
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Breakpoints);
        }
        let mut head = Vec::with_capacity(breakpoints[levels.len()] - 1);
        for (p, &level) in levels.iter().enumerate() {
            let len = breakpoints[p + 1] - breakpoints[p];
            head.extend(core::iter::repeat_n(level, len));
        }
        Self::from_parts(head, None)
    }

    /// Piecewise-discounted evaluation; the last piece becomes the geometric tail.
    pub fn piecewise_discounted(pieces: &[DiscountedPiece]) -> Result<Self> {
        let Some(last) = pieces.last() else {
            return Err(Error::Breakpoints);
        };
        if pieces[0].start != 1 || pieces.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(Error::Breakpoints);
        }
        for piece in pieces {
            if !(0.0..=1.0).contains(&piece.discount) {
                return Err(Error::Parameter { name: "discount", value: piece.discount });
            }
            if !(piece.weight >= 0.0 && piece.weight.is_finite()) {
                return Err(Error::Parameter { name: "weight", value: piece.weight });
            }
        }
        let mut head = Vec::new();
        for w in pieces.windows(2) {
            let (piece, next) = (w[0], w[1]);
            for k in 0..next.start - piece.start {
                head.push(piece.weight * math::survival(piece.discount, k as f64));
            }
        }
        let tail = if last.weight == 0.0 {
            None
        } else if last.discount == 0.0 {
            return Err(Error::Mass { mass: f64::INFINITY });
        } else {
            Some(GeometricTail { weight: last.weight, discount: last.discount })
        };
        Self::from_parts(head, tail)
    }

    /// Checked constructor from raw parts.
    pub fn from_parts(mut head: Vec<f64>, mut tail: Option<GeometricTail>) -> Result<Self> {
        for (m, &w) in head.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Weight { stage: m + 1, weight: w });
            }
        }
        if let Some(t) = tail {
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(Error::Weight { stage: head.len() + 1, weight: t.weight });
            }
            if !(t.discount > 0.0 && t.discount <= 1.0) {
                return Err(Error::Parameter { name: "discount", value: t.discount });
            }
            if t.weight == 0.0 {
                tail = None;
            } else if t.discount == 1.0 {
                head.push(t.weight);
                tail = None;
            }
        }
        if tail.is_none() {
            while head.last() == Some(&0.0) {
                head.pop();
            }
        }
        let ev = Self { head, tail };
        let mass = ev.mass();
        if (mass - 1.0).abs() > MASS_TOL && mass.abs() > MASS_TOL {
            return Err(Error::Mass { mass });
        }
        if mass.abs() <= MASS_TOL {
            return Ok(Self::zero());
        }
        Ok(ev)
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn tail(&self) -> Option<GeometricTail> {
        self.tail
    }

    pub fn is_zero(&self) -> bool {
        self.head.iter().all(|&w| w == 0.0) && self.tail.is_none()
    }

    /// Number of stages after which every weight vanishes; `None` when the
    /// evaluation has a geometric tail.
    pub fn support_len(&self) -> Option<usize> {
        match self.tail {
            Some(_) => None,
            None => Some(self.head.len()),
        }
    }

    /// Weight of stage `m >= 1`.
    pub fn weight(&self, m: usize) -> f64 {
        debug_assert!(m >= 1);
        if m <= self.head.len() {
            return self.head[m - 1];
        }
        match self.tail {
            Some(t) => t.weight_at((m - self.head.len() - 1) as f64),
            None => 0.0,
        }
    }

    /// The first `n` weights.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|m| self.weight(m)).collect()
    }

    pub fn mass(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for &w in &self.head {
            acc.add(w);
        }
        if let Some(t) = self.tail {
            acc.add(t.mass());
        }
        acc.value()
    }

    /// Remaining mass `sum_{m >= r} w_m`.
    pub fn tail_mass(&self, r: usize) -> f64 {
        debug_assert!(r >= 1);
        let h = self.head.len();
        if r > h {
            return match self.tail {
                Some(t) => t.weight_at((r - h - 1) as f64) / t.discount,
                None => 0.0,
            };
        }
        let mut acc = CompensatedSum::new();
        // smallest terms first
        if let Some(t) = self.tail {
            acc.add(t.mass());
        }
        for &w in self.head[r - 1..].iter().rev() {
            acc.add(w);
        }
        acc.value()
    }

    pub fn sup_weight(&self) -> f64 {
        let head_max = self.head.iter().fold(0.0f64, |m, &w| m.max(w));
        match self.tail {
            Some(t) => head_max.max(t.weight),
            None => head_max,
        }
    }

    /// True when weights never increase from one stage to the next.
    pub fn is_decreasing(&self) -> bool {
        if self.head.windows(2).any(|w| w[1] > w[0]) {
            return false;
        }
        match (self.tail, self.head.last()) {
            (Some(t), Some(&last)) => t.weight <= last,
            _ => true,
        }
    }

    /// Relative weight of stage `m` against the remaining mass; 0 on a
    /// zero-weight stage.
    pub fn stage_discount(&self, m: usize) -> f64 {
        debug_assert!(m >= 1);
        if m > self.head.len() {
            return self.tail.map_or(0.0, |t| t.discount);
        }
        let w = self.head[m - 1];
        if w == 0.0 {
            return 0.0;
        }
        (w / self.tail_mass(m)).min(1.0)
    }

    /// `stage_discount(m)` for `m = 1..=n`, with one backward pass over the head.
    pub fn stage_discounts(&self, n: usize) -> Vec<f64> {
        let h = self.head.len();
        let mut out = vec![0.0; n];
        let tail_discount = self.tail.map_or(0.0, |t| t.discount);
        for m in (h + 1)..=n {
            out[m - 1] = tail_discount;
        }
        let mut remaining = CompensatedSum::new();
        if let Some(t) = self.tail {
            remaining.add(t.mass());
        }
        for m in (1..=h).rev() {
            let w = self.head[m - 1];
            remaining.add(w);
            if m <= n {
                out[m - 1] = if w == 0.0 { 0.0 } else { (w / remaining.value()).min(1.0) };
            }
        }
        out
    }

    /// The shift: the evaluation seen from stage 2 on, renormalized. Zero when
    /// stage 1 carries all the mass, and zero for the zero sequence.
    pub fn shift(&self) -> Self {
        self.r_shift(2)
    }

    /// The r-shift: `w_{m+r-1} / sum_{m' >= r} w_{m'}`, or zero when no mass
    /// remains from stage `r` on.
    pub fn r_shift(&self, r: usize) -> Self {
        assert!(r >= 1, "r-shift is defined for r >= 1");
        if r == 1 || self.is_zero() {
            return self.clone();
        }
        let h = self.head.len();
        if r > h {
            // deep in the tail: the remainder is exactly a discounted evaluation
            return match self.tail {
                Some(t) => Self::discounted(t.discount).expect("tail discount is valid"),
                None => Self::zero(),
            };
        }
        let rest = self.tail_mass(r);
        if rest <= 0.0 {
            return Self::zero();
        }
        let head: Vec<f64> = self.head[r - 1..].iter().map(|&w| w / rest).collect();
        let tail = self.tail.map(|t| GeometricTail { weight: t.weight / rest, discount: t.discount });
        let mut out = Self { head, tail };
        if out.tail.is_none() {
            while out.head.last() == Some(&0.0) {
                out.head.pop();
            }
        }
        out
    }

    /// `sum_m |w_m - w'_m|`, in closed form on the geometric tails.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        let horizon = self.head.len().max(other.head.len());
        let mut acc = CompensatedSum::new();
        for m in 1..=horizon {
            acc.add((self.weight(m) - other.weight(m)).abs());
        }
        let first = |ev: &Self| -> (f64, f64) {
            match ev.tail {
                Some(t) => (ev.weight(horizon + 1), t.discount),
                None => (0.0, 1.0),
            }
        };
        let (c1, l1) = first(self);
        let (c2, l2) = first(other);
        acc.add(geometric_l1(c1, l1, c2, l2));
        acc.value()
    }
}

/// `sum_{k >= 0} |c1 (1-l1)^k - c2 (1-l2)^k|` in closed form.
///
/// The difference changes sign at most once, so the sum equals the largest
/// value of `|A_K| + |B_K|` over split points `K`, where `A_K` and `B_K` are
/// the signed partial sums before and after `K`.
fn geometric_l1(c1: f64, l1: f64, c2: f64, l2: f64) -> f64 {
    if c1 == 0.0 && c2 == 0.0 {
        return 0.0;
    }
    if c1 == 0.0 {
        return c2 / l2;
    }
    if c2 == 0.0 {
        return c1 / l1;
    }
    if l1 == l2 {
        return (c1 - c2).abs() / l1;
    }
    let partial = |c: f64, l: f64, k: f64| c * math::one_minus_survival(l, k) / l;
    let total1 = c1 / l1;
    let total2 = c2 / l2;
    let split_value = |k: f64| {
        let a = partial(c1, l1, k) - partial(c2, l2, k);
        let b = (total1 - partial(c1, l1, k)) - (total2 - partial(c2, l2, k));
        a.abs() + b.abs()
    };
    let mut candidates: Vec<f64> = vec![0.0, 1.0, 2.0];
    if l1 < 1.0 && l2 < 1.0 {
        // c1 r1^k = c2 r2^k
        let k_star = math::ln(c2 / c1) / (math::ln_1p(-l1) - math::ln_1p(-l2));
        if k_star.is_finite() && k_star > 0.0 {
            let base = math::floor(k_star.min(1e15));
            for d in [-1.0, 0.0, 1.0, 2.0] {
                if base + d >= 0.0 {
                    candidates.push(base + d);
                }
            }
        }
    }
    candidates.into_iter().map(split_value).fold(0.0, f64::max)
}
