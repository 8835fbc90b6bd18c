//! Piecewise-constant approximation: distances to the p-piece family and the
//! impatience measure built on it.

use alloc::vec;
use alloc::vec::Vec;

use super::Evaluation;
use crate::math::{self, CompensatedSum};
use crate::{Error, Result};

/// Largest head the approximation routines will materialize.
pub const MAX_APPROX_HEAD: usize = 1 << 24;

const EXACT_MAX_HORIZON: usize = 20;
const EXACT_MAX_PIECES: usize = 4;

/// How `distance_to_pwc` computes the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// Exhaustive search; finite support of at most 20 stages and `p <= 4`.
    ExactTiny,
    /// Distance to an explicitly constructed member of the family.
    #[default]
    UpperBound,
}

/// Which construction `approximate_discounted` used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxCase {
    /// Keep the first `p - 1` weights and lump the remaining mass on stage `p`.
    Truncation,
    /// Constant blocks of length `block_len` carrying the exact block mass,
    /// followed by one stage holding the leftover mass.
    Blocks { block_len: usize },
}

/// Piecewise-constant approximation of a discounted evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PwcApproximation {
    pub evaluation: Evaluation,
    /// Upper bound on the number of constant pieces.
    pub pieces: usize,
    /// Certified upper bound on the l1 distance to the discounted evaluation.
    pub bound: f64,
    /// Tolerance actually used (`1/q` for the integer `q = ceil(1/epsilon)`).
    pub epsilon: f64,
    pub case: ApproxCase,
}

impl Evaluation {
    /// Approximates the `lambda`-discounted evaluation by a member of the
    /// `epsilon^-3`-piece constant family within l1 distance `epsilon`.
    ///
    /// `epsilon` is rounded down to `1/ceil(1/epsilon)`. The truncation case is
    /// used when `lambda >= epsilon^3` and its bound `2 (1 - lambda)^(p-1)`
    /// already meets `epsilon`; every other discount goes through the block
    /// construction, whose block levels are block averages so that the
    /// leftover lump is never negative.
    pub fn approximate_discounted(lambda: f64, epsilon: f64) -> Result<PwcApproximation> {
        if !(epsilon > 0.0 && epsilon <= 0.1) {
            return Err(Error::Parameter { name: "epsilon", value: epsilon });
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Parameter { name: "lambda", value: lambda });
        }
        let q = math::ceil(1.0 / epsilon - 1e-9) as usize;
        let eps = 1.0 / q as f64;
        let pieces = q * q * q;

        let truncation_bound = 2.0 * math::survival(lambda, (pieces - 1) as f64);
        if lambda >= eps * eps * eps && truncation_bound <= eps {
            let mut head: Vec<f64> =
                (0..pieces - 1).map(|k| lambda * math::survival(lambda, k as f64)).collect();
            head.push(math::survival(lambda, (pieces - 1) as f64));
            let evaluation = Evaluation::from_parts(head, None)?;
            return Ok(PwcApproximation {
                evaluation,
                pieces,
                bound: truncation_bound,
                epsilon: eps,
                case: ApproxCase::Truncation,
            });
        }

        let block_len = (math::floor(eps * eps / lambda) as usize).max(1);
        let blocks = pieces - 1;
        let len = blocks
            .checked_mul(block_len)
            .and_then(|n| n.checked_add(1))
            .filter(|&n| n <= MAX_APPROX_HEAD)
            .ok_or(Error::Size { what: "approximation head", limit: MAX_APPROX_HEAD })?;
        let mut head = Vec::with_capacity(len);
        for r in 0..blocks {
            let start = (r * block_len) as f64;
            let mass = math::survival(lambda, start) * math::one_minus_survival(lambda, block_len as f64);
            let level = mass / block_len as f64;
            head.extend(core::iter::repeat_n(level, block_len));
        }
        let leftover = math::survival(lambda, (blocks * block_len) as f64);
        head.push(leftover);
        // the block levels carry exact masses, so renormalize away rounding only
        let evaluation = Evaluation::from_parts(head, None)?;

        // within a block the weights span a factor (1 - lambda)^(L-1)
        let spread = math::one_minus_survival(lambda, (block_len - 1) as f64);
        let bound = (1.0 - leftover) * spread / (1.0 - spread) + 2.0 * leftover;
        Ok(PwcApproximation {
            evaluation,
            pieces,
            bound,
            epsilon: eps,
            case: ApproxCase::Blocks { block_len },
        })
    }

    /// l1 distance to the family of `p`-piece constant evaluations.
    pub fn distance_to_pwc(&self, p: usize, mode: DistanceMode) -> Result<f64> {
        if p == 0 {
            return Err(Error::Parameter { name: "p", value: 0.0 });
        }
        if self.is_zero() {
            return Err(Error::Precondition("distance to a family of probability sequences needs mass 1"));
        }
        match mode {
            DistanceMode::ExactTiny => exact_distance(self, p),
            DistanceMode::UpperBound => Ok(greedy_distance(self, p)),
        }
    }

    /// `max(sup_m w_m, distance_to_pwc(p))`.
    pub fn impatience(&self, p: usize, mode: DistanceMode) -> Result<f64> {
        Ok(self.sup_weight().max(self.distance_to_pwc(p, mode)?))
    }
}

/// Exhaustive minimization over breakpoints `1 = b_1 <= ... <= b_{p+1} <= H+1`
/// (empty pieces allowed) and, for fixed breakpoints, over levels.
///
/// With breakpoints fixed the objective is a sum of convex piecewise-linear
/// functions of one level each, under one linear mass constraint, so some
/// optimum has every level but one at a kink of its own term (one of the
/// weights in its piece, or 0). The remaining level is fixed by the mass
/// constraint. Pieces never need to reach past the support: moving such mass
/// back inside the support costs no more than it saves.
fn exact_distance(ev: &Evaluation, p: usize) -> Result<f64> {
    let horizon = match ev.support_len() {
        Some(h) if h <= EXACT_MAX_HORIZON => h,
        _ => return Err(Error::Size { what: "exact distance horizon", limit: EXACT_MAX_HORIZON }),
    };
    if p > EXACT_MAX_PIECES {
        return Err(Error::Size { what: "exact distance piece count", limit: EXACT_MAX_PIECES });
    }
    let w = ev.head().to_vec();
    let mut best = f64::INFINITY;
    let mut bps = vec![1usize; p + 1];
    enumerate_breakpoints(&mut bps, 1, horizon + 1, &mut |bps| {
        let end = bps[p];
        if end < 2 {
            return;
        }
        let uncovered: f64 = w[end - 1..].iter().sum();
        let pieces: Vec<&[f64]> =
            bps.windows(2).filter(|b| b[1] > b[0]).map(|b| &w[b[0] - 1..b[1] - 1]).collect();
        let cost = best_levels(&pieces) + uncovered;
        if cost < best {
            best = cost;
        }
    });
    Ok(best)
}

fn enumerate_breakpoints(bps: &mut [usize], idx: usize, max: usize, visit: &mut impl FnMut(&[usize])) {
    if idx == bps.len() {
        visit(bps);
        return;
    }
    for b in bps[idx - 1]..=max {
        bps[idx] = b;
        enumerate_breakpoints(bps, idx + 1, max, visit);
    }
}

fn piece_cost(piece: &[f64], level: f64) -> f64 {
    piece.iter().map(|&x| (x - level).abs()).sum()
}

/// Minimum of `sum_i sum_{x in piece_i} |x - a_i|` subject to
/// `sum_i len_i a_i = 1`, `a_i >= 0`.
fn best_levels(pieces: &[&[f64]]) -> f64 {
    let kinks: Vec<Vec<(f64, f64)>> = pieces
        .iter()
        .map(|piece| {
            let mut ks: Vec<f64> = piece.iter().copied().chain(core::iter::once(0.0)).collect();
            ks.sort_by(f64::total_cmp);
            ks.dedup();
            ks.into_iter().map(|k| (k, piece_cost(piece, k))).collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    for free in 0..pieces.len() {
        let others: Vec<usize> = (0..pieces.len()).filter(|&i| i != free).collect();
        let mut choice = vec![0usize; others.len()];
        loop {
            let mut mass = 0.0;
            let mut cost = 0.0;
            for (slot, &i) in others.iter().enumerate() {
                let (level, c) = kinks[i][choice[slot]];
                mass += level * pieces[i].len() as f64;
                cost += c;
            }
            let level = (1.0 - mass) / pieces[free].len() as f64;
            if level >= -1e-15 {
                let total = cost + piece_cost(pieces[free], level.max(0.0));
                if total < best {
                    best = total;
                }
            }
            // odometer over the kink choices of the other pieces
            let mut slot = 0;
            loop {
                if slot == others.len() {
                    break;
                }
                choice[slot] += 1;
                if choice[slot] < kinks[others[slot]].len() {
                    break;
                }
                choice[slot] = 0;
                slot += 1;
            }
            if slot == others.len() {
                break;
            }
        }
    }
    best
}

/// Best of an equal-mass and an equal-length segmentation of the effective
/// support; levels are segment averages and the mass beyond the effective
/// support is spread over the last segment.
fn greedy_distance(ev: &Evaluation, p: usize) -> f64 {
    let horizon = effective_horizon(ev);
    let w = ev.weights(horizon);
    let total: f64 = math::compensated_sum(w.iter().copied());

    let mut candidates: Vec<Vec<usize>> = Vec::new();

    let mut mass_cuts = vec![1usize];
    let mut acc = 0.0;
    let mut next = 1;
    for (m, &x) in w.iter().enumerate() {
        acc += x;
        while next < p && acc >= total * next as f64 / p as f64 {
            mass_cuts.push(m + 2);
            next += 1;
        }
    }
    mass_cuts.push(horizon + 1);
    candidates.push(mass_cuts);

    let length_cuts: Vec<usize> =
        (0..=p).map(|k| 1 + math::floor(k as f64 * horizon as f64 / p as f64 + 0.5) as usize).collect();
    candidates.push(length_cuts);

    candidates
        .into_iter()
        .map(|mut cuts| {
            cuts.sort_unstable();
            cuts.dedup();
            cuts.retain(|&c| c <= horizon + 1);
            let member = segment_average(&w, &cuts, total);
            ev.l1_distance(&member)
        })
        .fold(f64::INFINITY, f64::min)
}

fn effective_horizon(ev: &Evaluation) -> usize {
    match ev.support_len() {
        Some(h) => h,
        None => {
            let mut h = ev.head().len().max(1);
            while ev.tail_mass(h + 1) > 1e-9 && h < MAX_APPROX_HEAD / 4 {
                h *= 2;
            }
            h
        }
    }
}

fn segment_average(w: &[f64], cuts: &[usize], covered: f64) -> Evaluation {
    let mut head = vec![0.0; cuts[cuts.len() - 1] - 1];
    let segments = cuts.len() - 1;
    for s in 0..segments {
        let (a, b) = (cuts[s], cuts[s + 1]);
        let mut mass = CompensatedSum::new();
        for &x in &w[a - 1..b - 1] {
            mass.add(x);
        }
        let mut level = mass.value() / (b - a) as f64;
        if s + 1 == segments {
            level += (1.0 - covered) / (b - a) as f64;
        }
        for slot in &mut head[a - 1..b - 1] {
            *slot = level;
        }
    }
    Evaluation::from_parts(head, None).unwrap_or_else(|_| Evaluation::zero())
}
