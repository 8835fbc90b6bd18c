//! Decomposition of a decreasing evaluation into stretches that are each
//! well approximated by a single discounted evaluation.

use alloc::vec::Vec;

use super::Evaluation;
use crate::{Error, Result};

/// One stretch of a [`BlockDecomposition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    /// First stage `m_r` of the block.
    pub start: usize,
    /// `lambda_r`: the stage discount at `start`.
    pub discount: f64,
    /// `pi_r`: remaining mass from `start` on.
    pub tail_mass: f64,
    /// Number of stage offsets over which the geometric envelope holds;
    /// `None` when it holds up to the cutoff stage and beyond.
    pub envelope_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub blocks: Vec<Block>,
    pub epsilon: f64,
    /// Last stage whose remaining mass is still at least `epsilon`.
    pub cutoff: usize,
}

impl Evaluation {
    /// Splits a decreasing, positive evaluation into blocks.
    ///
    /// From a block start `t`, the block extends over the longest run of
    /// offsets `m = 1, 2, ...` such that
    /// `(1 - eps) mu_m <= lambda (1 - lambda)^(m-1) <= (1 + eps) mu_m`,
    /// where `mu` is the r-shift at `t` and `lambda = mu_1`. Blocks are
    /// produced while their start does not exceed the cutoff stage.
    pub fn block_decomposition(&self, epsilon: f64) -> Result<BlockDecomposition> {
        if !(epsilon > 0.0 && epsilon < 0.1) {
            return Err(Error::Parameter { name: "epsilon", value: epsilon });
        }
        if self.is_zero() {
            return Err(Error::Precondition("block decomposition needs a nonzero evaluation"));
        }
        if !self.is_decreasing() {
            return Err(Error::Precondition("block decomposition needs decreasing weights"));
        }
        let cutoff = self.cutoff_stage(epsilon);
        if (1..=cutoff.min(self.head().len())).any(|m| self.weight(m) <= 0.0) {
            return Err(Error::Precondition("block decomposition needs positive weights up to the cutoff"));
        }

        let mut blocks = Vec::new();
        let mut start = 1;
        loop {
            let rest = self.tail_mass(start);
            let discount = self.stage_discount(start);
            // scan up to one stage past the cutoff; later offsets never matter
            let scan = cutoff + 1 - start + 1;
            let mut len = 1;
            let mut broken = false;
            let mut geo = discount;
            for m in 2..=scan {
                geo *= 1.0 - discount;
                let mu = self.weight(start + m - 1) / rest;
                if !((1.0 - epsilon) * mu <= geo && geo <= (1.0 + epsilon) * mu) {
                    broken = true;
                    break;
                }
                len = m;
            }
            let envelope_len = broken.then_some(len);
            blocks.push(Block { start, discount, tail_mass: rest, envelope_len });
            match envelope_len {
                Some(l) if start + l <= cutoff => start += l,
                _ => break,
            }
        }
        Ok(BlockDecomposition { blocks, epsilon, cutoff })
    }

    /// `max { m : sum_{m' >= m} w_m' >= epsilon }`.
    fn cutoff_stage(&self, epsilon: f64) -> usize {
        let h = self.head().len();
        let mut m = 1;
        while m < h && self.tail_mass(m + 1) >= epsilon {
            m += 1;
        }
        if m == h.max(1) {
            if let Some(t) = self.tail() {
                // remaining mass from stage h + 1 + k is (a / lambda) (1 - lambda)^k
                let base = t.mass();
                if base >= epsilon {
                    let k = if t.discount >= 1.0 {
                        0.0
                    } else {
                        crate::math::floor(crate::math::ln(epsilon / base) / crate::math::ln_1p(-t.discount))
                    };
                    let mut stage = h + 1 + k as usize;
                    // guard the floating-point floor on both sides
                    while stage > h + 1 && self.tail_mass(stage) < epsilon {
                        stage -= 1;
                    }
                    while self.tail_mass(stage + 1) >= epsilon {
                        stage += 1;
                    }
                    m = stage;
                }
            }
        }
        m
    }
}

impl BlockDecomposition {
    /// Re-checks the envelope condition on every block, up to the cutoff.
    pub fn envelope_holds(&self, ev: &Evaluation) -> bool {
        self.blocks.iter().enumerate().all(|(r, b)| {
            let limit = match (b.envelope_len, self.blocks.get(r + 1)) {
                (_, Some(next)) => next.start - b.start,
                (Some(l), None) => l,
                (None, None) => self.cutoff + 1 - b.start,
            };
            let rest = ev.tail_mass(b.start);
            (1..=limit).all(|m| {
                let mu = ev.weight(b.start + m - 1) / rest;
                let geo = b.discount * crate::math::survival(b.discount, (m - 1) as f64);
                let slack = 1e-12 * mu;
                (1.0 - self.epsilon) * mu <= geo + slack && geo <= (1.0 + self.epsilon) * mu + slack
            })
        })
    }

    /// True when, for every consecutive pair of blocks, either the remaining
    /// mass drops by a factor `1 + epsilon` or the discount does not increase.
    pub fn almost_decreasing(&self) -> bool {
        self.blocks.windows(2).all(|w| {
            w[1].tail_mass <= w[0].tail_mass / (1.0 + self.epsilon) * (1.0 + 1e-12) || w[1].discount <= w[0].discount
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discounted_is_a_single_block() {
        let lambda = 0.05;
        let d = Evaluation::discounted(lambda).unwrap().block_decomposition(0.05).unwrap();
        assert_eq!(d.blocks.len(), 1);
        let b = d.blocks[0];
        assert_eq!((b.start, b.discount, b.envelope_len), (1, lambda, None));
        assert!((b.tail_mass - 1.0).abs() < 1e-15);
        // (0.95)^(m-1) >= 0.05 up to m = 59
        assert_eq!(d.cutoff, 59);
    }

    #[test]
    fn n_stage_first_block_matches_direct_scan() {
        let n = 40;
        let eps = 0.09;
        let ev = Evaluation::n_stage(n).unwrap();
        let d = ev.block_decomposition(eps).unwrap();
        // direct scan: largest m with (1-eps)/n <= (1/n)(1-1/n)^(m-1) <= (1+eps)/n
        let mut expected = 0;
        for m in 1..=n {
            let geo = (1.0 - 1.0 / n as f64).powi(m as i32 - 1);
            if geo >= 1.0 - eps {
                expected = m;
            } else {
                break;
            }
        }
        assert_eq!(d.blocks[0].envelope_len, Some(expected));
        assert_eq!(d.blocks[1].start, expected + 1);
        assert!(d.envelope_holds(&ev));
        assert!(d.almost_decreasing());
    }

    #[test]
    fn concentrated_evaluation_gives_one_block() {
        let ev = Evaluation::from_parts(alloc::vec![0.95, 0.05], None).unwrap();
        let d = ev.block_decomposition(0.06).unwrap();
        assert_eq!(d.cutoff, 1);
        assert_eq!(d.blocks.len(), 1);
        assert_eq!(Evaluation::dirac().block_decomposition(0.05).unwrap().blocks.len(), 1);
    }

    #[test]
    fn rejects_increasing_weights() {
        let ev = Evaluation::from_parts(alloc::vec![0.2, 0.3, 0.5], None).unwrap();
        assert!(matches!(ev.block_decomposition(0.05), Err(Error::Precondition(_))));
        assert!(Evaluation::n_stage(3).unwrap().block_decomposition(0.1).is_err());
    }

    #[test]
    fn tail_masses_are_exact() {
        let ev = Evaluation::n_stage(300).unwrap();
        let d = ev.block_decomposition(0.02).unwrap();
        assert!(d.blocks.len() > 3);
        assert_eq!(d.blocks[0].tail_mass, 1.0);
        for b in &d.blocks {
            assert!((b.tail_mass - ev.tail_mass(b.start)).abs() < 1e-12);
        }
        assert!(d.blocks.windows(2).all(|w| w[0].start < w[1].start));
    }
}
