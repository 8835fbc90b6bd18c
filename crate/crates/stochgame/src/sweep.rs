//! Value sweeps along a one-parameter family of evaluations.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `family` | `n_stage`, `discounted`, `pwc`, `pwd` or `custom` |
//! | `parameter` | the schedule entry; the 1-based position for `custom` |
//! | `evaluation` | short descriptor of the evaluation |
//! | `sup_weight` | largest stage weight |
//! | `impatience` | upper bound on the impatience with `p` pieces |
//! | `error_bound` | certified sup-norm error of the values |
//! | `v:<label>` | one column per state |

use std::io::Write;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stochgame_core::evaluation::DistanceMode;
use stochgame_core::values::v_theta;
use stochgame_core::{GameOperator, GameSpec};

use crate::io::{EvalSpec, PieceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Family {
    NStage,
    Discounted,
    /// `p` blocks of length `L`, block `r` carrying mass proportional to `2^-r`.
    Pwc,
    /// `p` discounted pieces of length `ceil(1 / lambda)`, piece `r` with
    /// discount `lambda / 2^r` and mass `1 / p`.
    Pwd,
    /// An explicit list of evaluations.
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::NStage => "n_stage",
            Family::Discounted => "discounted",
            Family::Pwc => "pwc",
            Family::Pwd => "pwd",
            Family::Custom => "custom",
        }
    }

    /// The member of the family at `param`.
    pub fn member(self, param: f64, p: usize) -> Result<EvalSpec> {
        if p == 0 {
            bail!("the number of pieces must be positive");
        }
        let count = || -> Result<usize> {
            if param >= 1.0 && param.fract() == 0.0 && param < 1e9 {
                Ok(param as usize)
            } else {
                bail!("{} needs a positive integer parameter, got {param}", self.name())
            }
        };
        let discount = || -> Result<f64> {
            if param > 0.0 && param <= 1.0 {
                Ok(param)
            } else {
                bail!("{} needs a parameter in (0, 1], got {param}", self.name())
            }
        };
        Ok(match self {
            Family::Custom => bail!("a custom sweep lists its evaluations instead of a schedule"),
            Family::NStage => EvalSpec::NStage { n: count()? },
            Family::Discounted => EvalSpec::Discounted { lambda: discount()? },
            Family::Pwc => {
                let len = count()?;
                let norm: f64 = (0..p).map(|r| 0.5f64.powi(r as i32)).sum();
                let levels = (0..p).map(|r| 0.5f64.powi(r as i32) / (norm * len as f64)).collect();
                let breakpoints = (0..=p).map(|r| 1 + r * len).collect();
                EvalSpec::Pwc { levels, breakpoints }
            }
            Family::Pwd => {
                let lambda = discount()?;
                let len = (1.0 / lambda).ceil() as usize;
                let pieces = (0..p)
                    .map(|r| {
                        let d = lambda * 0.5f64.powi(r as i32);
                        // share of a geometric run that falls inside the piece
                        let captured = if r + 1 == p { 1.0 } else { -(len as f64 * (-d).ln_1p()).exp_m1() };
                        PieceSpec { start: 1 + r * len, weight: d / (p as f64 * captured), discount: d }
                    })
                    .collect();
                EvalSpec::Pwd { pieces }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub game: String,
    pub family: Family,
    #[serde(default)]
    pub schedule: Vec<f64>,
    /// Members of a `custom` sweep.
    #[serde(default)]
    pub evaluations: Vec<EvalSpec>,
    #[serde(default = "default_pieces")]
    pub p: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_pieces() -> usize {
    2
}

fn default_eps() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: &'static str,
    pub parameter: f64,
    pub evaluation: String,
    pub sup_weight: f64,
    pub impatience: f64,
    pub error_bound: f64,
    pub values: Vec<f64>,
}

/// Solves every schedule point; points run in parallel, rows keep the
/// schedule order.
pub fn sweep_values(game: &GameSpec, family: Family, schedule: &[f64], p: usize, eps: f64) -> Result<Vec<SweepRow>> {
    let points = schedule.iter().map(|&param| Ok((param, family.member(param, p)?))).collect::<Result<Vec<_>>>()?;
    solve_points(game, family, &points, p, eps)
}

/// Solves a `custom` sweep; row `i` has parameter `i + 1`.
pub fn sweep_custom(game: &GameSpec, evaluations: &[EvalSpec], p: usize, eps: f64) -> Result<Vec<SweepRow>> {
    if p == 0 {
        bail!("the number of pieces must be positive");
    }
    let points: Vec<_> = evaluations.iter().enumerate().map(|(i, e)| ((i + 1) as f64, e.clone())).collect();
    solve_points(game, Family::Custom, &points, p, eps)
}

/// Runs a sweep config against an already loaded game.
pub fn run_config(game: &GameSpec, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    match cfg.family {
        Family::Custom => {
            if !cfg.schedule.is_empty() {
                bail!("a custom sweep takes `evaluations`, not `schedule`");
            }
            sweep_custom(game, &cfg.evaluations, cfg.p, cfg.eps)
        }
        family => {
            if !cfg.evaluations.is_empty() {
                bail!("`evaluations` is only read by custom sweeps");
            }
            sweep_values(game, family, &cfg.schedule, cfg.p, cfg.eps)
        }
    }
}

fn solve_points(game: &GameSpec, family: Family, points: &[(f64, EvalSpec)], p: usize, eps: f64) -> Result<Vec<SweepRow>> {
    let op = GameOperator::new(game);
    points
        .par_iter()
        .map(|(param, spec)| {
            let theta = spec.build()?;
            let v = v_theta(&op, &theta, eps)?;
            log::debug!("{} -> {:?}", spec.descriptor(), v.values);
            Ok(SweepRow {
                family: family.name(),
                parameter: *param,
                evaluation: spec.descriptor(),
                sup_weight: theta.sup_weight(),
                impatience: theta.impatience(p, DistanceMode::UpperBound)?,
                error_bound: v.error_bound,
                values: v.values,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, game: &GameSpec, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["family", "parameter", "evaluation", "sup_weight", "impatience", "error_bound"].map(String::from).to_vec();
    header.extend(game.labels().iter().map(|l| format!("v:{l}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.family.to_string(),
            r.parameter.to_string(),
            r.evaluation.clone(),
            r.sup_weight.to_string(),
            r.impatience.to_string(),
            r.error_bound.to_string(),
        ];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use stochgame_core::game::corpus;

    #[test]
    fn members_have_unit_mass() {
        for (fam, param) in [(Family::Pwc, 7.0), (Family::Pwd, 0.1), (Family::Pwd, 0.3), (Family::NStage, 3.0)] {
            for p in 1..4 {
                let ev = fam.member(param, p).unwrap().build().unwrap();
                assert!((ev.mass() - 1.0).abs() < 1e-12, "{fam:?} {param} {p}");
            }
        }
        assert!(Family::NStage.member(2.5, 1).is_err());
        assert!(Family::Discounted.member(0.0, 1).is_err());
    }

    #[test]
    fn absorbing_column_is_constant() {
        let g = corpus("absorbing").unwrap();
        let sched: Vec<f64> = (1..=64).map(f64::from).collect();
        let rows = sweep_values(&g, Family::NStage, &sched, 2, 1e-9).unwrap();
        assert_eq!(rows.len(), 64);
        assert!(rows.iter().all(|r| (r.values[0] - 0.75).abs() < 1e-12));
        assert_eq!(rows[9].parameter, 10.0);
    }

    #[test]
    fn big_match_tends_to_half() {
        let g = corpus("big_match").unwrap();
        let sched: Vec<f64> = (1..=10).map(|j| 0.5f64.powi(j)).collect();
        let rows = sweep_values(&g, Family::Discounted, &sched, 2, 1e-9).unwrap();
        for r in &rows {
            assert!((r.values[0] - 0.5).abs() <= r.error_bound + 1e-9);
        }
    }

    #[test]
    fn cycle2_pwc_values_in_range() {
        let g = corpus("cycle2").unwrap();
        let rows = sweep_values(&g, Family::Pwc, &[1.0, 2.0, 5.0, 13.0], 3, 1e-9).unwrap();
        for r in rows {
            assert!(r.values.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let g = corpus("cycle2").unwrap();
        let rows = sweep_values(&g, Family::NStage, &[1.0, 2.0], 2, 1e-9).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &g, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("family,parameter,evaluation,sup_weight,impatience,error_bound,v:"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn custom_list_keeps_order() {
        let g = corpus("cycle2").unwrap();
        let evals = vec![EvalSpec::NStage { n: 2 }, EvalSpec::Discounted { lambda: 0.5 }, EvalSpec::NStage { n: 1 }];
        let rows = sweep_custom(&g, &evals, 2, 1e-9).unwrap();
        assert_eq!(rows.iter().map(|r| r.parameter).collect::<Vec<_>>(), [1.0, 2.0, 3.0]);
        assert!((rows[0].values[0] - 0.5).abs() < 1e-12);
        assert!(rows[2].values[0].abs() < 1e-12);
        assert!(Family::Custom.member(1.0, 2).is_err());
    }
}
