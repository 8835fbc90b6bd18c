//! JSON file formats for games and evaluations.
//!
//! A game file looks like
//!
//! ```json
//! {
//!   "states": ["s0", "s1"],
//!   "nI": 2,
//!   "nJ": 1,
//!   "payoff": [[[0.0], [1.0]], [[1.0], [1.0]]],
//!   "transition": [[[1], [[0.5, 0.5]]], [[1], [1]]]
//! }
//! ```
//!
//! `payoff[k][i][j]` is the stage payoff. `transition[k][i][j]` is either a
//! probability vector over states or a bare state index, which stands for a
//! sure move there. `states` may also be a plain count.
//!
//! An evaluation file is tagged by `kind`:
//!
//! - `{"kind": "n_stage", "n": 8}`
//! - `{"kind": "discounted", "lambda": 0.1}`
//! - `{"kind": "pwc", "levels": [...], "breakpoints": [1, ...]}`
//! - `{"kind": "pwd", "pieces": [{"start": 1, "weight": .., "discount": ..}, ...]}`
//! - `{"kind": "weights", "head": [...], "tail": {"a": .., "rho": ..}}`, where
//!   the tail (optional) puts weight `a rho^(k-1)` on the `k`-th stage after
//!   the head.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stochgame_core::game::{corpus, CORPUS_NAMES};
use stochgame_core::{DiscountedPiece, Evaluation, GameSpec, GeometricTail};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum States {
    Count(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Dirac(usize),
    Dist(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub states: States,
    #[serde(rename = "nI")]
    pub n_i: usize,
    #[serde(rename = "nJ")]
    pub n_j: usize,
    pub payoff: Vec<Vec<Vec<f64>>>,
    pub transition: Vec<Vec<Vec<Cell>>>,
}

impl GameFile {
    pub fn from_spec(g: &GameSpec) -> Self {
        let (nk, ni, nj) = (g.n_states(), g.n_p1(), g.n_p2());
        let cells = |k: usize| {
            (0..ni)
                .map(|i| (0..nj).map(|j| g.transition(k, i, j)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        let transition = (0..nk)
            .map(|k| {
                cells(k)
                    .into_iter()
                    .map(|row| row.into_iter().map(compact_cell).collect())
                    .collect()
            })
            .collect();
        let payoff = (0..nk)
            .map(|k| (0..ni).map(|i| (0..nj).map(|j| g.payoff(k, i, j)).collect()).collect())
            .collect();
        GameFile { states: States::Labels(g.labels().to_vec()), n_i: ni, n_j: nj, payoff, transition }
    }

    pub fn into_spec(self) -> Result<GameSpec> {
        let labels = match self.states {
            States::Count(n) => (0..n).map(|k| format!("s{k}")).collect(),
            States::Labels(l) => l,
        };
        let nk = labels.len();
        let (ni, nj) = (self.n_i, self.n_j);
        check_shape("payoff", self.payoff.len(), nk)?;
        check_shape("transition", self.transition.len(), nk)?;
        let mut payoff = Vec::with_capacity(nk * ni * nj);
        let mut trans = Vec::with_capacity(nk * ni * nj * nk);
        for k in 0..nk {
            check_shape(&format!("payoff[{k}]"), self.payoff[k].len(), ni)?;
            check_shape(&format!("transition[{k}]"), self.transition[k].len(), ni)?;
            for i in 0..ni {
                check_shape(&format!("payoff[{k}][{i}]"), self.payoff[k][i].len(), nj)?;
                check_shape(&format!("transition[{k}][{i}]"), self.transition[k][i].len(), nj)?;
                payoff.extend_from_slice(&self.payoff[k][i]);
                for (j, cell) in self.transition[k][i].iter().enumerate() {
                    match cell {
                        Cell::Dirac(t) => {
                            if *t >= nk {
                                bail!("transition[{k}][{i}][{j}]: state {t} out of range (0..{nk})");
                            }
                            trans.extend((0..nk).map(|s| if s == *t { 1.0 } else { 0.0 }));
                        }
                        Cell::Dist(p) => {
                            check_shape(&format!("transition[{k}][{i}][{j}]"), p.len(), nk)?;
                            trans.extend_from_slice(p);
                        }
                    }
                }
            }
        }
        Ok(GameSpec::new(labels, ni, nj, payoff, trans)?)
    }
}

fn compact_cell(row: &[f64]) -> Cell {
    match row.iter().position(|&p| p == 1.0) {
        Some(t) if row.iter().filter(|&&p| p != 0.0).count() == 1 => Cell::Dirac(t),
        _ => Cell::Dist(row.to_vec()),
    }
}

fn check_shape(what: &str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        bail!("{what}: expected {expected} entries, found {found}");
    }
    Ok(())
}

/// Loads a game from a file, or from the built-in corpus by name.
pub fn load_game(arg: &str) -> Result<GameSpec> {
    if CORPUS_NAMES.contains(&arg) && !Path::new(arg).exists() {
        return Ok(corpus(arg)?);
    }
    let text = fs::read_to_string(arg).with_context(|| format!("reading game file {arg}"))?;
    let file: GameFile = serde_json::from_str(&text).with_context(|| format!("parsing game file {arg}"))?;
    file.into_spec().with_context(|| format!("invalid game in {arg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub a: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub start: usize,
    pub weight: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalSpec {
    NStage { n: usize },
    Discounted { lambda: f64 },
    Pwc { levels: Vec<f64>, breakpoints: Vec<usize> },
    Pwd { pieces: Vec<PieceSpec> },
    Weights { head: Vec<f64>, tail: Option<TailSpec> },
}

impl EvalSpec {
    pub fn build(&self) -> Result<Evaluation> {
        let ev = match self {
            EvalSpec::NStage { n } => Evaluation::n_stage(*n),
            EvalSpec::Discounted { lambda } => Evaluation::discounted(*lambda),
            EvalSpec::Pwc { levels, breakpoints } => Evaluation::piecewise_constant(levels, breakpoints),
            EvalSpec::Pwd { pieces } => {
                let p: Vec<DiscountedPiece> = pieces
                    .iter()
                    .map(|p| DiscountedPiece { start: p.start, weight: p.weight, discount: p.discount })
                    .collect();
                Evaluation::piecewise_discounted(&p)
            }
            EvalSpec::Weights { head, tail } => {
                let tail = tail.map(|t| GeometricTail { weight: t.a, discount: 1.0 - t.rho });
                Evaluation::from_parts(head.clone(), tail)
            }
        };
        Ok(ev?)
    }

    /// Short human-readable label used in reports.
    pub fn descriptor(&self) -> String {
        match self {
            EvalSpec::NStage { n } => format!("n_stage({n})"),
            EvalSpec::Discounted { lambda } => format!("discounted({lambda})"),
            EvalSpec::Pwc { levels, .. } => format!("pwc({} pieces)", levels.len()),
            EvalSpec::Pwd { pieces } => format!("pwd({} pieces)", pieces.len()),
            EvalSpec::Weights { head, tail } => match tail {
                Some(t) => format!("weights({} + tail rho={})", head.len(), t.rho),
                None => format!("weights({})", head.len()),
            },
        }
    }
}

/// Parses an evaluation given inline as JSON (`{...}`) or as a file path.
pub fn load_eval(arg: &str) -> Result<EvalSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading evaluation file {arg}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing evaluation {arg}"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty JSON with a trailing newline, to a file or stdout.
pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trips() {
        for name in CORPUS_NAMES {
            let g = corpus(name).unwrap();
            let text = serde_json::to_string(&GameFile::from_spec(&g)).unwrap();
            let back: GameFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back.into_spec().unwrap(), g);
        }
    }

    #[test]
    fn dirac_cells_and_counts() {
        let text = r#"{"states": 2, "nI": 1, "nJ": 1,
            "payoff": [[[0]], [[1]]], "transition": [[[1]], [[[0.5, 0.5]]]]}"#;
        let g: GameFile = serde_json::from_str(text).unwrap();
        let g = g.into_spec().unwrap();
        assert_eq!(g.transition(0, 0, 0), &[0.0, 1.0]);
        assert_eq!(g.labels(), &["s0".to_string(), "s1".to_string()]);
    }

    #[test]
    fn module_example_parses() {
        let text = r#"{"states": ["s0", "s1"], "nI": 2, "nJ": 1,
            "payoff": [[[0.0], [1.0]], [[1.0], [1.0]]],
            "transition": [[[1], [[0.5, 0.5]]], [[1], [1]]]}"#;
        let g = serde_json::from_str::<GameFile>(text).unwrap().into_spec().unwrap();
        assert_eq!(g.transition(0, 1, 0), &[0.5, 0.5]);
    }

    #[test]
    fn bad_games_name_the_cell() {
        let text = r#"{"states": 2, "nI": 1, "nJ": 1,
            "payoff": [[[0]], [[1]]], "transition": [[[3]], [[[0.5, 0.5]]]]}"#;
        let g: GameFile = serde_json::from_str(text).unwrap();
        let err = g.into_spec().unwrap_err().to_string();
        assert!(err.contains("transition[0][0][0]"), "{err}");

        let text = r#"{"states": 1, "nI": 1, "nJ": 1, "payoff": [[[0]]], "transition": [[[[0.7]]]]}"#;
        let g: GameFile = serde_json::from_str(text).unwrap();
        assert!(g.into_spec().is_err());
    }

    #[test]
    fn eval_kinds() {
        let cases = [
            (r#"{"kind": "n_stage", "n": 4}"#, Evaluation::n_stage(4).unwrap()),
            (r#"{"kind": "discounted", "lambda": 0.25}"#, Evaluation::discounted(0.25).unwrap()),
            (
                r#"{"kind": "weights", "head": [0.5], "tail": {"a": 0.25, "rho": 0.5}}"#,
                Evaluation::from_parts(vec![0.5], Some(GeometricTail { weight: 0.25, discount: 0.5 })).unwrap(),
            ),
            (
                r#"{"kind": "pwc", "levels": [0.25, 0.125], "breakpoints": [1, 3, 7]}"#,
                Evaluation::piecewise_constant(&[0.25, 0.125], &[1, 3, 7]).unwrap(),
            ),
        ];
        for (text, expected) in cases {
            assert_eq!(load_eval(text).unwrap().build().unwrap(), expected, "{text}");
        }
        assert!(load_eval(r#"{"kind": "n_stage", "n": 0}"#).unwrap().build().is_err());
        assert!(load_eval(r#"{"kind": "nope"}"#).is_err());
    }
}
