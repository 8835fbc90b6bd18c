//! Acceptance checks, one line per criterion. Thresholds are pinned here;
//! the process exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use stochgame::counterexample::{reproduce_counterexample, CounterexampleConfig};
use stochgame::io::read_json;
use stochgame::properties::run_property;
use stochgame::solve::{exploitability_profile, non_increasing_after_max};
use stochgame_core::game::{corpus, random_game, CORPUS_NAMES};
use stochgame_core::values::{v_discounted, v_n_stage};
use stochgame_core::evaluation::approx_discounted_by_pwc;
use stochgame_core::GameOperator;

const SEED: u64 = 20_240_601;

const MATRIX_CASES: usize = 500;
const MATRIX_TIME: Duration = Duration::from_secs(10);

const ITERATE_CASES: usize = 200;
const ITERATE_TIME: Duration = Duration::from_secs(60);

const VALUE_PAIRS: usize = 100;
const RESIDUAL_CASES: usize = 100;

const BIG_MATCH_N: usize = 1024;
const BIG_MATCH_LAMBDA: f64 = 1.0 / 1024.0;
const BIG_MATCH_TOL: f64 = 0.02;
const BIG_MATCH_TIME: Duration = Duration::from_secs(300);

const APPROX_LAMBDAS: [f64; 4] = [0.5, 0.1, 1e-3, 1e-5];
const APPROX_EPS: [f64; 2] = [0.1, 0.05];

const EXPLOIT_NS: [usize; 4] = [4, 16, 64, 256];
const EXPLOIT_MAX_GAP: f64 = 0.05;
/// Round-off allowed when checking that gaps do not grow.
const EXPLOIT_MONOTONE_TOL: f64 = 1e-9;
const EXPLOIT_TIME: Duration = Duration::from_secs(600);
/// Random games added to the corpus, as `(seed, states, p1, p2)`.
const EXPLOIT_RANDOM: [(u64, usize, usize, usize); 2] = [(1, 3, 2, 2), (2, 3, 2, 2)];

const COUNTER_MIN_VN: f64 = 0.8;
const COUNTER_MAX_VTHETA: f64 = 0.5;
const COUNTER_MIN_GAP: f64 = 0.3;

struct Line {
    pass: bool,
    name: &'static str,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn matrix_games() -> Line {
    let (r, t) = timed(|| run_property("matrix_value_bracket", SEED, MATRIX_CASES, None).unwrap());
    Line {
        pass: r.passed() && t < MATRIX_TIME,
        name: "matrix games match the grid oracle",
        detail: format!(
            "{} cases, {} failures, worst excess {:.2e}, {:.2?} (limit {:?})",
            r.cases, r.failures, r.worst_excess, t, MATRIX_TIME
        ),
    }
}

fn iterate_inequalities() -> Line {
    let names = ["iterate_contraction", "iterate_bounded", "iterate_weight_sensitivity"];
    let (results, t) = timed(|| {
        names.iter().map(|n| run_property(n, SEED, ITERATE_CASES, None).unwrap()).collect::<Vec<_>>()
    });
    let detail = results
        .iter()
        .map(|r| format!("{} {}/{} (worst {:.2e})", r.name, r.cases - r.failures, r.cases, r.worst_excess))
        .collect::<Vec<_>>()
        .join(", ");
    Line {
        pass: results.iter().all(|r| r.passed()) && t < ITERATE_TIME,
        name: "iterated operator inequalities",
        detail: format!("{detail}, {t:.2?} (limit {ITERATE_TIME:?})"),
    }
}

fn value_lipschitz() -> Line {
    let r = run_property("value_lipschitz", SEED, VALUE_PAIRS, None).unwrap();
    Line {
        pass: r.passed(),
        name: "weighted values are C-Lipschitz in the weights",
        detail: format!("{} pairs, {} violations, worst excess {:.2e}", r.cases, r.failures, r.worst_excess),
    }
}

fn shapley_residual() -> Line {
    let r = run_property("shapley_residual", SEED, RESIDUAL_CASES, None).unwrap();
    Line {
        pass: r.passed(),
        name: "recursive equation residual",
        detail: format!("{} cases, {} violations, worst excess {:.2e}", r.cases, r.failures, r.worst_excess),
    }
}

fn big_match() -> Line {
    let g = corpus("big_match").unwrap();
    let op = GameOperator::new(&g);
    let ((vn, vl), t) = timed(|| {
        (v_n_stage(&op, BIG_MATCH_N).unwrap(), v_discounted(&op, BIG_MATCH_LAMBDA, 1e-9).unwrap())
    });
    let (dn, dl) = ((vn[0] - 0.5).abs(), (vl[0] - 0.5).abs());
    Line {
        pass: dn <= BIG_MATCH_TOL && dl <= BIG_MATCH_TOL && t < BIG_MATCH_TIME,
        name: "Big Match n-stage and discounted values near 1/2",
        detail: format!(
            "v_{BIG_MATCH_N} = {:.6}, v_(2^-10) = {:.6} (+-{:.1e}), tol {BIG_MATCH_TOL}, {t:.2?}",
            vn[0], vl[0], vl.error_bound
        ),
    }
}

/// Direct stage-by-stage l1 distance to the discounted weights; past the
/// head only the discounted remainder is left.
fn l1_to_discounted(lambda: f64, head: &[f64]) -> f64 {
    let mut w = lambda;
    let mut total = 0.0;
    let mut comp = 0.0;
    for &h in head {
        // Kahan summation: heads run to millions of stages
        let y = (w - h).abs() - comp;
        let s = total + y;
        comp = (s - total) - y;
        total = s;
        w *= 1.0 - lambda;
    }
    total + (1.0 - lambda).powf(head.len() as f64)
}

fn piecewise_approximation() -> Line {
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    let mut cells = Vec::new();
    for lambda in APPROX_LAMBDAS {
        for eps in APPROX_EPS {
            match approx_discounted_by_pwc(lambda, eps) {
                Ok((theta, bound)) => {
                    let d = l1_to_discounted(lambda, theta.head());
                    pass &= theta.tail().is_none() && d <= eps && d <= bound + 1e-9;
                    worst = worst.max(d / eps);
                }
                Err(e) => {
                    pass = false;
                    cells.push(format!("lambda {lambda}, eps {eps}: {e}"));
                }
            }
        }
    }
    let mut detail = format!("{} grid points, largest distance / eps {:.3}", APPROX_LAMBDAS.len() * 2, worst);
    if !cells.is_empty() {
        detail.push_str(&format!("; errors: {}", cells.join("; ")));
    }
    Line { pass, name: "piecewise-constant approximation of discounted weights", detail }
}

fn exploitability() -> Line {
    let mut games: Vec<(String, _)> = CORPUS_NAMES.iter().map(|n| (n.to_string(), corpus(n).unwrap())).collect();
    for (s, k, i, j) in EXPLOIT_RANDOM {
        games.push((format!("random({s})"), random_game(s, k, i, j).unwrap()));
    }
    let (rows, t) = timed(|| {
        games
            .iter()
            .map(|(name, g)| (name.clone(), exploitability_profile(g, &EXPLOIT_NS, 0, 1e-10)))
            .collect::<Vec<_>>()
    });
    let mut pass = t < EXPLOIT_TIME;
    let mut parts = Vec::new();
    for (name, rows) in rows {
        match rows {
            Ok(rows) => {
                let gaps: Vec<f64> = rows.iter().map(|r| r.worst()).collect();
                let last = *gaps.last().unwrap();
                let ok = last <= EXPLOIT_MAX_GAP && non_increasing_after_max(&gaps, EXPLOIT_MONOTONE_TOL);
                pass &= ok;
                parts.push(format!("{name} {last:.1e}{}", if ok { "" } else { " (FAIL)" }));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    Line {
        pass,
        name: "discounted strategies are asymptotically optimal",
        detail: format!("gap at n=256 (max {EXPLOIT_MAX_GAP}): {}, {t:.2?}", parts.join(", ")),
    }
}

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn counterexample() -> Line {
    let cfg: CounterexampleConfig = read_json(&repo_path("configs/counterexample.json")).unwrap();
    match reproduce_counterexample(&cfg) {
        Ok(r) => {
            let pass = !r.rows.is_empty()
                && r.rows.iter().all(|row| row.v_n >= COUNTER_MIN_VN && row.v_theta <= COUNTER_MAX_VTHETA && row.gap >= COUNTER_MIN_GAP);
            let detail = r
                .rows
                .iter()
                .map(|row| {
                    format!(
                        "N={} R={}: v_n = {:.4} (min {COUNTER_MIN_VN}), v_theta = {:.4} (max {COUNTER_MAX_VTHETA}), gap {:.4} (min {COUNTER_MIN_GAP})",
                        row.base, row.blocks, row.v_n, row.v_theta, row.gap
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            Line { pass, name: "flattening evaluations miss the n-stage limit", detail }
        }
        Err(e) => Line { pass: false, name: "flattening evaluations miss the n-stage limit", detail: format!("{e:#}") },
    }
}

fn cli_determinism() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("game.json");
    let game_arg = game.to_str().unwrap().to_string();
    let config = |name: &str| repo_path(&format!("configs/{name}")).to_str().unwrap().to_string();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("gen", vec!["gen".into(), "--seed".into(), "9".into(), "--states".into(), "4".into()]),
        ("solve", vec!["solve".into(), "--game".into(), game_arg.clone(), "--eval".into(), config("evals/head_and_tail.json")]),
        ("sweep", vec!["sweep".into(), "--config".into(), config("sweep_big_match.json")]),
        ("sweep pwd", vec![
            "sweep".into(), "--game".into(), game_arg.clone(), "--family".into(), "pwd".into(),
            "--schedule".into(), "0.5,0.1,0.02".into(), "--p".into(), "3".into(),
        ]),
        ("strategy", vec!["strategy".into(), "--game".into(), "big_match".into(), "--eval".into(), config("evals/n_stage_256.json")]),
        ("counterexample", vec!["counterexample".into(), "--config".into(), config("counterexample.json")]),
        ("proptest", vec!["proptest".into(), "--seed".into(), "5".into(), "--budget".into(), "10".into()]),
    ];
    let exe = env!("CARGO_BIN_EXE_stochgame");
    let seed_game = Command::new(exe).args(["gen", "--seed", "9", "--states", "4", "--out", &game_arg]).status();
    if !matches!(seed_game, Ok(s) if s.success()) {
        return Line { pass: false, name: "CLI output is byte-identical across runs", detail: "gen failed".into() };
    }
    let mut failed = Vec::new();
    for (label, args) in &commands {
        let outputs: Vec<_> = (0..2)
            .map(|run| {
                let out = dir.path().join(format!("out{run}"));
                let status = Command::new(exe).args(args).arg("--out").arg(&out).status();
                match status {
                    Ok(s) if s.success() => std::fs::read(&out).ok(),
                    _ => None,
                }
            })
            .collect();
        match (&outputs[0], &outputs[1]) {
            (Some(a), Some(b)) if a == b && !a.is_empty() => {}
            _ => failed.push(*label),
        }
    }
    Line {
        pass: failed.is_empty(),
        name: "CLI output is byte-identical across runs",
        detail: if failed.is_empty() {
            format!("{} commands", commands.len())
        } else {
            format!("differs or failed: {}", failed.join(", "))
        },
    }
}

fn main() -> ExitCode {
    let checks: [fn() -> Line; 9] = [
        matrix_games,
        iterate_inequalities,
        value_lipschitz,
        shapley_residual,
        big_match,
        piecewise_approximation,
        exploitability,
        counterexample,
        cli_determinism,
    ];
    let mut failures = 0;
    for check in checks {
        let line = check();
        failures += usize::from(!line.pass);
        println!("[{}] {}: {}", if line.pass { "PASS" } else { "FAIL" }, line.name, line.detail);
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failures, checks.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
