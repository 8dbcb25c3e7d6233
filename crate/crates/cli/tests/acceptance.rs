// One PASS/FAIL line per acceptance criterion. Run with
// `cargo test -p socnav-cli --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use socnav::fusion::Mode;
use socnav::metrics::evaluate;
use socnav::neural::{Checkpoint, Hyper};
use socnav::oracle::run_suite;
use socnav::scenario::Scenario;
use socnav::sim::{run_episode, ActionSource, EpisodeLog, Outcome};
use socnav::train::{train, TrainConfig, Variant};

const EVAL_SEED: u64 = 2024;

fn checkpoint() -> Checkpoint {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../checkpoints/demo.json");
    Checkpoint::load(&p).expect("shipped checkpoint")
}

fn c1() -> (bool, String) {
    let t = Instant::now();
    let a = run_suite("lp2", 1000, 1).unwrap();
    let b = run_suite("lp3", 1000, 1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ok = a.passed() && b.passed() && secs < 60.0;
    (
        ok,
        format!(
            "lp2 worst {:.2e}, lp3 worst {:.2e}, tolerance {:.2e}, failures {}/{}, {secs:.1} s",
            a.worst, b.worst, a.tolerance, a.failures, b.failures
        ),
    )
}

/// Open field, two agents facing each other with random range and offsets.
fn head_on(pr: (f64, f64), fixed: bool) -> Scenario {
    let (spawn0, goal0, spawn1, goal1) = if fixed {
        ("[-2.0, 0.02], max = [-2.0, 0.02]", "[2.0, 0.02], max = [2.0, 0.02]", "[2.0, -0.02], max = [2.0, -0.02]", "[-2.0, -0.02], max = [-2.0, -0.02]")
    } else {
        ("[-2.5, -0.3], max = [-1.5, 0.3]", "[1.5, -0.3], max = [2.5, 0.3]", "[1.5, -0.3], max = [2.5, 0.3]", "[-2.5, -0.3], max = [-1.5, 0.3]")
    };
    let text = format!(
        r#"
name = "head-on"
dt = 0.2
tick_limit = 300
[[agents]]
spawn = {{ min = {spawn0} }}
goal = {{ min = {goal0} }}
priority = {}
[[agents]]
spawn = {{ min = {spawn1} }}
goal = {{ min = {goal1} }}
priority = {}
"#,
        pr.0, pr.1
    );
    Scenario::from_toml(&text).unwrap()
}

fn c2() -> (bool, String) {
    let t = Instant::now();
    let sc = head_on((1.0, 1.0), false);
    let (mut collisions, mut arrived) = (0, 0);
    let n = 10_000;
    for seed in 0..n {
        let log = run_episode(&sc, Mode::PureOrca, None, seed);
        collisions += log.outcomes.iter().filter(|&&o| o == Outcome::ColRobot).count();
        arrived += log.outcomes.iter().filter(|&&o| o == Outcome::Arrived).count();
    }
    let secs = t.elapsed().as_secs_f64();
    (
        collisions == 0 && secs < 300.0,
        format!("{n} episodes, robot collisions {collisions}, arrived {arrived}/{}, {secs:.1} s", 2 * n),
    )
}

fn c3() -> (bool, String) {
    let sc = Scenario::resolve("3").unwrap();
    let r = evaluate(&sc, Mode::PureOrca, None, 50, EVAL_SEED, 1).report;
    let ok = r.success >= 98.0 && r.col_robots == 0.0 && r.col_obstacles == 0.0;
    (
        ok,
        format!("success {:.1}%, robot collisions {:.1}%, obstacle collisions {:.1}%", r.success, r.col_robots, r.col_obstacles),
    )
}

fn c4() -> (bool, String) {
    let sc = Scenario::resolve("4").unwrap();
    let blocks = [1, 3];
    let mut bad = 0;
    let n = 20;
    for seed in 0..n {
        let log = run_episode(&sc, Mode::PureOrca, None, EVAL_SEED + seed);
        for (i, &o) in log.outcomes.iter().enumerate() {
            let want = if blocks.contains(&i) { Outcome::Arrived } else { Outcome::Timeout };
            bad += usize::from(o != want);
        }
    }
    (bad == 0, format!("{n} episodes, cup agents time out and block agents arrive; mismatches {bad}"))
}

/// Time-integrated distance from the agent's own start-goal line.
fn displacement(log: &EpisodeLog, i: usize) -> f64 {
    let tr = &log.trajectories[i];
    let (a, b) = (tr[0], log.goals[i]);
    let d = b - a;
    let len = d.norm();
    tr.iter().map(|&p| ((p - a).cross(d) / len).abs() * log.dt).sum()
}

fn c5() -> (bool, String) {
    let l = run_episode(&head_on((1.0, 10.0), true), Mode::PureOrca, None, 0);
    let (lo, hi) = (displacement(&l, 0), displacement(&l, 1));
    let e = run_episode(&head_on((1.0, 1.0), true), Mode::PureOrca, None, 0);
    let (a, b) = (displacement(&e, 0), displacement(&e, 1));
    let ratio = lo / hi.max(1e-12);
    let rel = (a - b).abs() / a.max(b);
    let arrived = l.outcomes.iter().chain(&e.outcomes).all(|&o| o == Outcome::Arrived);
    (
        ratio >= 5.0 && rel <= 0.05 && arrived,
        format!("pr=(1,10) low/high {ratio:.2} ({lo:.4} vs {hi:.4} m·s); pr=(1,1) {a:.4} vs {b:.4}, rel diff {:.2}%", rel * 100.0),
    )
}

fn c6() -> (bool, String) {
    let t = Instant::now();
    let r = run_suite("grad", 100, 1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    (r.passed() && secs < 60.0, format!("100 networks, worst relative error {:.2e}, {secs:.1} s", r.worst))
}

/// Success over the last tenth of the training episodes.
fn final_success(sc: &Scenario, delta: f64, seed: u64) -> f64 {
    let mut hyper = Hyper::default();
    hyper.delta = delta;
    let episodes = 5000;
    let cfg = TrainConfig {
        hyper,
        variant: Variant::One,
        episodes,
        seed,
    };
    let r = train(std::slice::from_ref(sc), &cfg, None, |_| {});
    let (mut n, mut s) = (0.0, 0.0);
    for p in r.curve.iter().rev() {
        if n >= (episodes / 10) as f64 {
            break;
        }
        n += p.episodes as f64;
        s += p.success_rate * p.episodes as f64;
    }
    s / n
}

fn c7() -> (bool, String) {
    let sc = Scenario::resolve("4-sparse").unwrap();
    let seeds = [11, 12, 13];
    let with: Vec<f64> = seeds.iter().map(|&s| final_success(&sc, 0.01, s)).collect();
    let without: Vec<f64> = seeds.iter().map(|&s| final_success(&sc, 0.0, s)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&with), mean(&without));
    (
        a > b,
        format!("final success over 3 seeds: δ=0.01 {a:.3} {with:.3?}, δ=0 {b:.3} {without:.3?}"),
    )
}

fn c8() -> (bool, String) {
    let ck = checkpoint();
    let sc = Scenario::resolve("crossroad4").unwrap();
    let p = &ck.nets as &dyn ActionSource;
    let fused = evaluate(&sc, Mode::OrcaDrl, Some(p), 200, EVAL_SEED, 1).report;
    let pure = evaluate(&sc, Mode::PureDrl, Some(p), 200, EVAL_SEED, 1).report;
    (
        fused.col_robots < pure.col_robots,
        format!("robot collisions ORCA-DRL {:.1}% vs PURE_DRL {:.1}%", fused.col_robots, pure.col_robots),
    )
}

fn c9() -> (bool, String) {
    let ck = checkpoint();
    let p = &ck.nets as &dyn ActionSource;
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ["1", "2"] {
        let sc = Scenario::resolve(id).unwrap();
        let fused = evaluate(&sc, Mode::OrcaDrl, Some(p), 200, EVAL_SEED, 1).report;
        let orca = evaluate(&sc, Mode::PureOrca, None, 200, EVAL_SEED, 1).report;
        let (f, o) = (fused.sr_success.unwrap_or(0.0), orca.sr_success.unwrap_or(0.0));
        let pval = orca.sides.binomial_p();
        ok &= f > o && pval > 0.05;
        parts.push(format!(
            "S{id}: SR ORCA-DRL {f:.1}% vs PURE_ORCA {o:.1}%, PURE_ORCA sides {}/{} p={pval:.3}",
            orca.sides.left, orca.sides.right
        ));
    }
    (ok, parts.join("; "))
}

fn cli(out: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_socnav"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn csvs(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v = Vec::new();
    for d in std::fs::read_dir(root).unwrap() {
        let d = d.unwrap().path();
        for f in std::fs::read_dir(&d).unwrap() {
            let f = f.unwrap().path();
            if f.extension().is_some_and(|e| e == "csv") {
                v.push((f.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&f).unwrap()));
            }
        }
    }
    v.sort();
    v
}

fn c10() -> (bool, String) {
    let ck = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../checkpoints/demo.json");
    let ck = ck.to_str().unwrap();
    let runs: [&[&str]; 4] = [
        &["eval", "--scenario", "1", "--mode", "orca-drl", "--episodes", "20", "--workers", "1", "--seed", "3", "--checkpoint", ck],
        &["eval", "--scenario", "4", "--mode", "pure-orca", "--episodes", "5", "--workers", "1", "--seed", "3"],
        &["run", "--scenario", "crossroad4", "--mode", "pure-drl", "--seed", "9", "--checkpoint", ck],
        &["run", "--scenario", "3", "--mode", "pure-orca", "--seed", "9"],
    ];
    let roots: Vec<PathBuf> = ["a", "b"]
        .iter()
        .map(|t| std::env::temp_dir().join(format!("socnav-acceptance-{t}-{}", std::process::id())))
        .collect();
    for r in &roots {
        let _ = std::fs::remove_dir_all(r);
        for args in runs {
            if !cli(r, args) {
                return (false, format!("command failed: {args:?}"));
            }
        }
    }
    let (a, b) = (csvs(&roots[0]), csvs(&roots[1]));
    let same = a == b && a.len() >= 5;
    (same, format!("{} CSV files from 2 evals and 2 runs, byte-identical: {same}", a.len()))
}

#[test]
fn acceptance() {
    let criteria: [fn() -> (bool, String); 10] = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10];
    let mut failed = Vec::new();
    println!();
    for (k, c) in criteria.iter().enumerate() {
        let (ok, detail) = c();
        println!("{} {:>2}  {detail}", if ok { "PASS" } else { "FAIL" }, k + 1);
        if !ok {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
