use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use socnav::fusion::Mode;
use socnav::metrics::{episodes_csv, evaluate};
use socnav::neural::Checkpoint;
use socnav::oracle::{run_suite, SUITES};
use socnav::scenario::Scenario;
use socnav::sim::{run_episode, validate_log, ActionSource};
use socnav::train::{curve_csv, train, TrainConfig, Variant};

mod svg;

const DEFAULT_SEED: u64 = 7;
const OUT_ENV: &str = "SOCNAV_OUT";

#[derive(Parser)]
#[command(name = "socnav", version, about = "Multi-robot social navigation: ORCA safety layer over a learned policy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO and curiosity.
    Train(TrainArgs),
    /// Evaluate a mode over many seeded episodes.
    Eval(EvalArgs),
    /// Run one episode and render it.
    Run(RunArgs),
    /// Check the solvers and gradients against brute-force references.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct Common {
    /// Root directory for outputs.
    #[arg(long, env = OUT_ENV, default_value = "socnav-out")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// `key=value` override; reward constants as `rewards.<name>`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Built-in id or scenario file; repeat to train on several.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    #[arg(long, default_value = "1")]
    variant: String,
    #[arg(long, default_value_t = 5000)]
    episodes: usize,
    /// Start from this checkpoint instead of fresh networks.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "orca-drl")]
    mode: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "orca-drl")]
    mode: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    /// lp2, lp3, vo, grad or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value = "socnav-out", env = OUT_ENV)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

enum Failure {
    Config(String),
    Oracle,
    Diverged,
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn cfg<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn default_checkpoint() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../checkpoints/demo.json")
}

/// Scenario with `rewards.*` overrides applied; other keys are returned.
fn load_scenario(id: &str, sets: &[String]) -> Res<(Scenario, Vec<(String, String)>)> {
    let mut sc = Scenario::resolve(id).map_err(cfg)?;
    let mut rest = Vec::new();
    for kv in sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("override `{kv}` is not key=value")))?;
        match k.strip_prefix("rewards.") {
            Some(name) => sc.rewards.set(name, v).map_err(cfg)?,
            None => rest.push((k.to_string(), v.to_string())),
        }
    }
    Ok((sc, rest))
}

fn load_policy(mode: Mode, path: Option<&PathBuf>) -> Res<Option<(Checkpoint, Vec<u8>)>> {
    if !mode.needs_policy() {
        return Ok(None);
    }
    let p = path.cloned().unwrap_or_else(default_checkpoint);
    let bytes = std::fs::read(&p).map_err(|e| Failure::Config(format!("checkpoint {}: {e}", p.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(cfg)?;
    let c = Checkpoint::from_json(&text).map_err(cfg)?;
    Ok(Some((c, bytes)))
}

fn parse_mode(s: &str) -> Res<Mode> {
    Mode::parse(s).ok_or_else(|| Failure::Config(format!("unknown mode `{s}` (orca-drl, pure-drl, pure-orca)")))
}

/// Output directory named by command, scenario and a hash of the config.
fn out_dir(root: &Path, command: &str, label: &str, parts: &[String], extra: &[&[u8]]) -> Res<PathBuf> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    for p in parts {
        h.update([0]);
        h.update(p.as_bytes());
    }
    for e in extra {
        h.update([1]);
        h.update(e);
    }
    let digest = h.finalize();
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    let dir = root.join(format!("{command}-{label}-{hex}"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, content: &str) -> Res<()> {
    std::fs::write(dir.join(name), content)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn scenario_text(id: &str) -> Vec<u8> {
    std::fs::read(id).unwrap_or_else(|_| id.as_bytes().to_vec())
}

fn cmd_train(a: TrainArgs) -> Res<()> {
    let variant = Variant::parse(&a.variant).ok_or_else(|| Failure::Config(format!("unknown variant `{}`", a.variant)))?;
    let mut scenarios = Vec::new();
    let mut hyper_sets = Vec::new();
    for id in &a.scenario {
        let (sc, rest) = load_scenario(id, &a.common.set)?;
        scenarios.push(sc);
        hyper_sets = rest;
    }
    let init = match &a.checkpoint {
        Some(p) => Some(Checkpoint::load(p).map_err(cfg)?),
        None => None,
    };
    let mut hyper = init.as_ref().map(|c| c.hyper).unwrap_or_default();
    for (k, v) in &hyper_sets {
        hyper.set(k, v).map_err(cfg)?;
    }
    let mut parts = vec![format!("variant={}", a.variant), format!("episodes={}", a.episodes), format!("seed={}", a.common.seed)];
    parts.extend(a.common.set.iter().cloned());
    let mut extra: Vec<Vec<u8>> = a.scenario.iter().map(|s| scenario_text(s)).collect();
    if let Some(p) = &a.checkpoint {
        extra.push(std::fs::read(p)?);
    }
    let extra_refs: Vec<&[u8]> = extra.iter().map(|v| v.as_slice()).collect();
    let label = scenarios.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join("+");
    let dir = out_dir(&a.common.out, "train", &label, &parts, &extra_refs)?;

    let config = TrainConfig {
        hyper,
        variant,
        episodes: a.episodes,
        seed: a.common.seed,
    };
    let r = train(&scenarios, &config, init.map(|c| c.nets), |p| {
        if p.iteration % 20 == 0 {
            eprintln!(
                "iter {:5}  ex {:8.2}  curiosity {:7.4}  success {:.2}",
                p.iteration, p.mean_ex_reward, p.mean_curiosity, p.success_rate
            );
        }
    });
    write(&dir, "checkpoint.json", &r.checkpoint.to_json())?;
    write(&dir, "curves.csv", &curve_csv(&r.curve))?;
    write(&dir, "curves.svg", &svg::curves(&r.curve))?;
    if r.diverged {
        eprintln!("training diverged; wrote the last finite checkpoint");
        return Err(Failure::Diverged);
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Res<()> {
    let mode = parse_mode(&a.mode)?;
    if a.episodes == 0 {
        return Err(Failure::Config("--episodes must be at least 1".into()));
    }
    let (sc, rest) = load_scenario(&a.scenario, &a.common.set)?;
    if let Some((k, _)) = rest.first() {
        return Err(Failure::Config(format!("eval accepts only rewards.* overrides, got `{k}`")));
    }
    let policy = load_policy(mode, a.checkpoint.as_ref())?;
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let mut parts = vec![format!("mode={}", a.mode), format!("episodes={}", a.episodes), format!("seed={}", a.common.seed)];
    parts.extend(a.common.set.iter().cloned());
    let st = scenario_text(&a.scenario);
    let mut extra: Vec<&[u8]> = vec![&st];
    if let Some((_, b)) = &policy {
        extra.push(b);
    }
    let dir = out_dir(&a.common.out, "eval", &sc.name, &parts, &extra)?;
    let src = policy.as_ref().map(|(c, _)| &c.nets as &dyn ActionSource);
    let ev = evaluate(&sc, mode, src, a.episodes, a.common.seed, workers);
    print!("{}", ev.report.to_text());
    write(&dir, "metrics.csv", &ev.report.to_csv())?;
    write(&dir, "metrics.txt", &ev.report.to_text())?;
    write(&dir, "episodes.csv", &episodes_csv(&ev.episodes, sc.dt))?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> Res<()> {
    let mode = parse_mode(&a.mode)?;
    let (sc, rest) = load_scenario(&a.scenario, &a.common.set)?;
    if let Some((k, _)) = rest.first() {
        return Err(Failure::Config(format!("run accepts only rewards.* overrides, got `{k}`")));
    }
    let policy = load_policy(mode, a.checkpoint.as_ref())?;
    let mut parts = vec![format!("mode={}", a.mode), format!("seed={}", a.common.seed)];
    parts.extend(a.common.set.iter().cloned());
    let st = scenario_text(&a.scenario);
    let mut extra: Vec<&[u8]> = vec![&st];
    if let Some((_, b)) = &policy {
        extra.push(b);
    }
    let dir = out_dir(&a.common.out, "run", &sc.name, &parts, &extra)?;
    let src = policy.as_ref().map(|(c, _)| &c.nets as &dyn ActionSource);
    let log = run_episode(&sc, mode, src, a.common.seed);
    for (i, o) in log.outcomes.iter().enumerate() {
        let t = log.arrival_ticks[i].map(|t| format!(" at {:.1} s", t as f64 * sc.dt)).unwrap_or_default();
        println!("agent {i}: {}{t}", o.as_str());
    }
    if let Err(e) = validate_log(&log, &sc) {
        eprintln!("log check: {e}");
    }
    write(&dir, "log.csv", &log.to_csv())?;
    write(&dir, "trajectories.svg", &svg::trajectories(&sc, &log))?;
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Res<()> {
    let suites: Vec<&str> = if a.suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&a.suite.as_str()) {
        vec![a.suite.as_str()]
    } else {
        return Err(Failure::Config(format!("unknown suite `{}`", a.suite)));
    };
    let parts = vec![format!("suite={}", a.suite), format!("instances={}", a.instances), format!("seed={}", a.seed)];
    let dir = out_dir(&a.out, "oracle", &a.suite, &parts, &[])?;
    let mut report = String::new();
    let mut ok = true;
    for s in suites {
        let r = run_suite(s, a.instances, a.seed).expect("known suite");
        println!("{}", r.line());
        report.push_str(&r.line());
        report.push('\n');
        ok &= r.passed();
    }
    write(&dir, "report.txt", &report)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Oracle)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Run(a) => cmd_run(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Oracle) => ExitCode::from(3),
        Err(Failure::Diverged) => ExitCode::from(4),
    }
}
