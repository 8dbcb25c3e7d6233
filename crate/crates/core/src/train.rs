//! On-policy training loop: pooled multi-agent rollouts, PPO-clip updates.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fusion::{step_policy, FusionParams, Mode};
use crate::neural::{gae, gaussian_log_prob, ppo_update, squash, Checkpoint, Hyper, Networks, Optimizers, Rollout, UpdateStats, ACTION_DIM};
use crate::scenario::Scenario;
use crate::sim::{sense, Command, Episode, Outcome};

/// Variant 1 trains on the raw learned actions; variant 2 executes them
/// through the constraint filter during rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    One,
    Two,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "1" => Some(Variant::One),
            "2" => Some(Variant::Two),
            _ => None,
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Variant::One => Mode::PureDrl,
            Variant::Two => Mode::OrcaDrl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hyper: Hyper,
    pub variant: Variant,
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub episodes: usize,
    /// Mean per-agent external return over this iteration's episodes.
    pub mean_ex_reward: f64,
    pub mean_curiosity: f64,
    pub success_rate: f64,
    pub stats: UpdateStats,
}

pub const CURVE_HEADER: &str = "iteration,mean_ex_reward,mean_curiosity";

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for p in curve {
        s.push_str(&format!("{},{:.6},{:.6}\n", p.iteration, p.mean_ex_reward, p.mean_curiosity));
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurvePoint>,
    /// Set when an update produced non-finite values; the checkpoint is the
    /// last finite state and training stopped there.
    pub diverged: bool,
}

struct EpisodeSummary {
    ex: f64,
    curiosity: f64,
    arrived: usize,
    agents: usize,
}

/// Run one episode with stochastic actions and append its transitions.
fn collect_episode(nets: &Networks, hyper: &Hyper, scenario: &Scenario, mode: Mode, seed: u64, rng: &mut ChaCha8Rng, out: &mut Rollout) -> (usize, EpisodeSummary) {
    let params = FusionParams::new(scenario.dt);
    let mut ep = Episode::new(scenario, seed);
    let n = scenario.agents.len();
    let d = nets.encoder.m.nrows();
    let std: Vec<f64> = nets.policy.log_std.iter().map(|l| l.exp()).collect();
    let ls = nets.policy.log_std.to_vec();

    struct Step {
        state: Vec<f64>,
        next: Vec<f64>,
        u: [f64; 2],
        logp: f64,
        value: f64,
        reward: f64,
        done: bool,
    }
    let mut trajs: Vec<Vec<Step>> = (0..n).map(|_| Vec::new()).collect();
    let mut ticks = 0;
    while !ep.finished() {
        let active: Vec<usize> = (0..n).filter(|&i| ep.world.agents[i].active()).collect();
        let mut s = Array2::zeros((active.len(), d));
        for (r, &i) in active.iter().enumerate() {
            s.row_mut(r).assign(&ndarray::Array1::from(sense(&ep.world, i)));
        }
        let means = nets.policy.mean.forward(s.view());
        let values = nets.value.forward(s.view());
        let mut us = Vec::with_capacity(active.len());
        let mut cmds = vec![Command::default(); n];
        for (r, &i) in active.iter().enumerate() {
            let mut u = [0.0; ACTION_DIM];
            for k in 0..ACTION_DIM {
                let z: f64 = StandardNormal.sample(rng);
                u[k] = means[[r, k]] + std[k] * z;
            }
            let action = squash(u, &ep.world.agents[i].bounds);
            cmds[i] = step_policy(mode, &ep.world, i, Some(action), &params).0;
            us.push(u);
        }
        let result = ep.step(&cmds);
        ticks += 1;

        let mut s2 = Array2::zeros((active.len(), d));
        for (r, &i) in active.iter().enumerate() {
            s2.row_mut(r).assign(&ndarray::Array1::from(sense(&ep.world, i)));
        }
        let a_n = Array2::from_shape_fn((active.len(), ACTION_DIM), |(r, k)| us[r][k].tanh());
        let rc = nets.curiosity(s.view(), a_n.view(), s2.view(), hyper.delta);
        for (r, &i) in active.iter().enumerate() {
            ep.add_curiosity(i, rc[r]);
            let t = result[i].expect("active agent has a tick");
            let m = [means[[r, 0]], means[[r, 1]]];
            trajs[i].push(Step {
                state: s.row(r).to_vec(),
                next: s2.row(r).to_vec(),
                u: us[r],
                logp: gaussian_log_prob(&us[r], &m, &ls),
                value: values[[r, 0]],
                reward: t.reward.breakdown.total_ex + rc[r],
                done: t.done,
            });
        }
    }
    for tr in &trajs {
        if tr.is_empty() {
            continue;
        }
        let rewards: Vec<f64> = tr.iter().map(|x| x.reward).collect();
        let values: Vec<f64> = tr.iter().map(|x| x.value).collect();
        let dones: Vec<bool> = tr.iter().map(|x| x.done).collect();
        let (adv, ret) = gae(&rewards, &values, &dones, 0.0, hyper.gamma, hyper.gae_lambda);
        for (k, x) in tr.iter().enumerate() {
            out.states.extend(&x.state);
            out.next_states.extend(&x.next);
            out.u.extend(x.u);
            out.logp.push(x.logp);
            out.adv.push(adv[k]);
            out.returns.push(ret[k]);
        }
    }
    let log = ep.finish();
    let summary = EpisodeSummary {
        ex: log.rewards.iter().map(|r| r.total_ex).sum(),
        curiosity: log.rewards.iter().map(|r| r.curiosity).sum(),
        arrived: log.outcomes.iter().filter(|&&o| o == Outcome::Arrived).count(),
        agents: n,
    };
    (ticks, summary)
}

/// Train from `init` (or fresh networks) over `scenarios` in rotation.
/// Each iteration gathers whole episodes until at least `horizon` ticks.
pub fn train(
    scenarios: &[Scenario],
    cfg: &TrainConfig,
    init: Option<Networks>,
    mut progress: impl FnMut(&CurvePoint),
) -> TrainResult {
    assert!(!scenarios.is_empty());
    let hyper = cfg.hyper;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut nets = init.unwrap_or_else(|| Networks::new(&hyper, cfg.seed));
    let mut opt = Optimizers::new(&nets, &hyper);
    let mut curve = Vec::new();
    let mut done_eps = 0;
    let mut diverged = false;
    while done_eps < cfg.episodes {
        let mut batch = Rollout::default();
        let mut ticks = 0;
        let (mut ex, mut cur, mut arrived, mut agents) = (0.0, 0.0, 0, 0);
        let start = done_eps;
        while ticks < hyper.horizon && done_eps < cfg.episodes {
            let sc = &scenarios[done_eps % scenarios.len()];
            let seed: u64 = rng.random();
            let (t, s) = collect_episode(&nets, &hyper, sc, cfg.variant.mode(), seed, &mut rng, &mut batch);
            ticks += t;
            ex += s.ex;
            cur += s.curiosity;
            arrived += s.arrived;
            agents += s.agents;
            done_eps += 1;
        }
        let stats = match ppo_update(&mut nets, &mut opt, &batch, &hyper, &mut rng) {
            Ok(s) => s,
            Err(_) => {
                diverged = true;
                break;
            }
        };
        let p = CurvePoint {
            iteration: curve.len(),
            episodes: done_eps - start,
            mean_ex_reward: ex / agents as f64,
            mean_curiosity: cur / agents as f64,
            success_rate: arrived as f64 / agents as f64,
            stats,
        };
        progress(&p);
        curve.push(p);
    }
    TrainResult {
        checkpoint: Checkpoint { nets, hyper },
        curve,
        diverged,
    }
}
