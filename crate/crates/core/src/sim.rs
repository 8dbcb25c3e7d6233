//! World state, sensing, the synchronous tick and episode logging.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fusion::{step_policy, Case, FusionParams, Mode};
use crate::geometry::{ray_cast, wrap_angle, Polygon, Pose, Vec2};
use crate::kinematics::{arc_step, command_to_holonomic, ActionBounds};
use crate::norms::norm_reward;
use crate::rewards::{reward_step, RewardBreakdown, TickContext, TickReward};
use crate::scenario::{Placement, Scenario};

pub const SENSING_RANGE: f64 = 2.0;
pub const K_NEIGHBORS: usize = 3;
pub const LIDAR_RAYS: usize = 8;
pub const LIDAR_RANGE: f64 = 3.0;
pub const SELF_DIM: usize = 9;
pub const NEIGHBOR_DIM: usize = 7;
pub const STATE_DIM: usize = SELF_DIM + NEIGHBOR_DIM * K_NEIGHBORS + LIDAR_RAYS;

pub const ROTATE_WINDOW: usize = 50;
pub const ROTATE_MAX_DISPLACEMENT: f64 = 0.02;
pub const ROTATE_MIN_W: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Arrived,
    ColRobot,
    ColObst,
    Timeout,
    RotateInPlace,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Arrived => "arrived",
            Outcome::ColRobot => "col_robot",
            Outcome::ColObst => "col_obst",
            Outcome::Timeout => "timeout",
            Outcome::RotateInPlace => "rotate_in_place",
        }
    }

    pub fn parse(s: &str) -> Option<Outcome> {
        [
            Outcome::Running,
            Outcome::Arrived,
            Outcome::ColRobot,
            Outcome::ColObst,
            Outcome::Timeout,
            Outcome::RotateInPlace,
        ]
        .into_iter()
        .find(|o| o.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub goal: Vec2,
    pub start: Vec2,
    pub position: Vec2,
    /// Displacement over the last tick divided by dt.
    pub velocity: Vec2,
    pub v_pref: f64,
    pub heading: f64,
    pub r_safe: f64,
    pub priority: f64,
    pub bounds: ActionBounds,
    /// Last executed command.
    pub v: f64,
    pub w: f64,
    /// `Running` while active; anything else is terminal.
    pub outcome: Outcome,
    pub arrival_tick: Option<u32>,
}

impl AgentState {
    pub fn active(&self) -> bool {
        self.outcome == Outcome::Running
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.heading)
    }

    pub fn observed(&self) -> ObservedAgent {
        ObservedAgent {
            position: self.position,
            velocity: self.velocity,
            r_safe: self.r_safe,
            heading: self.heading,
            priority: self.priority,
        }
    }
}

/// What another agent can see: goal and preferred speed stay hidden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedAgent {
    pub position: Vec2,
    pub velocity: Vec2,
    pub r_safe: f64,
    pub heading: f64,
    pub priority: f64,
}

#[derive(Debug, Clone)]
pub struct World<'s> {
    pub scenario: &'s Scenario,
    pub agents: Vec<AgentState>,
    pub tick: u32,
}

impl<'s> World<'s> {
    pub fn new(scenario: &'s Scenario, placements: &[Placement]) -> Self {
        let agents = scenario
            .agents
            .iter()
            .zip(placements)
            .map(|(spec, p)| AgentState {
                goal: p.goal,
                start: p.position,
                position: p.position,
                velocity: Vec2::ZERO,
                v_pref: spec.v_max,
                heading: p.heading,
                r_safe: spec.r_safe,
                priority: spec.priority,
                bounds: ActionBounds::with_v_max(spec.v_max),
                v: 0.0,
                w: 0.0,
                outcome: Outcome::Running,
                arrival_tick: None,
            })
            .collect();
        World {
            scenario,
            agents,
            tick: 0,
        }
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.scenario.obstacles
    }

    /// Active agents other than `i` within sensing range, nearest first.
    pub fn neighbors(&self, i: usize, range: f64) -> Vec<usize> {
        let me = self.agents[i].position;
        let mut out: Vec<(usize, f64)> = self
            .agents
            .iter()
            .enumerate()
            .filter(|(j, a)| *j != i && a.active())
            .map(|(j, a)| (j, a.position.distance(me)))
            .filter(|&(_, d)| d <= range)
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out.into_iter().map(|(j, _)| j).collect()
    }

    pub fn obstacle_distance(&self, p: Vec2) -> f64 {
        self.obstacles()
            .iter()
            .map(|o| o.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_terminal(&self) -> bool {
        self.agents.iter().all(|a| !a.active())
    }
}

/// Egocentric observation of agent `i`: own state, the `K_NEIGHBORS`
/// nearest visible agents (zero padded), then the LIDAR ranges, all scaled
/// to order one.
pub fn sense(world: &World, i: usize) -> Vec<f64> {
    let me = &world.agents[i];
    let pose = me.pose();
    let to_body = |v: Vec2| v.rotate(-me.heading);
    let mut s = Vec::with_capacity(STATE_DIM);

    let g = to_body(me.goal - me.position);
    let dist = g.norm();
    let dir = g.normalized().unwrap_or(Vec2::ZERO);
    s.extend_from_slice(&[
        (dist / 5.0).min(2.0),
        dir.x,
        dir.y,
        me.v / 0.2,
        me.w / 2.5,
        me.v_pref / 0.2,
        me.heading / std::f64::consts::PI,
        me.r_safe / 0.105,
        me.priority / 10.0,
    ]);

    let nbrs = world.neighbors(i, SENSING_RANGE);
    for k in 0..K_NEIGHBORS {
        match nbrs.get(k) {
            Some(&j) => {
                let o = world.agents[j].observed();
                let rp = pose.inverse_apply(o.position);
                let rv = to_body(o.velocity - me.velocity);
                s.extend_from_slice(&[
                    rp.x / SENSING_RANGE,
                    rp.y / SENSING_RANGE,
                    rv.x / 0.4,
                    rv.y / 0.4,
                    o.r_safe / 0.105,
                    wrap_angle(o.heading - me.heading) / std::f64::consts::PI,
                    o.priority / 10.0,
                ]);
            }
            None => s.extend_from_slice(&[0.0; NEIGHBOR_DIM]),
        }
    }

    s.extend(lidar(world.obstacles(), &pose).into_iter().map(|d| d / LIDAR_RANGE));
    s
}

/// Ray ranges in the body frame, first ray straight ahead, counterclockwise.
pub fn lidar(obstacles: &[Polygon], pose: &Pose) -> [f64; LIDAR_RAYS] {
    let mut out = [0.0; LIDAR_RAYS];
    for (k, o) in out.iter_mut().enumerate() {
        let a = pose.heading + k as f64 * std::f64::consts::TAU / LIDAR_RAYS as f64;
        *o = ray_cast(pose.position, Vec2::from_angle(a), obstacles, LIDAR_RANGE);
    }
    out
}

/// What an agent does this tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    pub v: f64,
    pub w: f64,
    pub case: Option<Case>,
    pub r_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TickEvents {
    pub static_collision: bool,
    pub dynamic_collision: bool,
    pub arrived: bool,
}

/// Move every active agent simultaneously, then mark collisions and arrivals.
/// Inactive agents ignore their entry in `actions`.
pub fn step_world(world: &mut World, actions: &[(f64, f64)], q_goal: f64) -> Vec<TickEvents> {
    let dt = world.scenario.dt;
    world.tick += 1;
    for (a, &(v, w)) in world.agents.iter_mut().zip(actions) {
        if !a.active() {
            a.velocity = Vec2::ZERO;
            a.v = 0.0;
            a.w = 0.0;
            continue;
        }
        let (v, w, _) = a.bounds.executable().clamp(v, w);
        let (p, h) = arc_step(a.position, a.heading, v, w, dt);
        a.velocity = (p - a.position) / dt;
        a.position = p;
        a.heading = h;
        a.v = v;
        a.w = w;
    }
    let mut ev = vec![TickEvents::default(); world.agents.len()];
    let n = world.agents.len();
    for i in 0..n {
        if !world.agents[i].active() {
            continue;
        }
        for j in (i + 1)..n {
            if !world.agents[j].active() {
                continue;
            }
            let (a, b) = (&world.agents[i], &world.agents[j]);
            if a.position.distance(b.position) <= a.r_safe + b.r_safe {
                ev[i].dynamic_collision = true;
                ev[j].dynamic_collision = true;
            }
        }
        let a = &world.agents[i];
        ev[i].static_collision = world.obstacle_distance(a.position) <= a.r_safe;
        ev[i].arrived = a.position.distance(a.goal) <= q_goal;
    }
    let tick = world.tick;
    for (a, e) in world.agents.iter_mut().zip(&ev) {
        if !a.active() {
            continue;
        }
        if e.dynamic_collision {
            a.outcome = Outcome::ColRobot;
        } else if e.static_collision {
            a.outcome = Outcome::ColObst;
        } else if e.arrived {
            a.outcome = Outcome::Arrived;
            a.arrival_tick = Some(tick);
        }
    }
    ev
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub tick: u32,
    pub agent: usize,
    pub px: f64,
    pub py: f64,
    pub psi: f64,
    pub v: f64,
    pub w: f64,
    pub case: Option<Case>,
    pub r_ex: f64,
    pub r_c: f64,
    pub outcome: Outcome,
}

pub const LOG_HEADER: &str = "tick,agent,px,py,psi,v,w,case,r_ex,r_c,outcome";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub dt: f64,
    pub rows: Vec<LogRow>,
    pub outcomes: Vec<Outcome>,
    pub arrival_ticks: Vec<Option<u32>>,
    /// Start position followed by one position per tick.
    pub trajectories: Vec<Vec<Vec2>>,
    pub goals: Vec<Vec2>,
    pub rewards: Vec<RewardBreakdown>,
    pub ticks: u32,
}

impl EpisodeLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 80);
        s.push_str(LOG_HEADER);
        s.push('\n');
        for r in &self.rows {
            let case = r.case.map(|c| c.as_str()).unwrap_or("");
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{}",
                r.tick,
                r.agent,
                r.px,
                r.py,
                r.psi,
                r.v,
                r.w,
                case,
                r.r_ex,
                r.r_c,
                r.outcome.as_str()
            );
        }
        s
    }

    pub fn case_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.rows {
            if let Some(k) = r.case {
                c[k as usize] += 1;
            }
        }
        c
    }
}

/// Episode in progress: world plus reward and detector bookkeeping.
pub struct Episode<'s> {
    pub world: World<'s>,
    window: Vec<VecDeque<(Vec2, f64)>>,
    pub log: EpisodeLog,
    rng: ChaCha8Rng,
    seed: u64,
    pub degenerate_dir_count: usize,
}

/// Per-agent outcome of one tick for an agent active at its start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentTick {
    pub reward: TickReward,
    /// The agent's life ended this tick (arrival, collision, time limit).
    pub done: bool,
}

impl<'s> Episode<'s> {
    pub fn new(scenario: &'s Scenario, seed: u64) -> Self {
        let placements = scenario.place(seed);
        let world = World::new(scenario, &placements);
        let n = world.agents.len();
        let log = EpisodeLog {
            dt: scenario.dt,
            trajectories: world.agents.iter().map(|a| vec![a.position]).collect(),
            goals: world.agents.iter().map(|a| a.goal).collect(),
            outcomes: vec![Outcome::Running; n],
            arrival_ticks: vec![None; n],
            rewards: vec![RewardBreakdown::default(); n],
            ..Default::default()
        };
        Episode {
            world,
            window: vec![VecDeque::with_capacity(ROTATE_WINDOW + 1); n],
            log,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_c1c1e),
            seed,
            degenerate_dir_count: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn finished(&self) -> bool {
        self.world.all_terminal() || self.world.tick >= self.world.scenario.tick_limit
    }

    /// Advance one tick with one command per agent (ignored for inactive
    /// agents). Returns an entry for each agent that was active.
    pub fn step(&mut self, cmds: &[Command]) -> Vec<Option<AgentTick>> {
        let sc = self.world.scenario;
        let cfg = sc.rewards;
        let was_active: Vec<bool> = self.world.agents.iter().map(|a| a.active()).collect();
        let actions: Vec<(f64, f64)> = cmds.iter().map(|c| (c.v, c.w)).collect();
        let before: Vec<Vec2> = self.world.agents.iter().map(|a| a.position).collect();
        let events = step_world(&mut self.world, &actions, cfg.q_goal);
        let tick = self.world.tick;
        let last_tick = tick >= sc.tick_limit;

        let n = self.world.agents.len();
        let poses: Vec<Pose> = self.world.agents.iter().map(|a| a.pose()).collect();
        let mut out = vec![None; n];
        for i in 0..n {
            if !was_active[i] {
                continue;
            }
            let a = &self.world.agents[i];
            let others: Vec<Pose> = (0..n).filter(|&j| j != i && was_active[j]).map(|j| poses[j]).collect();
            let regions: Vec<&Polygon> = others.iter().map(|_| &sc.norm_polygon).collect();
            let norm = norm_reward(&poses[i], &sc.norm_polygon, &others, &regions, sc.norm_trigger);
            let ctx = TickContext {
                p_start: before[i],
                p_now: a.position,
                goal: a.goal,
                velocity: command_to_holonomic(a.heading - a.w * sc.dt, a.v, a.w, sc.dt),
                v_max: a.bounds.v_max,
                r_safe: a.r_safe,
                obstacle_distance: self.world.obstacle_distance(a.position),
                robot_contact: events[i].dynamic_collision,
                norm_penalty: norm,
            };
            let mut r = reward_step(&cfg, &ctx);
            r.breakdown = r.breakdown.with_curiosity(cmds[i].r_c);
            if r.degenerate_dir {
                self.degenerate_dir_count += 1;
            }
            let w = &mut self.window[i];
            w.push_back((a.position, a.w));
            if w.len() > ROTATE_WINDOW {
                w.pop_front();
            }
            let acc = &mut self.log.rewards[i];
            let b = r.breakdown;
            acc.mf += b.mf;
            acc.dir += b.dir;
            acc.col_s += b.col_s;
            acc.col_d += b.col_d;
            acc.tim += b.tim;
            acc.goal += b.goal;
            acc.norm += b.norm;
            acc.curiosity += b.curiosity;
            acc.total_ex += b.total_ex;
            acc.total += b.total;
            out[i] = Some(AgentTick {
                reward: r,
                done: !a.active() || last_tick,
            });
        }

        if last_tick {
            for i in 0..n {
                if self.world.agents[i].active() {
                    self.world.agents[i].outcome = if self.rotating_in_place(i) {
                        Outcome::RotateInPlace
                    } else {
                        Outcome::Timeout
                    };
                }
            }
        }

        for i in 0..n {
            let a = &self.world.agents[i];
            let r = out[i].map(|t| t.reward.breakdown).unwrap_or_default();
            self.log.rows.push(LogRow {
                tick,
                agent: i,
                px: a.position.x,
                py: a.position.y,
                psi: a.heading,
                v: a.v,
                w: a.w,
                case: if was_active[i] { cmds[i].case } else { None },
                r_ex: r.total_ex,
                r_c: r.curiosity,
                outcome: a.outcome,
            });
            self.log.trajectories[i].push(a.position);
        }

        if sc.cyclic_respawn {
            self.respawn_arrived(tick);
        }
        self.log.ticks = tick;
        for i in 0..n {
            let a = &self.world.agents[i];
            if a.outcome != Outcome::Running || self.log.outcomes[i] != Outcome::Arrived {
                self.log.outcomes[i] = a.outcome;
            }
            if a.arrival_tick.is_some() && self.log.arrival_ticks[i].is_none() {
                self.log.arrival_ticks[i] = a.arrival_tick;
            }
        }
        out
    }

    fn rotating_in_place(&self, i: usize) -> bool {
        let w = &self.window[i];
        if w.len() < ROTATE_WINDOW {
            return false;
        }
        let first = w.front().unwrap().0;
        let last = w.back().unwrap().0;
        first.distance(last) < ROTATE_MAX_DISPLACEMENT && w.iter().all(|&(_, om)| om.abs() > ROTATE_MIN_W)
    }

    fn respawn_arrived(&mut self, tick: u32) {
        let sc = self.world.scenario;
        for i in 0..self.world.agents.len() {
            if self.world.agents[i].outcome != Outcome::Arrived || tick >= sc.tick_limit {
                continue;
            }
            let spec = &sc.agents[i];
            let p = spec.spawn.sample(&mut self.rng);
            let clear = self
                .world
                .agents
                .iter()
                .enumerate()
                .all(|(j, o)| j == i || !o.active() || o.position.distance(p) > o.r_safe + spec.r_safe + 0.02);
            if !clear {
                continue;
            }
            self.log.outcomes[i] = Outcome::Arrived;
            let goal = spec.goal.sample(&mut self.rng);
            let a = &mut self.world.agents[i];
            a.position = p;
            a.start = p;
            a.goal = goal;
            a.heading = (goal - p).angle();
            a.velocity = Vec2::ZERO;
            a.outcome = Outcome::Running;
            a.arrival_tick = None;
            self.window[i].clear();
        }
    }

    /// Attach a curiosity bonus to agent `i`'s most recent tick.
    pub fn add_curiosity(&mut self, i: usize, r_c: f64) {
        let n = self.world.agents.len();
        let k = self.log.rows.len() - n + i;
        self.log.rows[k].r_c += r_c;
        let acc = &mut self.log.rewards[i];
        acc.curiosity += r_c;
        acc.total += r_c;
    }

    pub fn finish(self) -> EpisodeLog {
        self.log
    }
}

/// Source of learned `(v, w)` actions for an observation.
pub trait ActionSource: Sync {
    fn act(&self, state: &[f64], bounds: &ActionBounds) -> (f64, f64);
}

/// Run one episode to completion with every agent under `mode`.
pub fn run_episode(
    scenario: &Scenario,
    mode: Mode,
    policy: Option<&dyn ActionSource>,
    seed: u64,
) -> EpisodeLog {
    let params = FusionParams::new(scenario.dt);
    let mut ep = Episode::new(scenario, seed);
    let n = scenario.agents.len();
    while !ep.finished() {
        let w = &ep.world;
        let cmds: Vec<Command> = (0..n)
            .map(|i| {
                if !w.agents[i].active() {
                    return Command::default();
                }
                let rl = policy.filter(|_| mode.needs_policy()).map(|p| p.act(&sense(w, i), &w.agents[i].bounds));
                step_policy(mode, w, i, rl, &params).0
            })
            .collect();
        ep.step(&cmds);
    }
    ep.finish()
}

/// Re-check a finished log from its rows alone: successful agents never
/// exceed their speed cap and keep clear of obstacles and of every other
/// agent that is still present.
pub fn validate_log(log: &EpisodeLog, scenario: &Scenario) -> Result<(), String> {
    let n = scenario.agents.len();
    if log.rows.len() != log.ticks as usize * n {
        return Err(format!("{} rows for {} ticks x {} agents", log.rows.len(), log.ticks, n));
    }
    for tick_rows in log.rows.chunks(n) {
        for r in tick_rows {
            if log.outcomes[r.agent] != Outcome::Arrived {
                continue;
            }
            let spec = &scenario.agents[r.agent];
            if r.v > spec.v_max + 1e-9 {
                return Err(format!("agent {} speed {} at tick {}", r.agent, r.v, r.tick));
            }
            let p = Vec2::new(r.px, r.py);
            let d = scenario
                .obstacles
                .iter()
                .map(|o| o.distance_to(p))
                .fold(f64::INFINITY, f64::min);
            // Rows carry the state after the tick, rounded to 1e-6.
            if d <= spec.r_safe - 1e-5 {
                return Err(format!("agent {} hits an obstacle at tick {}", r.agent, r.tick));
            }
            for o in tick_rows {
                if o.agent == r.agent || !(o.outcome == Outcome::Running || (o.outcome == Outcome::Arrived && o.tick == log.arrival_ticks[o.agent].unwrap_or(0))) {
                    continue;
                }
                let q = Vec2::new(o.px, o.py);
                if p.distance(q) <= spec.r_safe + scenario.agents[o.agent].r_safe - 1e-5 {
                    return Err(format!("agents {} and {} touch at tick {}", r.agent, o.agent, r.tick));
                }
            }
        }
    }
    Ok(())
}
