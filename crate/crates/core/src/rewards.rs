//! External reward: navigation terms plus the social-norm term.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub b_mf: f64,
    pub c_dir: f64,
    pub d_col_s: f64,
    pub e_col_d: f64,
    pub g_tim: f64,
    pub m_goal: f64,
    pub n_norm: f64,
    pub q_goal: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            b_mf: 3.0,
            c_dir: 1.0,
            d_col_s: -40.0,
            e_col_d: -15.0,
            g_tim: -0.25,
            m_goal: 80.0,
            n_norm: -2.0,
            q_goal: 0.12,
        }
    }
}

impl RewardConfig {
    /// Only the event terms: no progress or heading shaping.
    pub fn sparse() -> Self {
        Self {
            b_mf: 0.0,
            c_dir: 0.0,
            ..Self::default()
        }
    }

    /// Override one constant by name from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let mut v = serde_json::to_value(*self).map_err(|e| e.to_string())?;
        let obj = v.as_object_mut().expect("struct serializes to a map");
        if !obj.contains_key(key) {
            return Err(format!("unknown reward constant `{key}`"));
        }
        let x: f64 = value.parse().map_err(|_| format!("bad value for `{key}`: {value}"))?;
        obj.insert(key.into(), serde_json::json!(x));
        let next: Self = serde_json::from_value(v).map_err(|e| e.to_string())?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        let vals = [
            self.b_mf, self.c_dir, self.d_col_s, self.e_col_d, self.g_tim, self.m_goal, self.n_norm, self.q_goal,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err("reward constants must be finite".into());
        }
        if self.q_goal <= 0.0 {
            return Err("q_goal must be positive".into());
        }
        if self.d_col_s > 0.0 || self.e_col_d > 0.0 || self.g_tim > 0.0 || self.n_norm > 0.0 {
            return Err("penalty constants must be <= 0".into());
        }
        if self.m_goal <= 0.0 || self.b_mf < 0.0 || self.c_dir < 0.0 {
            return Err("goal reward must be positive and shaping weights nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub mf: f64,
    pub dir: f64,
    pub col_s: f64,
    pub col_d: f64,
    pub tim: f64,
    pub goal: f64,
    pub norm: f64,
    pub curiosity: f64,
    pub total_ex: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn finish(mut self) -> Self {
        self.total_ex = self.mf + self.dir + self.col_s + self.col_d + self.tim + self.goal + self.norm;
        self.total = self.total_ex + self.curiosity;
        self
    }

    pub fn with_curiosity(mut self, c: f64) -> Self {
        self.curiosity = c;
        self.finish()
    }
}

pub fn reward_mf(p_start: Vec2, p_now: Vec2, goal: Vec2) -> f64 {
    3.0 * (goal.distance(p_start) - goal.distance(p_now))
}

/// Heading-agreement reward in `[−π, π]`. The flag reports a zero-length
/// input, for which the reward is 0.
pub fn reward_dir(v: Vec2, goal_vec: Vec2) -> (f64, bool) {
    let (nv, ng) = (v.norm(), goal_vec.norm());
    if nv <= 1e-12 || ng <= 1e-12 {
        return (0.0, true);
    }
    let c = (v.dot(goal_vec) / (nv * ng)).clamp(-1.0, 1.0);
    (std::f64::consts::PI - 2.0 * c.acos().abs(), false)
}

/// Per-agent facts for one tick, evaluated after motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickContext {
    /// Position at the start of this tick.
    pub p_start: Vec2,
    pub p_now: Vec2,
    pub goal: Vec2,
    /// Commanded velocity vector this tick.
    pub velocity: Vec2,
    /// Speed that earns the full direction reward.
    pub v_max: f64,
    pub r_safe: f64,
    /// Point-to-polygon distance to the nearest static obstacle.
    pub obstacle_distance: f64,
    /// Some other agent within `r_i + r_j`.
    pub robot_contact: bool,
    pub norm_penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickReward {
    pub breakdown: RewardBreakdown,
    pub arrived: bool,
    pub static_collision: bool,
    pub dynamic_collision: bool,
    pub degenerate_dir: bool,
}

pub fn reward_step(cfg: &RewardConfig, ctx: &TickContext) -> TickReward {
    let (dir, degenerate_dir) = reward_dir(ctx.velocity, ctx.goal - ctx.p_now);
    let static_collision = ctx.obstacle_distance <= ctx.r_safe;
    let dynamic_collision = ctx.robot_contact;
    let arrived = ctx.p_now.distance(ctx.goal) <= cfg.q_goal;
    let b = RewardBreakdown {
        mf: cfg.b_mf / 3.0 * reward_mf(ctx.p_start, ctx.p_now, ctx.goal),
        dir: cfg.c_dir * dir * (ctx.velocity.norm() / ctx.v_max).min(1.0),
        col_s: if static_collision { cfg.d_col_s } else { 0.0 },
        col_d: if dynamic_collision { cfg.e_col_d } else { 0.0 },
        tim: cfg.g_tim,
        goal: if arrived { cfg.m_goal } else { 0.0 },
        norm: if ctx.norm_penalty != 0.0 { cfg.n_norm } else { 0.0 },
        ..Default::default()
    }
    .finish();
    TickReward {
        breakdown: b,
        arrived,
        static_collision,
        dynamic_collision,
        degenerate_dir,
    }
}
