//! Scenario files: obstacles, spawn and goal regions, per-agent limits.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Polygon, Vec2};
use crate::norms::{default_norm_polygon, NormTrigger};
use crate::rewards::RewardConfig;

pub const DEFAULT_R_SAFE: f64 = 0.105;

const BUILTIN: [(&str, &str); 6] = [
    ("1", include_str!("../../../scenarios/scenario1.toml")),
    ("2", include_str!("../../../scenarios/scenario2.toml")),
    ("3", include_str!("../../../scenarios/scenario3.toml")),
    ("4", include_str!("../../../scenarios/scenario4.toml")),
    ("crossroad4", include_str!("../../../scenarios/crossroad4.toml")),
    ("4-sparse", include_str!("../../../scenarios/scenario4_sparse.toml")),
];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocialRule {
    #[default]
    None,
    PassRight,
    OvertakeLeft,
}

/// Axis-aligned sampling box; a point when `min == max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Region {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec2 {
        let pick = |lo: f64, hi: f64, rng: &mut R| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let x = pick(self.min[0], self.max[0], rng);
        let y = pick(self.min[1], self.max[1], rng);
        Vec2::new(x, y)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1]))
    }
}

fn default_v_max() -> f64 {
    0.2
}
fn default_priority() -> f64 {
    1.0
}
fn default_r_safe() -> f64 {
    DEFAULT_R_SAFE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub spawn: Region,
    pub goal: Region,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_priority")]
    pub priority: f64,
    #[serde(default = "default_r_safe")]
    pub r_safe: f64,
    /// Initial heading; faces the goal when absent.
    #[serde(default)]
    pub heading: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RawObstacle {
    vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default = "default_dt")]
    dt: f64,
    tick_limit: u32,
    #[serde(default)]
    social_rule: SocialRule,
    #[serde(default)]
    cyclic_respawn: bool,
    #[serde(default)]
    norm_polygon: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    norm_trigger: NormTrigger,
    #[serde(default)]
    rewards: RewardConfig,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
    agents: Vec<AgentSpec>,
}

fn default_dt() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dt: f64,
    pub tick_limit: u32,
    pub social_rule: SocialRule,
    pub cyclic_respawn: bool,
    pub norm_polygon: Polygon,
    pub norm_trigger: NormTrigger,
    pub rewards: RewardConfig,
    pub obstacles: Vec<Polygon>,
    pub agents: Vec<AgentSpec>,
}

/// Initial placement of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub position: Vec2,
    pub goal: Vec2,
    pub heading: f64,
}

fn to_polygon(pts: &[[f64; 2]]) -> Result<Polygon, ScenarioError> {
    Polygon::new(pts.iter().map(|p| Vec2::new(p[0], p[1])).collect())
        .map_err(|e| ScenarioError::Invalid(e.to_string()))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text)?;
        let obstacles = raw
            .obstacles
            .iter()
            .map(|o| to_polygon(&o.vertices))
            .collect::<Result<Vec<_>, _>>()?;
        let norm_polygon = match &raw.norm_polygon {
            Some(v) => to_polygon(v)?,
            None => default_norm_polygon(),
        };
        let s = Scenario {
            name: raw.name,
            dt: raw.dt,
            tick_limit: raw.tick_limit,
            social_rule: raw.social_rule,
            cyclic_respawn: raw.cyclic_respawn,
            norm_polygon,
            norm_trigger: raw.norm_trigger,
            rewards: raw.rewards,
            obstacles,
            agents: raw.agents,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    /// Built-in id (`1`..`4`, `crossroad4`, `4-sparse`) or a path to a file.
    pub fn resolve(id_or_path: &str) -> Result<Self, ScenarioError> {
        if let Some((_, text)) = BUILTIN.iter().find(|(k, _)| *k == id_or_path) {
            return Self::from_toml(text);
        }
        let p = std::path::Path::new(id_or_path);
        if p.exists() {
            return Self::load(p);
        }
        Err(ScenarioError::Unknown(id_or_path.into()))
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.tick_limit == 0 {
            return bad("tick_limit must be positive");
        }
        if self.agents.is_empty() {
            return bad("no agents");
        }
        for a in &self.agents {
            if !(a.r_safe > 0.0 && a.priority > 0.0 && a.v_max > 0.0) {
                return bad("r_safe, priority and v_max must be positive");
            }
            for r in [&a.spawn, &a.goal] {
                if r.min[0] > r.max[0] || r.min[1] > r.max[1] {
                    return bad("region min exceeds max");
                }
            }
        }
        self.rewards.validate().map_err(ScenarioError::Invalid)?;
        Ok(())
    }

    /// Sample start and goal positions. Spawns are redrawn until no two
    /// agents overlap and none touches an obstacle.
    pub fn place(&self, seed: u64) -> Vec<Placement> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<Placement> = Vec::with_capacity(self.agents.len());
        for spec in &self.agents {
            let mut tries = 0;
            let position = loop {
                let p = spec.spawn.sample(&mut rng);
                tries += 1;
                let clear_agents = out
                    .iter()
                    .zip(&self.agents)
                    .all(|(o, s)| o.position.distance(p) > spec.r_safe + s.r_safe + 0.02);
                let clear_obst = self.obstacles.iter().all(|o| o.distance_to(p) > spec.r_safe);
                if (clear_agents && clear_obst) || tries > 1000 {
                    break p;
                }
            };
            let goal = spec.goal.sample(&mut rng);
            let heading = spec.heading.unwrap_or_else(|| (goal - position).angle());
            out.push(Placement {
                position,
                goal,
                heading,
            });
        }
        out
    }
}

/// Built-in scenario by numeric id with spawns drawn from `seed`.
pub fn build_scenario(id: &str, seed: u64) -> Result<(Scenario, Vec<Placement>), ScenarioError> {
    let s = Scenario::resolve(id)?;
    let p = s.place(seed);
    Ok((s, p))
}

pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(k, _)| *k)
}
