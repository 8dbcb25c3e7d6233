//! Per-tick execution policy: filter the learned action through the
//! priority-weighted ORCA constraints of the current scene.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::kinematics::{command_to_holonomic, track_holonomic, tracking_error_bound, AllowedVelocitySet, DiffDriveState};
use crate::orca::{assemble_constraints, lp2, lp3, OrcaAgent, OrcaConstraintSet, OrcaParams};
use crate::sim::{Command, World, SENSING_RANGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// The learned velocity already satisfies every constraint.
    Case1 = 0,
    /// Closest feasible velocity to the learned one.
    Case2 = 1,
    /// No feasible velocity: minimize the largest violation.
    Case3 = 2,
}

impl Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Case::Case1 => "1",
            Case::Case2 => "2",
            Case::Case3 => "3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionDecision {
    pub case: Case,
    pub v_rl: Vec2,
    pub v_final: Vec2,
    pub constraint_count: usize,
    pub max_violation: f64,
}

pub fn fuse(v_rl: Vec2, constraints: &OrcaConstraintSet) -> FusionDecision {
    let (case, v_final) = if constraints.admits(v_rl) {
        (Case::Case1, v_rl)
    } else if let Some(v) = lp2(constraints, v_rl) {
        (Case::Case2, v)
    } else {
        (Case::Case3, lp3(constraints))
    };
    FusionDecision {
        case,
        v_rl,
        v_final,
        constraint_count: constraints.len(),
        max_violation: constraints.max_violation(v_final),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    OrcaDrl,
    PureDrl,
    PureOrca,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::OrcaDrl => "orca-drl",
            Mode::PureDrl => "pure-drl",
            Mode::PureOrca => "pure-orca",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        [Mode::OrcaDrl, Mode::PureDrl, Mode::PureOrca]
            .into_iter()
            .find(|m| m.as_str() == s)
    }

    pub fn needs_policy(&self) -> bool {
        !matches!(self, Mode::PureOrca)
    }
}

/// Parameters shared by every agent's decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub orca: OrcaParams,
    /// Tracking error added to every safety radius.
    pub eps_h: f64,
}

impl FusionParams {
    pub fn new(dt: f64) -> Self {
        let bounds = crate::kinematics::ActionBounds::default();
        Self {
            orca: OrcaParams {
                dt,
                ..OrcaParams::default()
            },
            eps_h: tracking_error_bound(&bounds, dt, std::f64::consts::FRAC_PI_2),
        }
    }
}

/// Constraint set for agent `i` with its own `v_opt`, built from the
/// committed state of the agents it can see.
pub fn agent_constraints(world: &World, i: usize, v_opt: Vec2, params: &FusionParams) -> OrcaConstraintSet {
    let me = &world.agents[i];
    let own = OrcaAgent {
        position: me.position,
        velocity: v_opt,
        radius: me.r_safe + params.eps_h,
        priority: me.priority,
    };
    let neighbors: Vec<OrcaAgent> = world
        .neighbors(i, SENSING_RANGE)
        .into_iter()
        .map(|j| {
            let o = world.agents[j].observed();
            OrcaAgent {
                position: o.position,
                velocity: o.velocity,
                radius: o.r_safe + params.eps_h,
                priority: o.priority,
            }
        })
        .collect();
    let avs = AllowedVelocitySet::new(me.bounds.v_max, params.eps_h);
    let mut set = assemble_constraints(&own, &neighbors, world.obstacles(), &params.orca, avs.max_speed);
    set.forward_axis = avs.base_constraints(me.heading).forward_axis;
    set
}

/// Preferred holonomic velocity straight at the goal, slowing for the last tick.
pub fn preferred_velocity(world: &World, i: usize) -> Vec2 {
    let a = &world.agents[i];
    let to_goal = a.goal - a.position;
    let d = to_goal.norm();
    match to_goal.normalized() {
        Some(u) => u * a.v_pref.min(d / world.scenario.dt),
        None => Vec2::ZERO,
    }
}

/// Command for agent `i`. `rl_action` is the policy's `(v, w)` and is
/// required in the learned modes.
pub fn step_policy(
    mode: Mode,
    world: &World,
    i: usize,
    rl_action: Option<(f64, f64)>,
    params: &FusionParams,
) -> (Command, Option<FusionDecision>) {
    let a = &world.agents[i];
    let dt = world.scenario.dt;
    let state = DiffDriveState {
        position: a.position,
        heading: a.heading,
        v: a.v,
        w: a.w,
    };
    let exec = a.bounds.executable();
    match mode {
        Mode::PureDrl => {
            let (v, w) = rl_action.expect("learned mode without an action");
            (
                Command {
                    v,
                    w,
                    ..Default::default()
                },
                None,
            )
        }
        Mode::OrcaDrl => {
            let (v, w) = rl_action.expect("learned mode without an action");
            let avs = AllowedVelocitySet::new(a.bounds.v_max, params.eps_h);
            let v_rl = avs.project(command_to_holonomic(a.heading, v, w, dt), a.heading);
            let set = agent_constraints(world, i, v_rl, params);
            let d = fuse(v_rl, &set);
            let (v, w) = if d.case == Case::Case1 {
                (v, w)
            } else {
                track_holonomic(&state, d.v_final, &exec)
            };
            (
                Command {
                    v,
                    w,
                    case: Some(d.case),
                    r_c: 0.0,
                },
                Some(d),
            )
        }
        Mode::PureOrca => {
            let pref = preferred_velocity(world, i);
            let set = agent_constraints(world, i, a.velocity, params);
            let d = fuse(pref, &set);
            let (v, w) = track_holonomic(&state, d.v_final, &exec);
            (
                Command {
                    v,
                    w,
                    case: Some(d.case),
                    r_c: 0.0,
                },
                Some(d),
            )
        }
    }
}
