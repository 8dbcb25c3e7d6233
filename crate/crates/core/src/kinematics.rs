//! Differential-drive model: the allowed holonomic velocity set, a heading
//! controller that tracks a holonomic velocity with `(v, w)` commands, and
//! exact unicycle integration.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};
use crate::orca::OrcaConstraintSet;

/// Heading gain of the tracking controller (1/s).
pub const HEADING_GAIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            v_min: 0.01,
            v_max: 0.20,
            w_min: -2.5,
            w_max: 2.5,
        }
    }
}

impl ActionBounds {
    pub fn with_v_max(v_max: f64) -> Self {
        Self {
            v_max,
            ..Self::default()
        }
    }

    /// Same box with the translational floor lowered to zero, used for
    /// executed commands so a robot can hold position.
    pub fn executable(&self) -> Self {
        Self { v_min: 0.0, ..*self }
    }

    pub fn clamp(&self, v: f64, w: f64) -> (f64, f64, bool) {
        let cv = v.clamp(self.v_min, self.v_max);
        let cw = w.clamp(self.w_min, self.w_max);
        (cv, cw, cv != v || cw != w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiffDriveState {
    pub position: Vec2,
    pub heading: f64,
    pub v: f64,
    pub w: f64,
}

/// Holonomic velocities a differential-drive robot can track.
///
/// Realized as the speed disc intersected with the forward half-plane of
/// the current heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllowedVelocitySet {
    pub max_speed: f64,
    pub tracking_error: f64,
    pub forward_cone_halfangle: f64,
}

impl AllowedVelocitySet {
    pub fn new(max_speed: f64, tracking_error: f64) -> Self {
        Self {
            max_speed,
            tracking_error,
            forward_cone_halfangle: FRAC_PI_2,
        }
    }

    /// Empty constraint set carrying the disc and the heading axis.
    pub fn base_constraints(&self, heading: f64) -> OrcaConstraintSet {
        OrcaConstraintSet::new(self.max_speed).with_forward_axis(heading)
    }

    pub fn contains(&self, v: Vec2, heading: f64) -> bool {
        v.norm() <= self.max_speed + 1e-12 && v.dot(Vec2::from_angle(heading)) >= -1e-12
    }

    /// Nearest member of the set.
    pub fn project(&self, v: Vec2, heading: f64) -> Vec2 {
        let h = Vec2::from_angle(heading);
        let along = v.dot(h);
        let v = if along < 0.0 { v - h * along } else { v };
        v.clamp_norm(self.max_speed)
    }
}

/// `(v, w)` command steering toward the holonomic velocity `v_h`.
pub fn track_holonomic(state: &DiffDriveState, v_h: Vec2, bounds: &ActionBounds) -> (f64, f64) {
    let speed = v_h.norm();
    if speed <= 1e-12 {
        let (v, w, _) = bounds.clamp(0.0, 0.0);
        return (v, w);
    }
    let err = wrap_angle(v_h.angle() - state.heading);
    let w = HEADING_GAIN * err;
    let v = speed * err.cos().max(0.0);
    let (v, w, _) = bounds.clamp(v, w);
    (v, w)
}

/// Exact unicycle arc for one step, unclamped.
pub fn arc_step(position: Vec2, heading: f64, v: f64, w: f64, dt: f64) -> (Vec2, f64) {
    let new_heading = heading + w * dt;
    let delta = if w.abs() < 1e-6 {
        Vec2::from_angle(heading + 0.5 * w * dt) * (v * dt)
    } else {
        let r = v / w;
        Vec2::new(
            r * (new_heading.sin() - heading.sin()),
            r * (heading.cos() - new_heading.cos()),
        )
    };
    (position + delta, wrap_angle(new_heading))
}

/// Advance `state` by `dt` under `(v, w)` clamped to `bounds`. The flag is
/// set when clamping changed the command.
pub fn integrate(
    state: &DiffDriveState,
    action: (f64, f64),
    dt: f64,
    bounds: &ActionBounds,
) -> (DiffDriveState, bool) {
    let (v, w, clamped) = bounds.clamp(action.0, action.1);
    let (position, heading) = arc_step(state.position, state.heading, v, w, dt);
    (
        DiffDriveState {
            position,
            heading,
            v,
            w,
        },
        clamped,
    )
}

/// Holonomic direction of a `(v, w)` command: the chord of the arc it traces.
pub fn command_to_holonomic(heading: f64, v: f64, w: f64, dt: f64) -> Vec2 {
    Vec2::from_angle(heading + 0.5 * w * dt) * v
}

/// Worst one-tick gap between the tracked arc and straight holonomic motion,
/// over speeds up to `bounds.v_max` and heading errors up to `max_error`.
pub fn tracking_error_bound(bounds: &ActionBounds, dt: f64, max_error: f64) -> f64 {
    let exec = bounds.executable();
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let err = max_error * i as f64 / 200.0;
        for j in 1..=20 {
            let speed = bounds.v_max * j as f64 / 20.0;
            let v_h = Vec2::from_angle(err) * speed;
            let state = DiffDriveState::default();
            let (v, w) = track_holonomic(&state, v_h, &exec);
            let (p, _) = arc_step(Vec2::ZERO, 0.0, v, w, dt);
            worst = worst.max(p.distance(v_h * dt));
        }
    }
    worst
}
