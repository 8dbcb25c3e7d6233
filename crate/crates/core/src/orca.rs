//! Priority-weighted reciprocal collision avoidance.
//!
//! Each neighbor contributes one half-plane of permitted velocities. The
//! avoidance adjustment `u` that escapes the truncated velocity-obstacle cone
//! is split between the two agents in proportion to the *other* agent's
//! priority, so a high-priority agent only absorbs a small share. The
//! resulting constraint set is solved by an incremental 2-D linear program;
//! when it is empty, a 3-D program minimizes the largest violation instead.

use serde::{Deserialize, Serialize};

use crate::geometry::{point_to_halfplane_distance, HalfPlane, Polygon, Vec2, EPS};

/// Velocity-obstacle query for one ordered agent pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoQuery {
    /// `p_j − p_i`
    pub rel_position: Vec2,
    /// `v_i^opt − v_j^opt`
    pub rel_opt_velocity: Vec2,
    /// Sum of both safety radii including tracking error.
    pub combined_radius: f64,
    pub tau: f64,
}

impl VoQuery {
    pub fn is_valid(&self) -> bool {
        self.combined_radius > 0.0
            && self.tau > 0.0
            && self.rel_position.norm() > self.combined_radius
    }
}

/// Priorities of the deciding agent (`pr_i`) and the neighbor (`pr_j`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrioritySplit {
    pub pr_i: f64,
    pub pr_j: f64,
}

impl PrioritySplit {
    pub fn equal() -> Self {
        Self { pr_i: 1.0, pr_j: 1.0 }
    }

    /// Share of the adjustment taken by agent `i`.
    pub fn share(&self) -> f64 {
        self.pr_j / (self.pr_i + self.pr_j)
    }
}

/// True iff some `t ∈ (0, τ]` puts `t·v` strictly inside the disc of radius
/// `combined_radius` centred at `rel_position`.
pub fn vo_contains(q: &VoQuery, candidate_rel_velocity: Vec2) -> bool {
    let v = candidate_rel_velocity;
    let p = q.rel_position;
    let vv = v.norm_sq();
    if vv <= 0.0 {
        return p.norm() < q.combined_radius;
    }
    let t = (v.dot(p) / vv).clamp(0.0, q.tau);
    // t = 0 only when moving away; the separated start point is outside.
    (v * t - p).norm() < q.combined_radius && t > 0.0
}

/// Minimal adjustment `u` from the relative optimal velocity to the boundary
/// of the truncated cone, and the outward boundary normal `n` there.
pub fn compute_u_and_n(q: &VoQuery) -> (Vec2, Vec2) {
    let rel_pos = q.rel_position;
    let rel_vel = q.rel_opt_velocity;
    let r = q.combined_radius;
    let inv_tau = 1.0 / q.tau;
    let dist_sq = rel_pos.norm_sq();
    let r_sq = r * r;

    // Vector from the cutoff centre to the relative velocity.
    let w = rel_vel - rel_pos * inv_tau;
    let w_len_sq = w.norm_sq();
    let dot1 = w.dot(rel_pos);

    if dot1 < 0.0 && dot1 * dot1 > r_sq * w_len_sq {
        // Closest boundary point lies on the cutoff arc.
        let w_len = w_len_sq.sqrt();
        let unit_w = w / w_len;
        let u = unit_w * (r * inv_tau - w_len);
        (u, unit_w)
    } else {
        // Closest boundary point lies on one of the two legs.
        let leg = (dist_sq - r_sq).sqrt();
        let direction = if rel_pos.cross(w) > 0.0 {
            Vec2::new(
                rel_pos.x * leg - rel_pos.y * r,
                rel_pos.x * r + rel_pos.y * leg,
            ) / dist_sq
        } else {
            -Vec2::new(
                rel_pos.x * leg + rel_pos.y * r,
                -rel_pos.x * r + rel_pos.y * leg,
            ) / dist_sq
        };
        let u = direction * rel_vel.dot(direction) - rel_vel;
        // Allowed side is to the left of the leg direction.
        (u, direction.perp())
    }
}

/// Half-plane `{v : (v − (v_opt_i + share·u))·n ≥ 0}`.
pub fn priority_halfplane(v_opt_i: Vec2, u: Vec2, n: Vec2, split: PrioritySplit) -> HalfPlane {
    HalfPlane {
        point: v_opt_i + u * split.share(),
        normal: n,
    }
}

/// What the deciding agent knows about itself or a neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrcaAgent {
    pub position: Vec2,
    /// Velocity used as `v^opt` in the cone construction.
    pub velocity: Vec2,
    /// Safety radius plus tracking error.
    pub radius: f64,
    pub priority: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrcaParams {
    /// Agent–agent horizon (s).
    pub tau: f64,
    /// Agent–obstacle horizon (s).
    pub tau_obst: f64,
    /// Simulation tick (s), used by the interpenetration recovery branch.
    pub dt: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        Self {
            tau: 3.0,
            tau_obst: 1.5,
            dt: 0.2,
        }
    }
}

/// Velocity constraints for one agent at one tick.
///
/// `halfplanes` come from neighbors and may be relaxed by [`lp3`];
/// `obstacle_halfplanes` and the forward axis are never relaxed unless they
/// are infeasible on their own.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrcaConstraintSet {
    pub halfplanes: Vec<HalfPlane>,
    pub obstacle_halfplanes: Vec<HalfPlane>,
    pub max_speed: f64,
    /// Unit heading; when set, `v·heading ≥ 0` is enforced (no backward motion).
    pub forward_axis: Option<Vec2>,
}

impl OrcaConstraintSet {
    pub fn new(max_speed: f64) -> Self {
        Self {
            max_speed,
            ..Default::default()
        }
    }

    pub fn with_forward_axis(mut self, heading: f64) -> Self {
        self.forward_axis = Some(Vec2::from_angle(heading));
        self
    }

    fn hard(&self) -> Vec<HalfPlane> {
        let mut hard = self.obstacle_halfplanes.clone();
        if let Some(h) = self.forward_axis {
            hard.push(HalfPlane {
                point: Vec2::ZERO,
                normal: h,
            });
        }
        hard
    }

    /// Every constraint in solve order: neighbors, then obstacles and axis.
    pub fn all(&self) -> Vec<HalfPlane> {
        let mut v = self.halfplanes.clone();
        v.extend(self.hard());
        v
    }

    pub fn len(&self) -> usize {
        self.halfplanes.len() + self.obstacle_halfplanes.len() + self.forward_axis.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `v` satisfies every constraint and the speed disc.
    pub fn admits(&self, v: Vec2) -> bool {
        v.norm() <= self.max_speed + EPS && self.all().iter().all(|h| h.contains(v))
    }

    /// Largest constraint violation of `v` (0 when feasible).
    pub fn max_violation(&self, v: Vec2) -> f64 {
        self.all()
            .iter()
            .map(|h| (-point_to_halfplane_distance(v, h)).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest violation over the relaxable (neighbor) constraints only.
    pub fn max_agent_violation(&self, v: Vec2) -> f64 {
        self.halfplanes
            .iter()
            .map(|h| (-point_to_halfplane_distance(v, h)).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Build the constraint set for `me`.
///
/// Neighbors are processed nearest first. Each obstacle edge within reach
/// contributes a half-plane that keeps the agent's disc off the edge for
/// `tau_obst`; the agent takes full responsibility for it.
pub fn assemble_constraints(
    me: &OrcaAgent,
    neighbors: &[OrcaAgent],
    obstacles: &[Polygon],
    params: &OrcaParams,
    max_speed: f64,
) -> OrcaConstraintSet {
    let mut set = OrcaConstraintSet::new(max_speed);

    let mut order: Vec<&OrcaAgent> = neighbors.iter().collect();
    order.sort_by(|a, b| {
        a.position
            .distance(me.position)
            .total_cmp(&b.position.distance(me.position))
    });
    for other in order {
        let split = PrioritySplit {
            pr_i: me.priority,
            pr_j: other.priority,
        };
        set.halfplanes.push(neighbor_halfplane(me, other, split, params));
    }

    let reach = max_speed * params.tau_obst;
    for poly in obstacles {
        for edge in poly.edges() {
            let c = edge.closest_point(me.position);
            let offset = c - me.position;
            let d = offset.norm();
            let gap = d - me.radius;
            if gap > reach + EPS {
                continue;
            }
            let Some(toward) = offset.normalized() else {
                continue;
            };
            let limit = if gap > 0.0 {
                gap / params.tau_obst
            } else {
                gap / params.dt
            };
            set.obstacle_halfplanes.push(HalfPlane {
                point: toward * limit,
                normal: -toward,
            });
        }
    }
    set
}

fn neighbor_halfplane(
    me: &OrcaAgent,
    other: &OrcaAgent,
    split: PrioritySplit,
    params: &OrcaParams,
) -> HalfPlane {
    let rel_position = other.position - me.position;
    let rel_velocity = me.velocity - other.velocity;
    let combined_radius = me.radius + other.radius;
    let q = VoQuery {
        rel_position,
        rel_opt_velocity: rel_velocity,
        combined_radius,
        tau: params.tau,
    };
    if q.is_valid() {
        let (u, n) = compute_u_and_n(&q);
        return priority_halfplane(me.velocity, u, n, split);
    }
    // Already overlapping: push apart within one tick.
    let inv_dt = 1.0 / params.dt;
    let w = rel_velocity - rel_position * inv_dt;
    let unit_w = w
        .normalized()
        .or_else(|| (-rel_position).normalized())
        .unwrap_or(Vec2::new(-1.0, 0.0));
    let u = unit_w * (combined_radius * inv_dt - w.norm());
    priority_halfplane(me.velocity, u, unit_w, split)
}

/// Internal line representation: allowed side is left of `dir`.
#[derive(Debug, Clone, Copy)]
struct Line {
    point: Vec2,
    dir: Vec2,
}

impl From<&HalfPlane> for Line {
    fn from(h: &HalfPlane) -> Self {
        Line {
            point: h.point,
            dir: h.direction(),
        }
    }
}

/// Amount by which `v` violates `line` (positive = outside).
fn violation(line: &Line, v: Vec2) -> f64 {
    line.dir.cross(line.point - v)
}

/// Optimum on the boundary of `lines[idx]`, clipped by earlier lines and the disc.
fn solve_on_line(
    lines: &[Line],
    idx: usize,
    radius: f64,
    target: Vec2,
    direction_opt: bool,
) -> Option<Vec2> {
    let line = lines[idx];
    let dot = line.point.dot(line.dir);
    let disc = dot * dot + radius * radius - line.point.norm_sq();
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let mut t_left = -dot - sq;
    let mut t_right = -dot + sq;

    for prev in &lines[..idx] {
        let denom = line.dir.cross(prev.dir);
        let numer = prev.dir.cross(line.point - prev.point);
        if denom.abs() <= EPS {
            if numer < -EPS {
                return None;
            }
            continue;
        }
        let t = numer / denom;
        if denom >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right + EPS {
            return None;
        }
    }
    if t_left > t_right {
        let mid = 0.5 * (t_left + t_right);
        t_left = mid;
        t_right = mid;
    }

    let t = if direction_opt {
        if target.dot(line.dir) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.dir.dot(target - line.point).clamp(t_left, t_right)
    };
    Some(line.point + line.dir * t)
}

enum Lp2 {
    Feasible(Vec2),
    Infeasible { failed: usize, partial: Vec2 },
}

fn solve_lp2(lines: &[Line], radius: f64, target: Vec2, direction_opt: bool) -> Lp2 {
    let mut result = if direction_opt {
        target * radius
    } else {
        target.clamp_norm(radius)
    };
    for i in 0..lines.len() {
        if violation(&lines[i], result) > 0.0 {
            match solve_on_line(lines, i, radius, target, direction_opt) {
                Some(r) => result = r,
                None => {
                    return Lp2::Infeasible {
                        failed: i,
                        partial: result,
                    }
                }
            }
        }
    }
    Lp2::Feasible(result)
}

/// Velocity closest to `v_preferred` inside every half-plane and the speed
/// disc, or `None` when that region is empty.
pub fn lp2(constraints: &OrcaConstraintSet, v_preferred: Vec2) -> Option<Vec2> {
    let lines: Vec<Line> = constraints.all().iter().map(Line::from).collect();
    match solve_lp2(&lines, constraints.max_speed, v_preferred, false) {
        Lp2::Feasible(v) => Some(v),
        Lp2::Infeasible { .. } => None,
    }
}

/// Velocity inside the speed disc minimizing the largest neighbor-constraint
/// violation, with obstacle and forward-axis constraints kept hard.
///
/// If the hard constraints cannot be met on their own, every constraint is
/// relaxed uniformly instead.
pub fn lp3(constraints: &OrcaConstraintSet) -> Vec2 {
    let hard: Vec<Line> = constraints.hard().iter().map(Line::from).collect();
    let soft: Vec<Line> = constraints.halfplanes.iter().map(Line::from).collect();
    let radius = constraints.max_speed;

    let mut lines = hard.clone();
    lines.extend(soft.iter().copied());
    let mut num_hard = hard.len();

    let (begin, partial) = match solve_lp2(&lines, radius, Vec2::ZERO, false) {
        Lp2::Feasible(v) => return v,
        Lp2::Infeasible { failed, partial } => (failed, partial),
    };
    if begin < num_hard {
        num_hard = 0;
    }
    let begin = if num_hard == 0 { 0 } else { begin };
    let start = if num_hard == 0 { Vec2::ZERO } else { partial };
    minimax(&lines, num_hard, begin, radius, start)
}

fn minimax(lines: &[Line], num_hard: usize, begin: usize, radius: f64, start: Vec2) -> Vec2 {
    let mut result = start;
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if violation(&lines[i], result) <= distance + EPS {
            continue;
        }
        let mut proj: Vec<Line> = lines[..num_hard].to_vec();
        for j in num_hard..i {
            let det = lines[i].dir.cross(lines[j].dir);
            let point = if det.abs() <= EPS {
                if lines[i].dir.dot(lines[j].dir) > 0.0 {
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].dir * (lines[j].dir.cross(lines[i].point - lines[j].point) / det)
            };
            let Some(dir) = (lines[j].dir - lines[i].dir).normalized() else {
                continue;
            };
            proj.push(Line { point, dir });
        }
        let target = lines[i].dir.perp();
        if let Lp2::Feasible(v) = solve_lp2(&proj, radius, target, true) {
            result = v;
        }
        distance = violation(&lines[i], result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn q(rel_position: Vec2, rel_opt_velocity: Vec2, r: f64, tau: f64) -> VoQuery {
        VoQuery {
            rel_position,
            rel_opt_velocity,
            combined_radius: r,
            tau,
        }
    }

    #[test]
    fn vo_contains_examples() {
        let base = q(Vec2::new(1.0, 0.0), Vec2::ZERO, 0.2, 2.0);
        assert!(!vo_contains(&base, Vec2::ZERO));
        // Ray-disc oracle: first contact at |p|−r over speed = 0.8/0.5 = 1.6 s ≤ 2 s.
        assert!(vo_contains(&base, Vec2::new(0.5, 0.0)));
        assert!(!vo_contains(&base, Vec2::new(0.0, 0.5)));
        // Contact at 1.6 s is beyond a 1.5 s horizon.
        let short = q(Vec2::new(1.0, 0.0), Vec2::ZERO, 0.2, 1.5);
        assert!(!vo_contains(&short, Vec2::new(0.5, 0.0)));
    }

    #[test]
    fn u_is_zero_on_boundary() {
        // Point on the cutoff arc straight back toward the origin.
        let query = q(Vec2::new(1.0, 0.0), Vec2::new(0.4, 0.0), 0.2, 2.0);
        let (u, n) = compute_u_and_n(&query);
        assert!(u.norm() < 1e-12);
        assert_relative_eq!(n.x, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn head_on_projection_is_axial() {
        let query = q(Vec2::new(1.0, 0.0), Vec2::new(0.45, 0.0), 0.2, 2.0);
        let (u, _) = compute_u_and_n(&query);
        assert!(u.y.abs() < 1e-12);
        assert!(u.x < 0.0);
        let oracle_d = oracle::vo_boundary_distance(&query, query.rel_opt_velocity);
        assert!((u.norm() - oracle_d).abs() < 1e-4);
    }

    #[test]
    fn u_norm_matches_boundary_sampling_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let dist = rng.random_range(0.5..2.0);
            let ang = rng.random_range(-PI..PI);
            let query = q(
                Vec2::from_angle(ang) * dist,
                Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                rng.random_range(0.1..0.4),
                rng.random_range(1.0..4.0),
            );
            let (u, n) = compute_u_and_n(&query);
            let d = oracle::vo_boundary_distance(&query, query.rel_opt_velocity);
            assert!((u.norm() - d).abs() < 2e-4, "{} vs {d}", u.norm());
            // Moving a hair along n from the boundary point leaves the cone.
            let b = query.rel_opt_velocity + u;
            assert!(!vo_contains(&query, b + n * 1e-6));
            assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn priority_split_examples() {
        let v = Vec2::new(0.1, 0.0);
        let u = Vec2::new(0.0, 0.22);
        let n = Vec2::new(0.0, 1.0);
        let eq = priority_halfplane(v, u, n, PrioritySplit::equal());
        assert_eq!(eq.point, v + u * 0.5);
        let low = priority_halfplane(v, u, n, PrioritySplit { pr_i: 1.0, pr_j: 10.0 });
        assert_relative_eq!(low.point.y, 0.22 * 10.0 / 11.0, epsilon = 1e-15);
        let none = priority_halfplane(v, u, n, PrioritySplit { pr_i: 1.0, pr_j: 1e-12 });
        assert!((none.point - v).norm() < 1e-12);
    }

    fn agent(x: f64, y: f64, vx: f64, vy: f64) -> OrcaAgent {
        OrcaAgent {
            position: Vec2::new(x, y),
            velocity: Vec2::new(vx, vy),
            radius: 0.15,
            priority: 1.0,
        }
    }

    #[test]
    fn empty_scene_has_no_constraints() {
        let set = assemble_constraints(&agent(0.0, 0.0, 0.1, 0.0), &[], &[], &OrcaParams::default(), 0.2);
        assert!(set.is_empty());
    }

    #[test]
    fn distant_neighbors_leave_preference_free() {
        let me = agent(0.0, 0.0, 0.1, 0.0);
        let n = [agent(0.0, 5.0, 0.0, 0.0), agent(-6.0, 0.0, 0.0, 0.0)];
        let params = OrcaParams::default();
        let set = assemble_constraints(&me, &n, &[], &params, 0.2);
        assert_eq!(set.halfplanes.len(), 2);
        for (h, o) in set.halfplanes.iter().zip([n[0], n[1]]) {
            let query = VoQuery {
                rel_position: o.position - me.position,
                rel_opt_velocity: me.velocity - o.velocity,
                combined_radius: 0.3,
                tau: params.tau,
            };
            assert!(!vo_contains(&query, me.velocity));
            assert!(point_to_halfplane_distance(me.velocity, h) > 0.0);
        }
    }

    #[test]
    fn closing_neighbor_excludes_preference() {
        let me = agent(0.0, 0.0, 0.2, 0.0);
        let other = agent(0.8, 0.0, -0.2, 0.0);
        let params = OrcaParams::default();
        let query = VoQuery {
            rel_position: other.position - me.position,
            rel_opt_velocity: me.velocity - other.velocity,
            combined_radius: 0.3,
            tau: params.tau,
        };
        assert!(vo_contains(&query, query.rel_opt_velocity));
        let set = assemble_constraints(&me, &[other], &[], &params, 0.2);
        assert_eq!(set.halfplanes.len(), 1);
        assert!(!set.halfplanes[0].contains(me.velocity));
    }

    #[test]
    fn neighbors_are_ordered_by_distance() {
        let me = agent(0.0, 0.0, 0.0, 0.0);
        let far = agent(0.0, 2.0, 0.0, -0.2);
        let near = agent(1.0, 0.0, -0.2, 0.0);
        let set = assemble_constraints(&me, &[far, near], &[], &OrcaParams::default(), 0.2);
        let alone = assemble_constraints(&me, &[near], &[], &OrcaParams::default(), 0.2);
        assert_eq!(set.halfplanes[0], alone.halfplanes[0]);
    }

    #[test]
    fn obstacle_edge_caps_approach_speed() {
        let wall = Polygon::rect(Vec2::new(0.4, -1.0), Vec2::new(0.7, 1.0)).unwrap();
        let me = agent(0.0, 0.0, 0.2, 0.0);
        let params = OrcaParams::default();
        let set = assemble_constraints(&me, &[], &[wall], &params, 0.2);
        assert!(!set.obstacle_halfplanes.is_empty());
        let v = lp2(&set, Vec2::new(0.2, 0.0)).unwrap();
        assert!(v.x <= (0.4 - 0.15) / params.tau_obst + 1e-12);
    }

    #[test]
    fn lp2_examples() {
        let mut set = OrcaConstraintSet::new(0.2);
        assert_eq!(lp2(&set, Vec2::new(0.1, 0.0)), Some(Vec2::new(0.1, 0.0)));
        set.halfplanes.push(HalfPlane::new(Vec2::new(-0.1, 0.0), Vec2::new(1.0, 0.0)));
        assert_eq!(lp2(&set, Vec2::new(0.1, 0.0)), Some(Vec2::new(0.1, 0.0)));

        let mut set = OrcaConstraintSet::new(0.2);
        set.halfplanes.push(HalfPlane::new(Vec2::new(0.05, 0.0), Vec2::new(1.0, 0.0)));
        let v = lp2(&set, Vec2::new(0.0, 0.1)).unwrap();
        assert_relative_eq!(v.x, 0.05, epsilon = 1e-12);
        assert_relative_eq!(v.y, 0.1, epsilon = 1e-12);
        let grid = oracle::grid_lp2(&set, Vec2::new(0.0, 0.1), 400).unwrap();
        assert!(v.distance(grid) <= 2.0 * oracle::grid_resolution(0.2, 400));
    }

    #[test]
    fn lp2_reports_infeasible() {
        let mut set = OrcaConstraintSet::new(0.2);
        set.halfplanes.push(HalfPlane::new(Vec2::new(0.15, 0.0), Vec2::new(1.0, 0.0)));
        set.halfplanes.push(HalfPlane::new(Vec2::new(-0.15, 0.0), Vec2::new(-1.0, 0.0)));
        assert_eq!(lp2(&set, Vec2::ZERO), None);
    }

    #[test]
    fn lp3_equalizes_opposing_violations() {
        let mut set = OrcaConstraintSet::new(0.2);
        set.halfplanes.push(HalfPlane::new(Vec2::new(0.15, 0.0), Vec2::new(1.0, 0.0)));
        set.halfplanes.push(HalfPlane::new(Vec2::new(-0.15, 0.0), Vec2::new(-1.0, 0.0)));
        let v = lp3(&set);
        assert!(v.x.abs() < 1e-9);
        assert_relative_eq!(set.max_violation(v), 0.15, epsilon = 1e-9);
        let (_, grid_val) = oracle::grid_lp3(&set, 400);
        assert!(set.max_violation(v) <= grid_val + 2.0 * oracle::grid_resolution(0.2, 400));
    }

    #[test]
    fn lp3_symmetric_ring_returns_origin() {
        let mut set = OrcaConstraintSet::new(0.2);
        for k in 0..6 {
            let n = Vec2::from_angle(k as f64 * PI / 3.0);
            set.halfplanes.push(HalfPlane::new(n * 0.1, n));
        }
        assert_eq!(lp2(&set, Vec2::new(0.05, 0.0)), None);
        let v = lp3(&set);
        assert!(v.norm() < 1e-9, "{v:?}");
    }

    #[test]
    fn lp3_on_feasible_set_has_zero_violation() {
        let mut set = OrcaConstraintSet::new(0.2);
        set.halfplanes.push(HalfPlane::new(Vec2::new(0.05, 0.0), Vec2::new(1.0, 0.0)));
        assert_eq!(set.max_violation(lp3(&set)), 0.0);
    }

    #[test]
    fn lp3_keeps_hard_constraints() {
        let mut set = OrcaConstraintSet::new(0.2);
        set.halfplanes.push(HalfPlane::new(Vec2::new(0.15, 0.0), Vec2::new(1.0, 0.0)));
        set.halfplanes.push(HalfPlane::new(Vec2::new(-0.15, 0.0), Vec2::new(-1.0, 0.0)));
        set.obstacle_halfplanes.push(HalfPlane::new(Vec2::new(-0.05, 0.0), Vec2::new(-1.0, 0.0)));
        let v = lp3(&set);
        assert!(v.x <= -0.05 + 1e-9);
    }

    #[test]
    fn forward_axis_blocks_reverse() {
        let set = OrcaConstraintSet::new(0.2).with_forward_axis(0.0);
        let v = lp2(&set, Vec2::new(-0.1, 0.05)).unwrap();
        assert!(v.x >= -1e-12);
        assert_relative_eq!(v.y, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn equal_priority_is_bit_identical_to_half_split() {
        let me = agent(0.0, 0.0, 0.2, 0.0);
        let other = agent(1.0, 0.1, -0.2, 0.0);
        let set = assemble_constraints(&me, &[other], &[], &OrcaParams::default(), 0.2);
        let query = VoQuery {
            rel_position: other.position - me.position,
            rel_opt_velocity: me.velocity - other.velocity,
            combined_radius: 0.3,
            tau: 4.0,
        };
        let (u, n) = compute_u_and_n(&query);
        assert_eq!(set.halfplanes[0], HalfPlane { point: me.velocity + 0.5 * u, normal: n });
    }

    proptest! {
        #[test]
        fn priority_monotone_along_u(
            ux in -0.3..0.3f64, uy in -0.3..0.3f64, a in 0.1..10.0f64, b in 0.1..10.0f64, c in 0.1..10.0f64,
        ) {
            let u = Vec2::new(ux, uy);
            let n = Vec2::new(1.0, 0.0);
            let v = Vec2::new(0.1, 0.0);
            let lo = priority_halfplane(v, u, n, PrioritySplit { pr_i: a, pr_j: b });
            let hi = priority_halfplane(v, u, n, PrioritySplit { pr_i: a, pr_j: b + c });
            // Larger neighbor priority ⇒ larger share ⇒ further along u.
            prop_assert!((hi.point - v).dot(u) >= (lo.point - v).dot(u) - 1e-15);
        }

        #[test]
        fn pairwise_soundness(
            px in -1.5..1.5f64, py in -1.5..1.5f64,
            vix in -0.2..0.2f64, viy in -0.2..0.2f64, vjx in -0.2..0.2f64, vjy in -0.2..0.2f64,
            pi in 0.5..5.0f64, pj in 0.5..5.0f64,
            gix in -0.2..0.2f64, giy in -0.2..0.2f64, gjx in -0.2..0.2f64, gjy in -0.2..0.2f64,
        ) {
            let a = OrcaAgent { position: Vec2::ZERO, velocity: Vec2::new(vix, viy), radius: 0.15, priority: pi };
            let b = OrcaAgent { position: Vec2::new(px, py), velocity: Vec2::new(vjx, vjy), radius: 0.15, priority: pj };
            prop_assume!(b.position.norm() > 0.31);
            let params = OrcaParams::default();
            let sa = assemble_constraints(&a, &[b], &[], &params, 0.2);
            let sb = assemble_constraints(&b, &[a], &[], &params, 0.2);
            if let (Some(va), Some(vb)) = (lp2(&sa, Vec2::new(gix, giy)), lp2(&sb, Vec2::new(gjx, gjy))) {
                let query = VoQuery {
                    rel_position: b.position - a.position,
                    rel_opt_velocity: va - vb,
                    combined_radius: 0.3 - 1e-6,
                    tau: params.tau,
                };
                prop_assert!(!vo_contains(&query, va - vb));
            }
        }

        #[test]
        fn lp3_within_disc_and_no_worse_than_preference(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let set = oracle::random_constraint_set(&mut rng, 8, 0.2);
            let pref = Vec2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            let v = lp3(&set);
            prop_assert!(v.norm() <= 0.2 + 1e-9);
            if lp2(&set, pref).is_none() {
                prop_assert!(set.max_violation(v) <= set.max_violation(pref.clamp_norm(0.2)) + 1e-9);
            }
        }

        #[test]
        fn lp2_feasible_result_satisfies_all(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let set = oracle::random_constraint_set(&mut rng, 8, 0.2);
            let pref = Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            if let Some(v) = lp2(&set, pref) {
                prop_assert!(set.admits(v));
            }
        }
    }
}
