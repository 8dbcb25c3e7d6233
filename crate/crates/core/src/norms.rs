//! Asymmetric social-norm region, its penalty, and post-hoc rule
//! classification of trajectories.

use serde::{Deserialize, Serialize};

use crate::geometry::{polygons_overlap, Polygon, Pose, Vec2};

/// Body-frame key points (x forward, y left), listed as in the source figure.
pub const NORM_POINTS: [(f64, f64); 6] = [
    (0.07, 0.126),
    (0.21, 0.07),
    (0.21, -0.07),
    (0.07, -0.182),
    (-0.14, -0.07),
    (-0.14, 0.07),
];

pub const NORM_PENALTY: f64 = -2.0;

/// Beyond this minimum distance two agents are considered not to interact.
pub const INTERACTION_DISTANCE: f64 = 1.0;

pub fn default_norm_polygon() -> Polygon {
    Polygon::new(NORM_POINTS.iter().map(|&(x, y)| Vec2::new(x, y)).collect())
        .expect("built-in norm polygon is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormTrigger {
    /// The two agents' regions intersect.
    #[default]
    RegionOverlap,
    /// The other agent's center lies inside this agent's region.
    PointInRegion,
}

/// Penalty for agent `me` given the poses of the others: `NORM_PENALTY` if
/// any other agent triggers it, otherwise 0.
pub fn norm_reward(
    me: &Pose,
    region: &Polygon,
    others: &[Pose],
    other_regions: &[&Polygon],
    trigger: NormTrigger,
) -> f64 {
    let hit = others.iter().zip(other_regions).any(|(o, r)| match trigger {
        NormTrigger::RegionOverlap => polygons_overlap(region, me, r, o),
        NormTrigger::PointInRegion => region.contains(me.inverse_apply(o.position)),
    });
    if hit {
        NORM_PENALTY
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    None,
}

fn heading_at(traj: &[Vec2], k: usize) -> Option<Vec2> {
    let lo = k.saturating_sub(1);
    let hi = (k + 1).min(traj.len() - 1);
    let d = traj[hi] - traj[lo];
    d.normalized().or_else(|| {
        // Stationary around k: use the nearest motion before it.
        (1..traj.len())
            .rev()
            .filter(|&t| t <= k)
            .find_map(|t| (traj[t] - traj[t - 1]).normalized())
    })
}

/// Which side agent i kept while passing agent j. `Right` means j went by
/// on i's left, i.e. i kept to the right.
pub fn classify_pass_side(traj_i: &[Vec2], traj_j: &[Vec2]) -> Side {
    let n = traj_i.len().min(traj_j.len());
    if n < 2 {
        return Side::None;
    }
    let (k, d) = (0..n)
        .map(|t| (t, traj_i[t].distance(traj_j[t])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if d > INTERACTION_DISTANCE {
        return Side::None;
    }
    let Some(h) = heading_at(&traj_i[..n], k) else {
        return Side::None;
    };
    let c = h.cross(traj_j[k] - traj_i[k]);
    if c > 0.0 {
        Side::Right
    } else if c < 0.0 {
        Side::Left
    } else {
        Side::None
    }
}

/// Side on which the fast agent overtook the slow one, judged in the slow
/// agent's frame at the tick where their along-track order flips.
pub fn classify_overtake_side(traj_fast: &[Vec2], traj_slow: &[Vec2]) -> Side {
    let n = traj_fast.len().min(traj_slow.len());
    if n < 2 {
        return Side::None;
    }
    let mut prev: Option<f64> = None;
    for k in 0..n {
        let Some(h) = heading_at(&traj_slow[..n], k) else {
            continue;
        };
        let rel = traj_fast[k] - traj_slow[k];
        let along = h.dot(rel);
        if let Some(p) = prev {
            if p < 0.0 && along >= 0.0 {
                let lateral = h.cross(rel);
                if lateral.abs() > INTERACTION_DISTANCE {
                    return Side::None;
                }
                return if lateral > 0.0 { Side::Left } else { Side::Right };
            }
        }
        prev = Some(along);
    }
    Side::None
}

/// Smallest separation at which two agents circling each other in the given
/// sense keep their regions apart. Both headings are tangent to the orbit.
pub fn orbit_clearance(region: &Polygon, clockwise: bool) -> f64 {
    let sense = if clockwise { -1.0 } else { 1.0 };
    let overlaps = |r: f64| {
        let a = Pose::new(Vec2::new(r / 2.0, 0.0), sense * std::f64::consts::FRAC_PI_2);
        let b = Pose::new(Vec2::new(-r / 2.0, 0.0), -sense * std::f64::consts::FRAC_PI_2);
        polygons_overlap(region, &a, region, &b)
    };
    let mut r = 2.0;
    while r > 0.0 && !overlaps(r) {
        r -= 1e-4;
    }
    r + 1e-4
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn default_polygon_is_ccw_and_asymmetric() {
        let p = default_norm_polygon();
        assert!(p.area() > 0.0);
        let left = p.vertices().iter().map(|v| v.y).fold(f64::MIN, f64::max);
        let right = -p.vertices().iter().map(|v| v.y).fold(f64::MAX, f64::min);
        assert_relative_eq!(right / left, 0.182 / 0.126, epsilon = 1e-12);
        assert!(right / left > 1.4 && right / left < 1.5);
    }

    #[test]
    fn safety_disc_clearance() {
        // The front-left edge passes 0.1037 m from the center, just inside
        // the 0.105 m safety radius; everywhere else the disc is covered.
        let p = default_norm_polygon();
        let clearance = p.boundary_distance(Vec2::ZERO);
        let z61 = Segment::new(Vec2::new(-0.14, 0.07), Vec2::new(0.07, 0.126)).unwrap();
        assert_relative_eq!(clearance, z61.distance_to(Vec2::ZERO), epsilon = 1e-12);
        assert!((clearance - 0.1037).abs() < 1e-4);
        for i in 0..720 {
            let a = i as f64 * PI / 360.0;
            for r in [0.03, 0.06, 0.09, 0.1035] {
                assert!(p.contains(Vec2::from_angle(a) * r));
            }
        }
        // Rear vertices sit behind the disc.
        assert!(p.vertices().iter().filter(|v| v.x < 0.0).all(|v| v.x < -0.105));
    }

    #[test]
    fn far_agents_not_penalized() {
        let r = default_norm_polygon();
        let me = Pose::new(Vec2::ZERO, 0.0);
        let o = Pose::new(Vec2::new(5.0, 0.0), PI);
        assert_eq!(norm_reward(&me, &r, &[o], &[&r], NormTrigger::RegionOverlap), 0.0);
    }

    #[test]
    fn coincident_agents_penalized() {
        let r = default_norm_polygon();
        let me = Pose::new(Vec2::new(1.0, 1.0), 0.3);
        for t in [NormTrigger::RegionOverlap, NormTrigger::PointInRegion] {
            assert_eq!(norm_reward(&me, &r, &[me], &[&r], t), -2.0);
        }
    }

    #[test]
    fn head_on_close_agents_penalized() {
        let r = default_norm_polygon();
        let a = Pose::new(Vec2::ZERO, 0.0);
        let b = Pose::new(Vec2::new(0.3, 0.0), PI);
        assert_eq!(norm_reward(&a, &r, &[b], &[&r], NormTrigger::RegionOverlap), -2.0);
        // Oracle: a region vertex of one lies inside the other.
        let (wa, wb) = (r.transformed(&a), r.transformed(&b));
        assert!(wa.vertices().iter().any(|&v| wb.contains(v)) || wb.vertices().iter().any(|&v| wa.contains(v)));
    }

    #[test]
    fn one_penalty_per_tick() {
        let r = default_norm_polygon();
        let me = Pose::new(Vec2::ZERO, 0.0);
        let others = [me, me, me];
        assert_eq!(norm_reward(&me, &r, &others, &[&r, &r, &r], NormTrigger::RegionOverlap), -2.0);
    }

    #[test]
    fn clockwise_orbit_needs_more_room() {
        let r = default_norm_polygon();
        let cw = orbit_clearance(&r, true);
        let ccw = orbit_clearance(&r, false);
        assert!(cw > ccw, "cw {cw} ccw {ccw}");
    }

    fn line(from: Vec2, to: Vec2, n: usize) -> Vec<Vec2> {
        (0..n).map(|k| from + (to - from) * (k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn keep_right_lanes_classified_right() {
        // i drives +x in the lower lane, j drives −x in the upper lane.
        let i = line(Vec2::new(-3.0, -0.3), Vec2::new(3.0, -0.3), 61);
        let j = line(Vec2::new(3.0, 0.3), Vec2::new(-3.0, 0.3), 61);
        assert_eq!(classify_pass_side(&i, &j), Side::Right);
        assert_eq!(classify_pass_side(&j, &i), Side::Right);
    }

    #[test]
    fn keep_left_lanes_classified_left() {
        let i = line(Vec2::new(-3.0, 0.3), Vec2::new(3.0, 0.3), 61);
        let j = line(Vec2::new(3.0, -0.3), Vec2::new(-3.0, -0.3), 61);
        assert_eq!(classify_pass_side(&i, &j), Side::Left);
        assert_eq!(classify_pass_side(&j, &i), Side::Left);
    }

    #[test]
    fn distant_pass_is_none() {
        let i = line(Vec2::new(-3.0, -1.0), Vec2::new(3.0, -1.0), 61);
        let j = line(Vec2::new(3.0, 1.0), Vec2::new(-3.0, 1.0), 61);
        assert_eq!(classify_pass_side(&i, &j), Side::None);
    }

    #[test]
    fn unequal_lengths_truncate() {
        let i = line(Vec2::new(-3.0, -0.3), Vec2::new(3.0, -0.3), 61);
        let j = line(Vec2::new(3.0, 0.3), Vec2::new(-3.0, 0.3), 61);
        assert_eq!(classify_pass_side(&i, &j[..40]), Side::Right);
    }

    #[test]
    fn overtake_sides() {
        let slow = line(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), 41);
        let fast_left = line(Vec2::new(-1.0, 0.3), Vec2::new(4.0, 0.3), 41);
        let fast_right = line(Vec2::new(-1.0, -0.3), Vec2::new(4.0, -0.3), 41);
        assert_eq!(classify_overtake_side(&fast_left, &slow), Side::Left);
        assert_eq!(classify_overtake_side(&fast_right, &slow), Side::Right);
        let behind = line(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 41);
        assert_eq!(classify_overtake_side(&behind, &slow), Side::None);
    }

    proptest! {
        #[test]
        fn penalty_is_pairwise_symmetric(
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, ah in -PI..PI,
            bx in -1.0..1.0f64, by in -1.0..1.0f64, bh in -PI..PI,
        ) {
            let r = default_norm_polygon();
            let a = Pose::new(Vec2::new(ax, ay), ah);
            let b = Pose::new(Vec2::new(bx, by), bh);
            let ra = norm_reward(&a, &r, &[b], &[&r], NormTrigger::RegionOverlap);
            let rb = norm_reward(&b, &r, &[a], &[&r], NormTrigger::RegionOverlap);
            prop_assert_eq!(ra, rb);
            prop_assert!(ra == 0.0 || ra == -2.0);
        }
    }
}
