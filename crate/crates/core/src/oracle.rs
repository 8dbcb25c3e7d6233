//! Brute-force reference computations.
//!
//! Everything here is deliberately naive (grid search, ray marching, finite
//! differences) and never calls the solvers it is used to check.

use rand::Rng;

use crate::geometry::{point_to_halfplane_distance, HalfPlane, Vec2};
use crate::orca::{vo_contains, OrcaConstraintSet, VoQuery};

/// Spacing of an `n × n` grid spanning `[−radius, radius]²`.
pub fn grid_resolution(radius: f64, n: usize) -> f64 {
    2.0 * radius / (n - 1) as f64
}

fn grid_points(radius: f64, n: usize) -> impl Iterator<Item = Vec2> {
    let h = grid_resolution(radius, n);
    (0..n).flat_map(move |i| {
        (0..n).filter_map(move |j| {
            let v = Vec2::new(-radius + i as f64 * h, -radius + j as f64 * h);
            (v.norm() <= radius).then_some(v)
        })
    })
}

fn satisfies(hs: &[HalfPlane], v: Vec2) -> bool {
    hs.iter().all(|h| point_to_halfplane_distance(v, h) >= 0.0)
}

fn worst_violation(hs: &[HalfPlane], v: Vec2) -> f64 {
    hs.iter()
        .map(|h| (-point_to_halfplane_distance(v, h)).max(0.0))
        .fold(0.0, f64::max)
}

/// Grid point closest to `pref` among those satisfying every constraint.
pub fn grid_lp2(set: &OrcaConstraintSet, pref: Vec2, n: usize) -> Option<Vec2> {
    let all = set.all();
    grid_points(set.max_speed, n)
        .filter(|&v| satisfies(&all, v))
        .min_by(|a, b| a.distance(pref).total_cmp(&b.distance(pref)))
}

/// Grid minimizer of the largest neighbor-constraint violation, subject to the
/// hard constraints when any grid point meets them. Returns the point and
/// its minimax value.
pub fn grid_lp3(set: &OrcaConstraintSet, n: usize) -> (Vec2, f64) {
    let mut hard = set.obstacle_halfplanes.clone();
    if let Some(h) = set.forward_axis {
        hard.push(HalfPlane {
            point: Vec2::ZERO,
            normal: h,
        });
    }
    let soft = &set.halfplanes;
    let best = |use_hard: bool| {
        grid_points(set.max_speed, n)
            .filter(|&v| !use_hard || satisfies(&hard, v))
            .map(|v| {
                let val = if use_hard {
                    worst_violation(soft, v)
                } else {
                    worst_violation(soft, v).max(worst_violation(&hard, v))
                };
                (v, val)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };
    best(true)
        .or_else(|| best(false))
        .expect("grid contains the origin")
}

/// Random set of `1..=max_k` half-planes through points in the disc.
pub fn random_constraint_set<R: Rng>(rng: &mut R, max_k: usize, radius: f64) -> OrcaConstraintSet {
    let k = rng.random_range(1..=max_k);
    let mut set = OrcaConstraintSet::new(radius);
    for _ in 0..k {
        let r = radius * rng.random::<f64>().sqrt();
        let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let point = Vec2::from_angle(a) * r;
        let normal = Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        set.halfplanes.push(HalfPlane { point, normal });
    }
    set
}

/// Distance from `x` to the boundary of the velocity obstacle, found by
/// marching rays from `x` and locating the first membership change.
pub fn vo_boundary_distance(q: &VoQuery, x: Vec2) -> f64 {
    let inside = vo_contains(q, x);
    let centre = q.rel_position / q.tau;
    let reach = x.distance(centre) + q.combined_radius / q.tau + 1e-3;
    let angles = 1440;
    let step = reach / 1500.0;
    let mut best = f64::INFINITY;
    for k in 0..angles {
        let dir = Vec2::from_angle(k as f64 * std::f64::consts::TAU / angles as f64);
        let mut prev = 0.0;
        let mut s = step;
        while s <= reach.min(best) + step {
            if vo_contains(q, x + dir * s) != inside {
                let (mut lo, mut hi) = (prev, s);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if vo_contains(q, x + dir * mid) != inside {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                best = best.min(hi);
                break;
            }
            prev = s;
            s += step;
        }
    }
    best
}

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Outcome of one oracle suite.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub failures: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<5} instances {:>5}  worst {:.3e}  tolerance {:.3e}  failures {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.instances,
            self.worst,
            self.tolerance,
            self.failures
        )
    }
}

pub const SUITES: [&str; 4] = ["lp2", "lp3", "vo", "grad"];
const GRID: usize = 400;
const DISC: f64 = 0.2;

fn tally(suite: &str, devs: impl Iterator<Item = f64>, tolerance: f64) -> SuiteReport {
    let (mut n, mut worst, mut failures) = (0, 0.0f64, 0);
    for d in devs {
        n += 1;
        worst = worst.max(d);
        if !(d <= tolerance) {
            failures += 1;
        }
    }
    SuiteReport {
        suite: suite.into(),
        instances: n,
        worst,
        tolerance,
        failures,
    }
}

/// lp2 against the grid minimizer. The deviation is how much farther from
/// the preferred velocity lp2's answer is than the best feasible grid
/// point, or its own constraint violation, whichever is larger.
pub fn lp2_suite(instances: usize, seed: u64) -> SuiteReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let tol = 2.0 * grid_resolution(DISC, GRID);
    let devs: Vec<f64> = (0..instances)
        .map(|_| {
            let set = random_constraint_set(&mut rng, 8, DISC);
            let pref = Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                * (DISC * rng.random::<f64>().sqrt());
            match (crate::orca::lp2(&set, pref), grid_lp2(&set, pref, GRID)) {
                (Some(v), Some(g)) => (v.distance(pref) - g.distance(pref)).max(set.max_violation(v)).max(0.0),
                (Some(v), None) => set.max_violation(v),
                (None, Some(_)) => f64::INFINITY,
                (None, None) => 0.0,
            }
        })
        .collect();
    tally("lp2", devs.into_iter(), tol)
}

/// Constraint set biased toward infeasibility: every half-plane demands
/// speed away from the origin.
pub fn random_outward_set<R: Rng>(rng: &mut R, max_k: usize, radius: f64) -> OrcaConstraintSet {
    let k = rng.random_range(2..=max_k);
    let mut set = OrcaConstraintSet::new(radius);
    for _ in 0..k {
        let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let n = Vec2::from_angle(a);
        let point = n * (radius * rng.random_range(0.2..0.9));
        set.halfplanes.push(HalfPlane { point, normal: n });
    }
    set
}

/// lp3's minimax violation against the grid minimax value.
pub fn lp3_suite(instances: usize, seed: u64) -> SuiteReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let tol = 2.0 * grid_resolution(DISC, GRID);
    let devs: Vec<f64> = (0..instances)
        .map(|k| {
            let set = if k % 2 == 0 {
                random_outward_set(&mut rng, 8, DISC)
            } else {
                random_constraint_set(&mut rng, 8, DISC)
            };
            let v = crate::orca::lp3(&set);
            let (_, val) = grid_lp3(&set, GRID);
            let outside = (v.norm() - DISC).max(0.0);
            (set.max_agent_violation(v) - val).max(outside).max(0.0)
        })
        .collect();
    tally("lp3", devs.into_iter(), tol)
}

/// `‖u‖` from the closed-form VO projection against ray marching.
pub fn vo_suite(instances: usize, seed: u64) -> SuiteReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let devs: Vec<f64> = (0..instances)
        .map(|_| {
            let q = VoQuery {
                rel_position: Vec2::from_angle(rng.random_range(-3.1..3.1)) * rng.random_range(0.5..2.0),
                rel_opt_velocity: Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                combined_radius: rng.random_range(0.1..0.4),
                tau: rng.random_range(1.0..4.0),
            };
            let (u, _) = crate::orca::compute_u_and_n(&q);
            (u.norm() - vo_boundary_distance(&q, q.rel_opt_velocity)).abs()
        })
        .collect();
    tally("vo", devs.into_iter(), 2e-4)
}

/// Analytic against finite-difference gradients on random small networks.
pub fn grad_suite(instances: usize, seed: u64) -> SuiteReport {
    let devs = (0..instances as u64).map(|k| crate::neural::gradient_check(seed.wrapping_add(k)));
    tally("grad", devs, 1e-4)
}

pub fn run_suite(name: &str, instances: usize, seed: u64) -> Option<SuiteReport> {
    Some(match name {
        "lp2" => lp2_suite(instances, seed),
        "lp3" => lp3_suite(instances, seed),
        "vo" => vo_suite(instances, seed),
        "grad" => grad_suite(instances, seed),
        _ => return None,
    })
}
