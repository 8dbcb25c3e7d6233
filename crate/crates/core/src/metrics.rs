//! Batch evaluation and the outcome table.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::fusion::Mode;
use crate::norms::{classify_overtake_side, classify_pass_side, Side};
use crate::scenario::{Scenario, SocialRule};
use crate::sim::{run_episode, ActionSource, EpisodeLog, Outcome};

/// Below this success rate the average time is reported as "fail".
pub const AVG_TIME_MIN_SUCCESS: f64 = 0.6;

/// Seed of episode `k` in a batch started from `seed`.
pub fn episode_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub index: usize,
    pub seed: u64,
    pub outcomes: Vec<Outcome>,
    pub arrival_ticks: Vec<Option<u32>>,
    /// Pass or overtake side for two-agent rule scenarios.
    pub side: Option<Side>,
    pub cases: [usize; 3],
}

impl EpisodeSummary {
    pub fn all_arrived(&self) -> bool {
        self.outcomes.iter().all(|&o| o == Outcome::Arrived)
    }

    /// Whether the encounter followed the scenario's rule, when it has one.
    pub fn compliant(&self, rule: SocialRule) -> Option<bool> {
        match rule {
            SocialRule::None => None,
            SocialRule::PassRight => self.side.map(|s| s == Side::Right),
            SocialRule::OvertakeLeft => self.side.map(|s| s == Side::Left),
        }
    }
}

/// Side classification for the first two agents under `rule`. The
/// overtaking agent is the faster one.
pub fn rule_side(log: &EpisodeLog, scenario: &Scenario) -> Option<Side> {
    if log.trajectories.len() < 2 {
        return None;
    }
    let (a, b) = (&log.trajectories[0], &log.trajectories[1]);
    match scenario.social_rule {
        SocialRule::None => None,
        SocialRule::PassRight => Some(classify_pass_side(a, b)),
        SocialRule::OvertakeLeft => {
            if scenario.agents[0].v_max >= scenario.agents[1].v_max {
                Some(classify_overtake_side(a, b))
            } else {
                Some(classify_overtake_side(b, a))
            }
        }
    }
}

pub fn summarize(index: usize, seed: u64, log: &EpisodeLog, scenario: &Scenario) -> EpisodeSummary {
    EpisodeSummary {
        index,
        seed,
        outcomes: log.outcomes.clone(),
        arrival_ticks: log.arrival_ticks.clone(),
        side: rule_side(log, scenario),
        cases: log.case_counts(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub mode: String,
    pub episodes: usize,
    pub agent_episodes: usize,
    /// Percentages over agent-episodes.
    pub success: f64,
    /// Percentage of fully successful episodes that followed the rule.
    pub sr_success: Option<f64>,
    pub col_robots: f64,
    pub col_obstacles: f64,
    pub timeout: f64,
    pub rotate_in_place: f64,
    /// Seconds, over arrived agents; `None` means "fail".
    pub average_time: Option<f64>,
    pub sides: SideCounts,
    pub cases: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SideCounts {
    pub left: usize,
    pub right: usize,
    pub none: usize,
}

impl SideCounts {
    /// Two-sided exact binomial test of left vs right against 1/2.
    pub fn binomial_p(&self) -> f64 {
        binomial_two_sided(self.left as u64, (self.left + self.right) as u64)
    }
}

/// Two-sided exact binomial p-value for `k` successes in `n` fair trials.
pub fn binomial_two_sided(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    let tail = k.min(n - k);
    (2.0 * b.cdf(tail)).min(1.0)
}

pub fn report(scenario: &Scenario, mode: Mode, summaries: &[EpisodeSummary]) -> MetricsReport {
    let mut counts = [0usize; 6];
    let mut time_sum = 0.0;
    let mut arrived = 0usize;
    let mut sides = SideCounts::default();
    let mut cases = [0; 3];
    let (mut ok_eps, mut compliant_eps) = (0, 0);
    let mut agent_eps = 0;
    for s in summaries {
        for (o, t) in s.outcomes.iter().zip(&s.arrival_ticks) {
            agent_eps += 1;
            let k = match o {
                Outcome::Arrived => 0,
                Outcome::ColRobot => 1,
                Outcome::ColObst => 2,
                Outcome::Timeout | Outcome::Running => 3,
                Outcome::RotateInPlace => 4,
            };
            counts[k] += 1;
            if *o == Outcome::Arrived {
                arrived += 1;
                time_sum += t.unwrap_or(0) as f64 * scenario.dt;
            }
        }
        match s.side {
            Some(Side::Left) => sides.left += 1,
            Some(Side::Right) => sides.right += 1,
            Some(Side::None) => sides.none += 1,
            None => {}
        }
        for c in 0..3 {
            cases[c] += s.cases[c];
        }
        if s.all_arrived() {
            ok_eps += 1;
            if s.compliant(scenario.social_rule) == Some(true) {
                compliant_eps += 1;
            }
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / agent_eps.max(1) as f64;
    let success = pct(counts[0]);
    let sr_success = match scenario.social_rule {
        SocialRule::None => None,
        _ if ok_eps == 0 => Some(0.0),
        _ => Some(100.0 * compliant_eps as f64 / ok_eps as f64),
    };
    MetricsReport {
        scenario: scenario.name.clone(),
        mode: mode.as_str().into(),
        episodes: summaries.len(),
        agent_episodes: agent_eps,
        success,
        sr_success,
        col_robots: pct(counts[1]),
        col_obstacles: pct(counts[2]),
        timeout: pct(counts[3]),
        rotate_in_place: pct(counts[4]),
        average_time: if success >= 100.0 * AVG_TIME_MIN_SUCCESS && arrived > 0 {
            Some(time_sum / arrived as f64)
        } else {
            None
        },
        sides,
        cases,
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub episodes: Vec<EpisodeSummary>,
}

/// Run `episodes` independent episodes on `workers` threads. Episode `k`
/// always uses [`episode_seed`]`(seed, k)`, so results do not depend on
/// the worker count.
pub fn evaluate(
    scenario: &Scenario,
    mode: Mode,
    policy: Option<&dyn ActionSource>,
    episodes: usize,
    seed: u64,
    workers: usize,
) -> Evaluation {
    assert!(episodes >= 1, "need at least one episode");
    let run = |k: usize| {
        let s = episode_seed(seed, k as u64);
        let log = run_episode(scenario, mode, policy, s);
        summarize(k, s, &log, scenario)
    };
    let summaries: Vec<EpisodeSummary> = if workers <= 1 {
        (0..episodes).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| (0..episodes).into_par_iter().map(run).collect())
    };
    Evaluation {
        report: report(scenario, mode, &summaries),
        episodes: summaries,
    }
}

fn fmt_opt(v: Option<f64>, none: &str) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_else(|| none.into())
}

pub const REPORT_HEADER: &str =
    "scenario,mode,episodes,success,sr_success,col_robots,col_obstacles,timeout,rotate_in_place,average_time,pass_left,pass_right,pass_none";

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        format!(
            "{REPORT_HEADER}\n{},{},{},{:.1},{},{:.1},{:.1},{:.1},{:.1},{},{},{},{}\n",
            self.scenario,
            self.mode,
            self.episodes,
            self.success,
            fmt_opt(self.sr_success, ""),
            self.col_robots,
            self.col_obstacles,
            self.timeout,
            self.rotate_in_place,
            fmt_opt(self.average_time, "fail"),
            self.sides.left,
            self.sides.right,
            self.sides.none,
        )
    }

    /// Table layout with the column names used in the result tables.
    pub fn to_text(&self) -> String {
        let mut cols: Vec<(&str, String)> = vec![
            ("Scenario", self.scenario.clone()),
            ("Method", self.mode.clone()),
            ("Success Rate(%)", format!("{:.1}", self.success)),
        ];
        if let Some(sr) = self.sr_success {
            cols.push(("Social rules success rate(%)", format!("{sr:.1}")));
        }
        cols.extend([
            ("Collision With robots(%)", format!("{:.1}", self.col_robots)),
            ("Collision with obstacles(%)", format!("{:.1}", self.col_obstacles)),
            ("Time Out(%)", format!("{:.1}", self.timeout)),
            ("Rotate in place(%)", format!("{:.1}", self.rotate_in_place)),
            ("Average Time(s)", fmt_opt(self.average_time, "fail")),
        ]);
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let row = |f: &dyn Fn(usize) -> String| {
            (0..cols.len()).map(|k| format!("{:>w$}", f(k), w = widths[k])).collect::<Vec<_>>().join(" | ")
        };
        let mut s = String::new();
        let _ = writeln!(s, "{}", row(&|k| cols[k].0.to_string()));
        let _ = writeln!(s, "{}", row(&|k| cols[k].1.clone()));
        let _ = writeln!(s, "episodes: {}  agent-episodes: {}", self.episodes, self.agent_episodes);
        if self.sr_success.is_some() {
            let _ = writeln!(
                s,
                "pass side left/right/none: {}/{}/{}  binomial p = {:.4}",
                self.sides.left,
                self.sides.right,
                self.sides.none,
                self.sides.binomial_p()
            );
        }
        let _ = writeln!(s, "fusion cases 1/2/3: {}/{}/{}", self.cases[0], self.cases[1], self.cases[2]);
        s
    }
}

pub const EPISODES_HEADER: &str = "episode,seed,agent,outcome,arrival_time,side";

pub fn episodes_csv(summaries: &[EpisodeSummary], dt: f64) -> String {
    let mut s = format!("{EPISODES_HEADER}\n");
    for e in summaries {
        let side = match e.side {
            Some(Side::Left) => "left",
            Some(Side::Right) => "right",
            Some(Side::None) => "none",
            None => "",
        };
        for (i, (o, t)) in e.outcomes.iter().zip(&e.arrival_ticks).enumerate() {
            let time = t.map(|t| format!("{:.1}", t as f64 * dt)).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{}", e.index, e.seed, i, o.as_str(), time, side);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn summary(outcomes: Vec<Outcome>, ticks: Vec<Option<u32>>, side: Option<Side>) -> EpisodeSummary {
        EpisodeSummary {
            index: 0,
            seed: 0,
            outcomes,
            arrival_ticks: ticks,
            side,
            cases: [0; 3],
        }
    }

    #[test]
    fn average_time_arithmetic() {
        let sc = Scenario::resolve("1").unwrap();
        let s = summary(vec![Outcome::Arrived, Outcome::Arrived], vec![Some(100), Some(150)], Some(Side::Right));
        let r = report(&sc, Mode::PureOrca, &[s]);
        assert_relative_eq!(r.average_time.unwrap(), 25.0, epsilon = 1e-12);
        assert_eq!(r.success, 100.0);
        assert_eq!(r.timeout, 0.0);
        assert_eq!(r.sr_success, Some(100.0));
    }

    #[test]
    fn low_success_reports_fail() {
        let sc = Scenario::resolve("1").unwrap();
        let s = summary(vec![Outcome::Arrived, Outcome::Timeout], vec![Some(100), None], Some(Side::Left));
        let r = report(&sc, Mode::PureOrca, &[s]);
        assert_eq!(r.success, 50.0);
        assert_eq!(r.average_time, None);
        assert!(r.to_csv().contains(",fail,"));
        assert_eq!(r.sr_success, Some(0.0));
    }

    #[test]
    fn binomial_p_values() {
        assert_eq!(binomial_two_sided(5, 10), 1.0);
        // P(X <= 0) + P(X >= 10) for n = 10.
        assert_relative_eq!(binomial_two_sided(0, 10), 2.0 / 1024.0, epsilon = 1e-12);
        assert!(binomial_two_sided(130, 200) < 0.001);
        assert!(binomial_two_sided(104, 200) > 0.5);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut v: Vec<u64> = (0..1000).map(|k| episode_seed(7, k)).collect();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 1000);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let sc = Scenario::resolve("crossroad4").unwrap();
        let a = evaluate(&sc, Mode::PureOrca, None, 4, 3, 1);
        let b = evaluate(&sc, Mode::PureOrca, None, 4, 3, 3);
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.report.to_csv(), b.report.to_csv());
    }
}
