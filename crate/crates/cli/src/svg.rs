//! Hand-rolled SVG for trajectory plots and training curves.

use std::fmt::Write as _;

use socnav::geometry::Vec2;
use socnav::scenario::Scenario;
use socnav::sim::EpisodeLog;
use socnav::train::CurvePoint;

const COLORS: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Frame {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn map(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.min.x) * self.scale + 20.0, self.height - ((p.y - self.min.y) * self.scale + 20.0))
    }
}

fn star(c: (f64, f64), r: f64) -> String {
    (0..10)
        .map(|k| {
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            let rr = if k % 2 == 0 { r } else { 0.45 * r };
            format!("{:.2},{:.2}", c.0 + rr * a.cos(), c.1 + rr * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Obstacles in grey, one colored path per agent, start boxes and goal stars.
pub fn trajectories(scenario: &Scenario, log: &EpisodeLog) -> String {
    let mut pts: Vec<Vec2> = scenario.obstacles.iter().flat_map(|o| o.vertices().to_vec()).collect();
    pts.extend(log.trajectories.iter().flatten().copied());
    pts.extend(log.goals.iter().copied());
    let min = Vec2::new(
        pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
    );
    let max = Vec2::new(
        pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    );
    let span = (max - min).x.max((max - min).y).max(1e-3);
    let scale = 760.0 / span;
    let width = (max.x - min.x) * scale + 40.0;
    let height = (max.y - min.y) * scale + 40.0;
    let f = Frame { min, scale, height };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for o in &scenario.obstacles {
        let p: Vec<String> = o.vertices().iter().map(|&v| f.map(v)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(s, r##"<polygon points="{}" fill="#999999" stroke="#555555"/>"##, p.join(" "));
    }
    for (i, tr) in log.trajectories.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let p: Vec<String> = tr.iter().map(|&v| f.map(v)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, p.join(" "));
        if let Some(&start) = tr.first() {
            let (x, y) = f.map(start);
            let h = 0.1 * scale;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                x - h,
                y - h,
                2.0 * h,
                2.0 * h
            );
        }
        if let Some(&g) = log.goals.get(i) {
            let _ = writeln!(s, r#"<polygon points="{}" fill="{c}"/>"#, star(f.map(g), 0.12 * scale));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, y0: f64, title: &str, xs: &[f64], ys: &[f64], color: &str) {
    let (w, h, left) = (640.0, 220.0, 70.0);
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if (hi - lo).abs() < 1e-12 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
    let xmax = xs.last().copied().unwrap_or(1.0).max(1.0);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{title}</text>"#, left + w / 2.0, y0 - 8.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{hi:.2}</text>"#, left - 4.0, y0 + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{lo:.2}</text>"#, left - 4.0, y0 + h);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">iteration</text>"#, left + w / 2.0, y0 + h + 16.0);
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", left + x / xmax * w, y0 + h - (y - lo) / (hi - lo) * h))
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
}

/// External reward above, curiosity reward below, both against iteration.
pub fn curves(curve: &[CurvePoint]) -> String {
    let xs: Vec<f64> = curve.iter().map(|p| p.iteration as f64).collect();
    let ex: Vec<f64> = curve.iter().map(|p| p.mean_ex_reward).collect();
    let cur: Vec<f64> = curve.iter().map(|p| p.mean_curiosity).collect();
    let mut s = String::new();
    s.push_str(r#"<svg xmlns="http://www.w3.org/2000/svg" width="740" height="580" viewBox="0 0 740 580">"#);
    s.push('\n');
    s.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    s.push('\n');
    panel(&mut s, 30.0, "external reward", &xs, &ex, "#1f77b4");
    panel(&mut s, 320.0, "curiosity reward", &xs, &cur, "#d62728");
    s.push_str("</svg>\n");
    s
}
