//! Deterministic SVG overlays of closed-loop trajectories on the obstacle map.

use std::fmt::Write as _;
use std::path::Path;

use bspop_core::simharness::{LogRow, ObstacleSpec, Scenario};

use crate::error::CliError;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub name: String,
    pub points: Vec<[f64; 2]>,
    pub reached: bool,
}

impl Trajectory {
    pub fn from_log(name: &str, log: &[LogRow], reached: bool) -> Self {
        Self {
            name: name.to_string(),
            points: log.iter().map(|r| [r.state[0], r.state[1]]).collect(),
            reached,
        }
    }

    /// Reads the `x0`, `x1` columns of a trajectory CSV. A run counts as reached when
    /// its last point lies within `goal_radius` of `goal`.
    pub fn read_csv(path: &Path, goal: [f64; 2], goal_radius: f64) -> Result<Self, CliError> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
        let mut reader = csv::Reader::from_reader(file);
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(format!("missing column {name}")))
        };
        let (ix, iy) = (col("x0")?, col("x1")?);
        let mut points = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64, CliError> {
                rec.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("bad number on line {}", rec.position().map_or(0, |p| p.line()))))
            };
            points.push([num(ix)?, num(iy)?]);
        }
        let reached = points
            .last()
            .is_some_and(|p| (p[0] - goal[0]).hypot(p[1] - goal[1]) <= goal_radius);
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self { name, points, reached })
    }
}

struct View {
    x0: f64,
    y1: f64,
    scale: f64,
    width: f64,
    height: f64,
}

impl View {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !lo[0].is_finite() {
            (lo, hi) = ([-1.0; 2], [1.0; 2]);
        }
        for k in 0..2 {
            let pad = 0.05 * (hi[k] - lo[k]).max(1.0);
            lo[k] -= pad;
            hi[k] += pad;
        }
        let scale = (SIZE - 2.0 * MARGIN) / (hi[0] - lo[0]).max(hi[1] - lo[1]);
        Self {
            x0: lo[0],
            y1: hi[1],
            scale,
            width: (hi[0] - lo[0]) * scale + 2.0 * MARGIN,
            height: (hi[1] - lo[1]) * scale + 2.0 * MARGIN,
        }
    }

    fn px(&self, p: [f64; 2]) -> [f64; 2] {
        [
            MARGIN + (p[0] - self.x0) * self.scale,
            MARGIN + (self.y1 - p[1]) * self.scale,
        ]
    }
}

/// Renders obstacles, position bounds, start, goal and one polyline per trajectory
/// (`class="trajectory reached"` or `class="trajectory failed"`).
pub fn render_svg(obstacles: &ObstacleSpec, start: [f64; 2], goal: [f64; 2], trajectories: &[Trajectory]) -> String {
    let mut extent: Vec<[f64; 2]> = vec![start, goal];
    for c in &obstacles.circles {
        extent.push([c.center[0] - c.radius, c.center[1] - c.radius]);
        extent.push([c.center[0] + c.radius, c.center[1] + c.radius]);
    }
    for t in trajectories {
        extent.extend(t.points.iter().copied());
    }
    let mut view = View::fit(extent.iter().copied());
    // pull position bounds into view so corridor walls are visible
    let mut walls = extent.clone();
    for b in obstacles.bounds.iter().filter(|b| b.component < 2) {
        let mut p = extent[0];
        p[b.component] = b.lower;
        walls.push(p);
        p[b.component] = b.upper;
        walls.push(p);
    }
    if walls.len() != extent.len() {
        view = View::fit(walls.into_iter());
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        view.width, view.height, view.width, view.height
    );
    s.push_str(
        "<style>\n\
         .obstacle{fill:#888;fill-opacity:0.5;stroke:#444}\n\
         .corridor{stroke:#000;stroke-width:2}\n\
         .trajectory{fill:none;stroke-width:1.5}\n\
         .reached{stroke:#1f77b4}\n\
         .failed{stroke:#d62728}\n\
         .start{fill:#2ca02c}\n\
         .goal{fill:#ff7f0e}\n\
         </style>\n",
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for b in obstacles.bounds.iter().filter(|b| b.component < 2) {
        for v in [b.lower, b.upper] {
            let (a, c) = if b.component == 0 {
                let x = view.px([v, 0.0])[0];
                ([x, 0.0], [x, view.height])
            } else {
                let y = view.px([0.0, v])[1];
                ([0.0, y], [view.width, y])
            };
            let _ = writeln!(
                s,
                r#"<line class="corridor" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                a[0], a[1], c[0], c[1]
            );
        }
    }
    for c in &obstacles.circles {
        let p = view.px(c.center);
        let _ = writeln!(
            s,
            r#"<circle class="obstacle" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
            p[0],
            p[1],
            c.radius * view.scale
        );
    }
    for t in trajectories {
        let mut kept: Vec<[f64; 2]> = Vec::new();
        for (k, &p) in t.points.iter().enumerate() {
            let q = view.px(p);
            let last = k + 1 == t.points.len();
            if last || kept.last().map_or(true, |l| (q[0] - l[0]).hypot(q[1] - l[1]) >= 0.5) {
                kept.push(q);
            }
        }
        let pts: Vec<String> = kept.iter().map(|q| format!("{:.2},{:.2}", q[0], q[1])).collect();
        let class = if t.reached { "reached" } else { "failed" };
        let _ = writeln!(
            s,
            r#"<polyline class="trajectory {class}" data-name="{}" points="{}"/>"#,
            escape(&t.name),
            pts.join(" ")
        );
    }
    for (class, p) in [("start", start), ("goal", goal)] {
        let q = view.px(p);
        let _ = writeln!(
            s,
            r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="4"/>"#,
            q[0], q[1]
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_scenario(sc: &Scenario, trajectories: &[Trajectory]) -> String {
    render_svg(
        &sc.obstacles,
        [sc.initial_state[0], sc.initial_state[1]],
        sc.goal,
        trajectories,
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('"', "&quot;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use bspop_core::dynamics::{Circle, CoordinateBound};

    fn obstacles() -> ObstacleSpec {
        ObstacleSpec {
            circles: vec![Circle {
                center: [1.0, 0.0],
                radius: 0.5,
            }],
            bounds: vec![CoordinateBound {
                component: 1,
                lower: -2.0,
                upper: 2.0,
            }],
        }
    }

    #[test]
    fn outcome_classes() {
        let a = Trajectory {
            name: "a".into(),
            points: vec![[0.0, 0.0], [2.0, 0.0]],
            reached: true,
        };
        let b = Trajectory {
            name: "b".into(),
            points: vec![[0.0, 0.0], [0.5, 1.0]],
            reached: false,
        };
        let svg = render_svg(&obstacles(), [0.0, 0.0], [2.0, 0.0], &[a, b]);
        assert_eq!(svg.matches("class=\"trajectory reached\"").count(), 1);
        assert_eq!(svg.matches("class=\"trajectory failed\"").count(), 1);
        assert_eq!(svg.matches("class=\"obstacle\"").count(), 1);
        assert_eq!(svg.matches("class=\"corridor\"").count(), 2);
    }

    #[test]
    fn empty_plot_has_obstacles_only() {
        let svg = render_svg(&obstacles(), [0.0, 0.0], [2.0, 0.0], &[]);
        assert!(!svg.contains("polyline"));
        assert!(svg.contains("class=\"obstacle\""));
        assert_eq!(svg, render_svg(&obstacles(), [0.0, 0.0], [2.0, 0.0], &[]));
    }
}
