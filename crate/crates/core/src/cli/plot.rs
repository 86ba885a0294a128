//! Minimal SVG line chart: u(t) and v(t) per eye with the image centre.

use std::fmt::Write;

use crate::sim::Trace;
use crate::vision::Eye;

const W: f64 = 900.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const GAP: f64 = 50.0;

fn colour(eye: Eye) -> &'static str {
    match eye {
        Eye::Left => "#1f77b4",
        Eye::Right => "#d62728",
    }
}

struct Panel {
    top: f64,
    t_max: f64,
    y_max: f64,
}

impl Panel {
    fn x(&self, t: f64) -> f64 {
        MARGIN_L + t / self.t_max * (W - MARGIN_L - MARGIN_R)
    }

    fn y(&self, px: f64) -> f64 {
        self.top + px.clamp(0.0, self.y_max) / self.y_max * PANEL_H
    }
}

/// Two stacked panels (u on top, v below). Gaps in detection break the
/// lines; the dashed line marks the image centre.
pub fn trace_svg(trace: &Trace) -> String {
    let t_max = trace.records.last().map_or(1.0, |r| r.t).max(trace.dt);
    let height = MARGIN_T + 2.0 * PANEL_H + GAP + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN_L}" y="18" font-size="14">{}</text>"#, trace.scenario);

    let axes = [
        ("u (px)", trace.camera.width as f64, 0usize),
        ("v (px)", trace.camera.height as f64, 1usize),
    ];
    for (k, (label, extent, axis)) in axes.into_iter().enumerate() {
        let p = Panel { top: MARGIN_T + k as f64 * (PANEL_H + GAP), t_max, y_max: extent };
        let (x0, x1) = (p.x(0.0), p.x(t_max));
        let _ = writeln!(
            s,
            r#"<rect x="{x0}" y="{}" width="{}" height="{PANEL_H}" fill="none" stroke="black"/>"#,
            p.top,
            x1 - x0
        );
        let _ = writeln!(s, r#"<text x="8" y="{}">{label}</text>"#, p.top + PANEL_H / 2.0);
        for tick in [0.0, extent / 2.0, extent] {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, x0 - 4.0, p.y(tick) + 4.0);
        }
        let yc = p.y(extent / 2.0);
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{yc}" x2="{x1}" y2="{yc}" stroke="#888" stroke-dasharray="6 4"/>"##
        );
        for eye in Eye::BOTH {
            let mut d = String::new();
            let mut pen_down = false;
            for r in trace.eye(eye) {
                let val = if axis == 0 { r.u } else { r.v };
                if !(r.valid && val.is_finite()) {
                    pen_down = false;
                    continue;
                }
                let cmd = if pen_down { 'L' } else { 'M' };
                let _ = write!(d, "{cmd}{:.2},{:.2} ", p.x(r.t), p.y(val));
                pen_down = true;
            }
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
                d.trim_end(),
                colour(eye)
            );
        }
    }
    let axis_y = MARGIN_T + 2.0 * PANEL_H + GAP + 20.0;
    let _ = writeln!(s, r#"<text x="{}" y="{axis_y}" text-anchor="middle">t (s), 0 to {t_max}</text>"#, W / 2.0);
    for (i, eye) in Eye::BOTH.into_iter().enumerate() {
        let x = W - MARGIN_R - 120.0 + 60.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="18" fill="{}">{} eye</text>"#,
            colour(eye),
            eye.label()
        );
    }
    s.push_str("</svg>\n");
    s
}
