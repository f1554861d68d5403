//! Minimal self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Series>,
    /// Drawn as unit-wide bars centred on each x, behind the lines.
    pub bars: Option<Series>,
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let all = || self.lines.iter().chain(&self.bars).flat_map(|s| s.points.iter());
        let (mut x0, mut x1) = extent(all().map(|p| p.0));
        if self.bars.is_some() {
            x0 -= 0.5;
            x1 += 0.5;
        }
        let (y0, y1) = self.y_range.unwrap_or_else(|| extent(all().map(|p| p.1)));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        if let Some(bars) = &self.bars {
            for &(x, y) in &bars.points {
                let (l, r) = (sx(x - 0.45), sx(x + 0.45));
                let top = sy(y.clamp(y0, y1));
                let _ = writeln!(
                    s,
                    r##"<rect x="{l:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#bbbbbb" opacity="0.7"/>"##,
                    r - l,
                    sy(y0) - top
                );
            }
        }
        // Axes and ticks.
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for i in 0..=5 {
            let fx = x0 + (x1 - x0) * i as f64 / 5.0;
            let fy = y0 + (y1 - y0) * i as f64 / 5.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                sx(fx),
                H - BOTTOM + 18.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
                LEFT + pw,
                sy(fy),
                sy(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, series) in self.lines.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ =
                writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
            for &(x, y) in &series.points {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
            let ly = TOP + 14.0 + 18.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                W - RIGHT + 12.0,
                W - RIGHT + 32.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - RIGHT + 38.0, ly + 4.0, escape(&series.name));
        }
        if let Some(bars) = &self.bars {
            let ly = TOP + 14.0 + 18.0 * self.lines.len() as f64;
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="20" height="10" fill="#bbbbbb"/>"##,
                W - RIGHT + 12.0,
                ly - 5.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - RIGHT + 38.0, ly + 4.0, escape(&bars.name));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}
