//! Minimal static SVG charts: line panels and heat maps.

use std::fmt::Write as _;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct LinePanel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone)]
pub struct HeatPanel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `ys`, then `xs`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Panel {
    Line(LinePanel),
    Heat(HeatPanel),
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x0: f64,
    y0: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn w() -> f64 {
        PANEL_W - 1.5 * MARGIN
    }

    fn h() -> f64 {
        PANEL_H - 2.0 * MARGIN
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + MARGIN + (x - self.xr.0) / (self.xr.1 - self.xr.0) * Self::w()
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + MARGIN + (1.0 - (y - self.yr.0) / (self.yr.1 - self.yr.0)) * Self::h()
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, t) = (self.x0 + MARGIN, self.y0 + MARGIN);
        let (r, b) = (l + Self::w(), t + Self::h());
        writeln!(out, r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##, Self::w(), Self::h()).unwrap();
        writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#, (l + r) / 2.0, t - 14.0, escape(title)).unwrap();
        writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#, (l + r) / 2.0, b + 32.0, escape(x_label)).unwrap();
        writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {x:.1} {y:.1})">{}</text>"#,
            escape(y_label),
            x = l - 36.0,
            y = (t + b) / 2.0
        )
        .unwrap();
        for (v, anchor_x, anchor_y, anchor) in [
            (self.xr.0, l, b + 14.0, "start"),
            (self.xr.1, r, b + 14.0, "end"),
        ] {
            writeln!(out, r#"<text x="{anchor_x:.1}" y="{anchor_y:.1}" text-anchor="{anchor}" font-size="9">{}</text>"#, tick(v)).unwrap();
        }
        for (v, y) in [(self.yr.0, b), (self.yr.1, t + 8.0)] {
            writeln!(out, r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" font-size="9">{}</text>"#, l - 3.0, tick(v)).unwrap();
        }
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn line_panel(out: &mut String, p: &LinePanel, x0: f64, y0: f64) {
    let pts = || p.series.iter().flat_map(|s| s.points.iter());
    let frame = Frame {
        x0,
        y0,
        xr: extent(pts().map(|q| q.0)),
        yr: extent(pts().map(|q| q.1)),
    };
    frame.axes(out, &p.title, &p.x_label, &p.y_label);
    if frame.yr.0 < 0.0 && frame.yr.1 > 0.0 {
        let y = frame.py(0.0);
        writeln!(out, r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#bbb"/>"##, frame.px(frame.xr.0), frame.px(frame.xr.1)).unwrap();
    }
    for (i, s) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|q| q.0.is_finite() && q.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, path.join(" ")).unwrap();
        let ly = y0 + MARGIN + 12.0 * (i as f64 + 1.0);
        let lx = x0 + MARGIN + Frame::w() - 4.0;
        writeln!(out, r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="end" font-size="9" fill="{color}">{}</text>"#, escape(&s.name)).unwrap();
    }
}

/// Diverging scale: positive green, negative grey, white at zero.
fn heat_color(v: f64, scale: f64) -> String {
    if !v.is_finite() {
        return "#ffffff".into();
    }
    let t = (v.abs() / scale).min(1.0);
    let mix = |full: f64| (255.0 - (255.0 - full) * t).round() as u8;
    if v > 0.0 {
        format!("#{:02x}{:02x}{:02x}", mix(44.0), mix(160.0), mix(44.0))
    } else {
        format!("#{:02x}{:02x}{:02x}", mix(90.0), mix(90.0), mix(90.0))
    }
}

fn heat_panel(out: &mut String, p: &HeatPanel, x0: f64, y0: f64) {
    let step = |v: &[f64]| if v.len() > 1 { (v[1] - v[0]).abs() } else { 1.0 };
    let (dx, dy) = (step(&p.xs), step(&p.ys));
    let (xlo, xhi) = extent(p.xs.iter().copied());
    let (ylo, yhi) = extent(p.ys.iter().copied());
    let frame = Frame {
        x0,
        y0,
        xr: (xlo - dx / 2.0, xhi + dx / 2.0),
        yr: (ylo - dy / 2.0, yhi + dy / 2.0),
    };
    let scale = p.values.iter().filter(|v| v.is_finite()).fold(0.0_f64, |a, v| a.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    for (j, &y) in p.ys.iter().enumerate() {
        for (i, &x) in p.xs.iter().enumerate() {
            let v = p.values[j * p.xs.len() + i];
            let (l, r) = (frame.px(x - dx / 2.0), frame.px(x + dx / 2.0));
            let (t, b) = (frame.py(y + dy / 2.0), frame.py(y - dy / 2.0));
            writeln!(out, r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#, r - l, b - t, heat_color(v, scale)).unwrap();
        }
    }
    frame.axes(out, &p.title, &p.x_label, &p.y_label);
}

/// Lays panels out in a grid with `cols` columns.
pub fn render(panels: &[Panel], cols: usize) -> String {
    let cols = cols.clamp(1, panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let (w, h) = (PANEL_W * cols as f64, PANEL_H * rows as f64);
    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#).unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    for (k, panel) in panels.iter().enumerate() {
        let x0 = PANEL_W * (k % cols) as f64;
        let y0 = PANEL_H * (k / cols) as f64;
        match panel {
            Panel::Line(p) => line_panel(&mut out, p, x0, y0),
            Panel::Heat(p) => heat_panel(&mut out, p, x0, y0),
        }
    }
    out.push_str("</svg>\n");
    out
}
