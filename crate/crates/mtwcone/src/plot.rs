//! Minimal self-contained SVG line plots.

use std::fmt::Write as _;

use crate::table::CsvTable;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub y: Vec<String>,
    /// Axis labels, including units.
    pub x_label: String,
    pub y_label: String,
    /// Horizontal reference lines `(label, value)`.
    pub references: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlotError {
    #[error("no rows")]
    NoRows,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("nothing to plot")]
    NoSeries,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad"];

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Expands a degenerate range; keeps small variations around a large offset
/// visible by padding relative to the spread, not the magnitude.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        let p = 1e-6 * (1.0 + lo.abs()).max(1e-12);
        (lo - p, hi + p)
    } else {
        let p = 0.05 * (hi - lo);
        (lo - p, hi + p)
    }
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_plot(table: &CsvTable, spec: &PlotSpec) -> Result<String, PlotError> {
    if table.rows.is_empty() {
        return Err(PlotError::NoRows);
    }
    if spec.y.is_empty() {
        return Err(PlotError::NoSeries);
    }
    let col = |name: &str| table.column(name).ok_or_else(|| PlotError::MissingColumn(name.to_string()));
    let xi = col(&spec.x)?;
    let ys: Vec<usize> = spec.y.iter().map(|n| col(n)).collect::<Result<_, _>>()?;

    let finite = |v: f64| v.is_finite();
    let xs: Vec<f64> = table.rows.iter().map(|r| r[xi]).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in xs.iter().filter(|v| finite(**v)) {
        x0 = x0.min(v);
        x1 = x1.max(v);
    }
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &table.rows {
        for &j in &ys {
            if finite(r[j]) {
                y0 = y0.min(r[j]);
                y1 = y1.max(r[j]);
            }
        }
    }
    for (_, v) in &spec.references {
        y0 = y0.min(*v);
        y1 = y1.max(*v);
    }
    if !(x0.is_finite() && y0.is_finite()) {
        return Err(PlotError::NoRows);
    }
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { padded(x0, x1) };
    let (y0, y1) = padded(y0, y1);
    // plot relative to an offset when the spread is tiny next to the values
    let offset = if (y1 - y0) < 1e-4 * y0.abs().max(y1.abs()) { 0.5 * (y0 + y1) } else { 0.0 };
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (y1 - v) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&spec.title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in nice_ticks(x0, x1) {
        let px = sx(t);
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#000"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
    }
    for t in nice_ticks(y0 - offset, y1 - offset) {
        let py = sy(t + offset);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#000"/>"##, LEFT - 5.0);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, label(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 16.0, escape(&spec.x_label));
    let ylab = if offset != 0.0 { format!("{} − ({})", spec.y_label, label(offset)) } else { spec.y_label.clone() };
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&ylab)
    );
    for (name, v) in &spec.references {
        let py = sy(*v);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#555" stroke-dasharray="6 4"/>"##, LEFT + pw);
        let _ = writeln!(s, r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#555">{}</text>"##, LEFT + pw - 4.0, py - 4.0, escape(name));
    }
    for (k, (&j, name)) in ys.iter().zip(&spec.y).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = table
            .rows
            .iter()
            .filter(|r| finite(r[xi]) && finite(r[j]))
            .map(|r| format!("{:.2},{:.2}", sx(r[xi]), sy(r[j])))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#, pts.join(" "));
        if ys.len() > 1 {
            let ly = TOP + 16.0 + 16.0 * k as f64;
            let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{}</text>"#, LEFT + 10.0, escape(name));
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PlotSpec {
        PlotSpec {
            title: "profile".into(),
            x: "t".into(),
            y: vec!["f".into()],
            x_label: "t (dimensionless)".into(),
            y_label: "f_t(y) (length²)".into(),
            references: vec![("max(f0, f1)".into(), -10.0)],
        }
    }

    #[test]
    fn renders_a_line_with_reference() {
        let mut t = CsvTable::new(["t", "f"]);
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            t.push(vec![x, -10.0 + 1e-6 * x * (1.0 - x)]);
        }
        let svg = render_plot(&t, &spec()).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline") && svg.contains("stroke-dasharray"));
        assert!(svg.contains("t (dimensionless)"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn errors() {
        let t = CsvTable::new(["t", "f"]);
        assert_eq!(render_plot(&t, &spec()).unwrap_err().to_string(), "no rows");
        let mut t = CsvTable::new(["r", "K"]);
        t.push(vec![0.0, 1.0]);
        assert_eq!(render_plot(&t, &spec()), Err(PlotError::MissingColumn("t".into())));
    }
}
