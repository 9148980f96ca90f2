//! Minimal SVG line plots of estimate against a grid variable.

use super::record::Cell;
use std::collections::BTreeMap;
use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

type Axis = fn(&Cell) -> Option<f64>;

fn axes() -> [(&'static str, Axis); 6] {
    [
        ("n", |c| c.n.map(|v| v as f64)),
        ("K", |c| c.k.map(|v| v as f64)),
        ("m", |c| c.m.map(|v| v as f64)),
        ("delta", |c| c.delta),
        ("epsilon", |c| c.epsilon),
        ("t", |c| c.t),
    ]
}

/// Plots `estimate ± se` (solid) and the oracle (dashed) against the first
/// grid variable that varies; other grid variables split the series.
/// Returns `None` when there is nothing to plot.
pub fn line_plot(statistic: &str, cells: &[&Cell]) -> Option<String> {
    let all = axes();
    let (xname, xf) = *all.iter().find(|(_, f)| {
        let vals: Vec<f64> = cells.iter().filter_map(|c| f(c)).collect();
        vals.len() == cells.len() && vals.iter().any(|v| *v != vals[0])
    })?;
    let series_key = |c: &Cell| {
        let mut key = String::new();
        for (name, f) in all.iter() {
            if *name != xname {
                if let Some(v) = f(c) {
                    write!(key, "{name}={v} ").unwrap();
                }
            }
        }
        if let Some(l) = &c.label {
            key.push_str(l);
        }
        key.trim().to_string()
    };
    let mut series: BTreeMap<String, Vec<&Cell>> = BTreeMap::new();
    for c in cells {
        series.entry(series_key(c)).or_default().push(c);
    }
    let xs: Vec<f64> = cells.iter().filter_map(|c| xf(c)).collect();
    let mut ys: Vec<f64> = cells
        .iter()
        .flat_map(|c| [c.estimate - c.se, c.estimate + c.se])
        .collect();
    ys.extend(cells.iter().filter_map(|c| c.oracle));
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(statistic)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#,
        H - PAD
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{xname}</text>"#,
        W / 2.0,
        H - 16.0
    )
    .unwrap();
    for (v, anchor_x, anchor_y) in [(x0, sx(x0), H - PAD + 16.0), (x1, sx(x1), H - PAD + 16.0)] {
        writeln!(
            svg,
            r#"<text x="{anchor_x}" y="{anchor_y}" text-anchor="middle">{}</text>"#,
            fmt_num(v)
        )
        .unwrap();
    }
    for v in [y0, y1] {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            PAD - 4.0,
            sy(v) + 4.0,
            fmt_num(v)
        )
        .unwrap();
    }
    for (i, (key, mut pts)) in series.into_iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        pts.sort_by(|a, b| xf(a).partial_cmp(&xf(b)).unwrap());
        let line: Vec<String> = pts
            .iter()
            .map(|c| format!("{:.2},{:.2}", sx(xf(c).unwrap()), sy(c.estimate)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            line.join(" ")
        )
        .unwrap();
        for c in &pts {
            let x = sx(xf(c).unwrap());
            writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                sy(c.estimate - c.se),
                sy(c.estimate + c.se)
            )
            .unwrap();
        }
        let oracle: Vec<String> = pts
            .iter()
            .filter_map(|c| {
                c.oracle
                    .map(|o| format!("{:.2},{:.2}", sx(xf(c).unwrap()), sy(o)))
            })
            .collect();
        if oracle.len() >= 2 {
            writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-dasharray="5,4" points="{}"/>"#,
                oracle.join(" ")
            )
            .unwrap();
        } else if let Some(p) = oracle.first() {
            let (x, y) = p.split_once(',').unwrap();
            writeln!(
                svg,
                r#"<circle cx="{x}" cy="{y}" r="3" fill="none" stroke="{color}"/>"#
            )
            .unwrap();
        }
        if !key.is_empty() {
            writeln!(
                svg,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                W - PAD - 150.0,
                PAD + 14.0 * i as f64,
                escape(&key)
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.4}")
        .trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_varying_axis_only() {
        let cells: Vec<Cell> = (1..5)
            .map(|m| {
                Cell::new("p", 1.0 / m as f64, 0.01, 10)
                    .m(m)
                    .oracle(1.0 / m as f64)
            })
            .collect();
        let refs: Vec<&Cell> = cells.iter().collect();
        let svg = line_plot("p", &refs).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
        let one = [&cells[0]];
        assert!(line_plot("p", &one).is_none());
    }
}
