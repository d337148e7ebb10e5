//! Self-contained SVG learning-curve plots: log2-scaled cost versus
//! cumulative episodes, mean lines with standard-error bands per method.

use super::record::RunRecord;
use crate::error::{DpiError, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Serialize)]
struct SeriesMeta {
    method: String,
    episodes: Vec<usize>,
    log2_mean: Vec<f64>,
    stderr: Vec<f64>,
    seeds: usize,
}

struct Series {
    method: String,
    episodes: Vec<usize>,
    mean: Vec<f64>,
    stderr: Vec<f64>,
    seeds: usize,
}

/// Group records by method; when every record of a method shares the same
/// episode axis, aggregate across seeds (mean and standard error over
/// seeds), otherwise fall back to one series per record.
fn build_series(records: &[RunRecord]) -> Vec<Series> {
    let mut methods: Vec<String> = Vec::new();
    for r in records {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let mut out = Vec::new();
    for method in methods {
        let group: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
        let axis: Vec<usize> = group[0]
            .rows
            .iter()
            .map(|r| r.cumulative_episodes)
            .collect();
        let aligned = group.iter().all(|r| {
            r.rows.len() == axis.len()
                && r.rows
                    .iter()
                    .zip(&axis)
                    .all(|(row, e)| row.cumulative_episodes == *e)
        });
        if aligned && group.len() > 1 {
            let mut mean = Vec::with_capacity(axis.len());
            let mut stderr = Vec::with_capacity(axis.len());
            for i in 0..axis.len() {
                let vals: Vec<f64> = group
                    .iter()
                    .map(|r| r.rows[i].j_pi)
                    .filter(|v| v.is_finite())
                    .collect();
                let n = vals.len().max(1) as f64;
                let m = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                    / (n - 1.0).max(1.0);
                mean.push(m);
                stderr.push((var / n).sqrt());
            }
            out.push(Series {
                method,
                episodes: axis,
                mean,
                stderr,
                seeds: group.len(),
            });
        } else {
            for r in group {
                let label = if out.iter().any(|s: &Series| s.method == method) || aligned {
                    method.clone()
                } else {
                    format!("{method}#{}", r.seed)
                };
                out.push(Series {
                    method: if aligned { label } else { format!("{method}#{}", r.seed) },
                    episodes: r.rows.iter().map(|x| x.cumulative_episodes).collect(),
                    mean: r.rows.iter().map(|x| x.j_pi).collect(),
                    stderr: r.rows.iter().map(|x| x.j_pi_stderr).collect(),
                    seeds: 1,
                });
            }
        }
    }
    out
}

fn log2_floor(v: f64) -> f64 {
    v.max(1e-12).log2()
}

/// Emit a standalone SVG with one mean line and standard-error band per
/// method. The y axis is `log2(cost)`; the exact plotted values are embedded
/// in a `<metadata>` JSON block for machine inspection.
pub fn emit_plot(records: &[RunRecord], path: &Path) -> Result<()> {
    if records.is_empty() || records.iter().all(|r| r.rows.is_empty()) {
        return Err(DpiError::invalid("no records to plot"));
    }
    let series = build_series(records);

    let metas: Vec<SeriesMeta> = series
        .iter()
        .map(|s| SeriesMeta {
            method: s.method.clone(),
            episodes: s.episodes.clone(),
            log2_mean: s.mean.iter().map(|m| log2_floor(*m)).collect(),
            stderr: s.stderr.clone(),
            seeds: s.seeds,
        })
        .collect();

    // data ranges over finite points
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in &series {
        for (i, &e) in s.episodes.iter().enumerate() {
            if !s.mean[i].is_finite() {
                continue;
            }
            x_min = x_min.min(e as f64);
            x_max = x_max.max(e as f64);
            let y = log2_floor(s.mean[i]);
            let lo = log2_floor((s.mean[i] - s.stderr[i]).max(1e-12));
            let hi = log2_floor(s.mean[i] + s.stderr[i]);
            y_min = y_min.min(y.min(lo));
            y_max = y_max.max(y.max(hi));
        }
    }
    if !x_min.is_finite() {
        return Err(DpiError::invalid("no finite points to plot"));
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = move |y: f64| MARGIN_T + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, "<metadata>{}</metadata>", serde_json::to_string(&metas)?).unwrap();
    writeln!(
        svg,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    )
    .unwrap();

    // axes
    writeln!(
        svg,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#000000" stroke-width="1"/>"##,
        MARGIN_L,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    )
    .unwrap();
    writeln!(
        svg,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#000000" stroke-width="1"/>"##,
        MARGIN_L, MARGIN_T, MARGIN_L,
        HEIGHT - MARGIN_B
    )
    .unwrap();
    // ticks
    for i in 0..=5 {
        let xv = x_min + (x_max - x_min) * i as f64 / 5.0;
        let px = sx(xv);
        writeln!(
            svg,
            r##"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="#000000"/>"##,
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r##"<text x="{px}" y="{}" font-size="12" text-anchor="middle">{:.0}</text>"##,
            HEIGHT - MARGIN_B + 20.0,
            xv
        )
        .unwrap();
        let yv = y_min + (y_max - y_min) * i as f64 / 5.0;
        let py = sy(yv);
        writeln!(
            svg,
            r##"<line x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="#000000"/>"##,
            MARGIN_L - 5.0,
            MARGIN_L
        )
        .unwrap();
        writeln!(
            svg,
            r##"<text x="{}" y="{}" font-size="12" text-anchor="end">{:.2}</text>"##,
            MARGIN_L - 8.0,
            py + 4.0,
            yv
        )
        .unwrap();
    }
    writeln!(
        svg,
        r##"<text x="{}" y="{}" font-size="13" text-anchor="middle">episodes</text>"##,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        svg,
        r##"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">log2 cumulative cost</text>"##,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    )
    .unwrap();

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<(f64, f64, f64, f64)> = s
            .episodes
            .iter()
            .zip(s.mean.iter().zip(&s.stderr))
            .filter(|(_, (m, _))| m.is_finite())
            .map(|(&e, (&m, &se))| {
                (
                    sx(e as f64),
                    sy(log2_floor(m)),
                    sy(log2_floor((m - se).max(1e-12))),
                    sy(log2_floor(m + se)),
                )
            })
            .collect();
        if pts.is_empty() {
            continue;
        }
        // band polygon: upper edge forward, lower edge backward
        let mut band = String::new();
        for (x, _, _, hi) in &pts {
            write!(band, "{x:.2},{hi:.2} ").unwrap();
        }
        for (x, _, lo, _) in pts.iter().rev() {
            write!(band, "{x:.2},{lo:.2} ").unwrap();
        }
        writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            band.trim_end()
        )
        .unwrap();
        let line: String = pts
            .iter()
            .map(|(x, y, _, _)| format!("{x:.2},{y:.2}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            svg,
            r#"<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.8"/>"#
        )
        .unwrap();
        // legend entry
        let ly = MARGIN_T + 16.0 * si as f64 + 8.0;
        let lx = WIDTH - MARGIN_R - 180.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            lx + 22.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            xml_escape(&s.method)
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    std::fs::write(path, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::record::IterationRow;

    fn record(method: &str, seed: u64, base: f64) -> RunRecord {
        let mut rec = RunRecord::new(method, seed);
        for i in 0..5 {
            rec.push(IterationRow {
                iteration: i,
                cumulative_episodes: (i + 1) * 10,
                j_pi: base / (i + 1) as f64,
                j_pi_stderr: 0.1 * base,
                j_eta: base,
                kl_measured: 0.05,
                mu: 1.0,
                beta: 0.1,
                wall_ms: 1.0,
            })
            .unwrap();
        }
        rec
    }

    /// Minimal well-formedness check: every opened tag closes in order.
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag bracket") + start;
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if tag.starts_with('?') || tag.starts_with('!') || tag.ends_with('/') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().unwrap_or_else(|| panic!("stray closing tag {name}"));
                assert_eq!(open, name, "mismatched tags");
            } else {
                let name: String = tag
                    .split_whitespace()
                    .next()
                    .unwrap()
                    .chars()
                    .take_while(|c| c.is_alphanumeric())
                    .collect();
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn single_record_valid_svg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        emit_plot(&[record("dpi", 0, 64.0)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert_well_formed_xml(&text);
        assert_eq!(text.matches("<polyline").count(), 1);
    }

    #[test]
    fn two_methods_two_legend_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        emit_plot(&[record("dpi", 0, 64.0), record("cpi", 0, 80.0)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains(">dpi</text>"));
        assert!(text.contains(">cpi</text>"));
        assert_eq!(text.matches("<polyline").count(), 2);
    }

    #[test]
    fn metadata_carries_exact_log2_means() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        let rec = record("dpi", 0, 64.0);
        emit_plot(&[rec.clone()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let start = text.find("<metadata>").unwrap() + "<metadata>".len();
        let end = text.find("</metadata>").unwrap();
        let metas: serde_json::Value = serde_json::from_str(&text[start..end]).unwrap();
        let log2 = metas[0]["log2_mean"].as_array().unwrap();
        for (i, row) in rec.rows.iter().enumerate() {
            assert_eq!(log2[i].as_f64().unwrap(), row.j_pi.log2());
        }
    }

    #[test]
    fn seeds_aggregate_per_method() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        emit_plot(
            &[record("dpi", 0, 64.0), record("dpi", 1, 70.0), record("dpi", 2, 58.0)],
            &path,
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // three seeds, one aggregated series
        assert_eq!(text.matches("<polyline").count(), 1);
        let start = text.find("<metadata>").unwrap() + "<metadata>".len();
        let end = text.find("</metadata>").unwrap();
        let metas: serde_json::Value = serde_json::from_str(&text[start..end]).unwrap();
        assert_eq!(metas[0]["seeds"].as_u64().unwrap(), 3);
    }
}
