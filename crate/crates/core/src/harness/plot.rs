//! Minimal standalone SVG line/errorband plots for the experiment CSVs.
//! Purely cosmetic output; nothing downstream depends on it.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::ExperimentKind;
use super::HarnessError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    /// (x, lo, hi) shaded band.
    band: Vec<(f64, f64, f64)>,
}

struct PlotSpec {
    title: String,
    x_label: String,
    y_label: String,
    log_y: bool,
    series: Vec<Series>,
}

fn parse_rows(csv: &str, expect_header: &str) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in csv.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !header_seen {
            if t != expect_header {
                return Err(HarnessError::PlotFormat(format!(
                    "expected header `{expect_header}`, got `{t}`"
                )));
            }
            header_seen = true;
            continue;
        }
        rows.push(t.split(',').map(|s| s.trim().to_string()).collect());
    }
    if !header_seen {
        return Err(HarnessError::PlotFormat("missing header row".into()));
    }
    if rows.is_empty() {
        return Err(HarnessError::EmptyData);
    }
    Ok(rows)
}

fn f(v: &str) -> Result<f64, HarnessError> {
    v.parse()
        .map_err(|_| HarnessError::PlotFormat(format!("not a number: `{v}`")))
}

fn spec_from_csv(csv: &str, kind: ExperimentKind) -> Result<PlotSpec, HarnessError> {
    match kind {
        ExperimentKind::Convergence => {
            let rows = parse_rows(csv, "solver,iter,sup_err,fn_err,consensus,tx_scalars")?;
            let mut by_solver: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in &rows {
                if r.len() != 6 {
                    return Err(HarnessError::PlotFormat("wrong column count".into()));
                }
                let y = f(&r[2])?;
                if y.is_finite() {
                    by_solver
                        .entry(r[0].clone())
                        .or_default()
                        .push((f(&r[1])?, y));
                }
            }
            if by_solver.values().all(|v| v.is_empty()) {
                return Err(HarnessError::EmptyData);
            }
            Ok(PlotSpec {
                title: "variable error vs iterations".into(),
                x_label: "iteration".into(),
                y_label: "sup error".into(),
                log_y: true,
                series: by_solver
                    .into_iter()
                    .map(|(name, points)| Series {
                        name,
                        points,
                        band: Vec::new(),
                    })
                    .collect(),
            })
        }
        ExperimentKind::VsK | ExperimentKind::VsDelta | ExperimentKind::VsN => {
            let col = kind.sweep_column();
            let rows = parse_rows(
                csv,
                &format!("{col},solver,trials,converged,mean_iters,std_iters,mean_cost"),
            )?;
            let mut by_solver: BTreeMap<String, (Vec<(f64, f64)>, Vec<(f64, f64, f64)>)> =
                BTreeMap::new();
            for r in &rows {
                if r.len() != 7 {
                    return Err(HarnessError::PlotFormat("wrong column count".into()));
                }
                let (x, mean, std) = (f(&r[0])?, f(&r[4])?, f(&r[5])?);
                if mean.is_finite() {
                    let e = by_solver.entry(r[1].clone()).or_default();
                    e.0.push((x, mean));
                    e.1.push((x, mean - std, mean + std));
                }
            }
            if by_solver.is_empty() {
                return Err(HarnessError::EmptyData);
            }
            Ok(PlotSpec {
                title: format!("iterations to the solution interval vs {col}"),
                x_label: col.into(),
                y_label: "iterations".into(),
                log_y: false,
                series: by_solver
                    .into_iter()
                    .map(|(name, (points, band))| Series { name, points, band })
                    .collect(),
            })
        }
        ExperimentKind::CommCost => {
            let rows = parse_rows(
                csv,
                "k,solver,trials,converged,mean_iters,std_iters,mean_cost",
            )?;
            let mut by_solver: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in &rows {
                if r.len() != 7 {
                    return Err(HarnessError::PlotFormat("wrong column count".into()));
                }
                let y = f(&r[6])?;
                if y.is_finite() {
                    by_solver
                        .entry(r[1].clone())
                        .or_default()
                        .push((f(&r[0])?, y));
                }
            }
            if by_solver.is_empty() {
                return Err(HarnessError::EmptyData);
            }
            Ok(PlotSpec {
                title: "transmitted scalars vs k".into(),
                x_label: "k".into(),
                y_label: "scalars".into(),
                log_y: true,
                series: by_solver
                    .into_iter()
                    .map(|(name, points)| Series {
                        name,
                        points,
                        band: Vec::new(),
                    })
                    .collect(),
            })
        }
    }
}

fn render(spec: &PlotSpec) -> String {
    let tf = |y: f64| if spec.log_y { y.max(1e-300).log10() } else { y };
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in &spec.series {
        for &(x, y) in &s.points {
            xs.push(x);
            ys.push(tf(y));
        }
        for &(x, lo, hi) in &s.band {
            xs.push(x);
            ys.push(tf(lo));
            ys.push(tf(hi));
        }
    }
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (tf(y) - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        spec.title
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    out.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));
    // ticks
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let label_y = if spec.log_y {
            format!("{:.2e}", 10f64.powf(fy))
        } else {
            format!("{fy:.4}")
        };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{fx:.4}</text>\n",
            px(fx),
            HEIGHT - MARGIN_B + 18.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{label_y}</text>\n",
            MARGIN_L - 6.0,
            HEIGHT - MARGIN_B - (HEIGHT - MARGIN_T - MARGIN_B) * i as f64 / 4.0 + 4.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 10.0,
        spec.x_label
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        spec.y_label
    ));

    for (si, s) in spec.series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if !s.band.is_empty() {
            let mut d = String::from("M");
            for &(x, lo, _) in &s.band {
                d.push_str(&format!("{:.2},{:.2} L", px(x), py(lo)));
            }
            for &(x, _, hi) in s.band.iter().rev() {
                d.push_str(&format!("{:.2},{:.2} L", px(x), py(hi)));
            }
            d.truncate(d.len() - 2);
            d.push('Z');
            out.push_str(&format!(
                "<path d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n"
            ));
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_R - 120.0,
            MARGIN_T + 16.0 * si as f64 + 12.0,
            s.name
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = v
        .iter()
        .cloned()
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders a CSV into an SVG plot. Schema mismatches and empty data error
/// out before any file is written.
pub fn emit_plot(csv: &str, kind: ExperimentKind, out: &Path) -> Result<(), HarnessError> {
    let spec = spec_from_csv(csv, kind)?;
    let svg = render(&spec);
    std::fs::write(out, svg)?;
    Ok(())
}
