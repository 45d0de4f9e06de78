use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::Method;
use super::run::{RunResult, RunStatus};
use crate::error::{Error, Result};

pub const RAW_HEADER: &str = "env,method,n_wedge,dataset_size,run,seed,status,perf";
pub const SUMMARY_HEADER: &str = "env,method,dataset_size,mean,cvar10,cvar1,n_runs";

/// Mean of the `⌈α·n⌉` smallest values.
pub fn cvar(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // The small offset keeps α·n from rounding up when it is an integer in exact arithmetic.
    let k = ((alpha * values.len() as f64 - 1e-9).ceil() as usize).clamp(1, values.len());
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub env: String,
    pub method: Method,
    pub dataset_size: usize,
    pub mean: f64,
    pub cvar10: f64,
    pub cvar1: f64,
    pub n_runs: usize,
}

/// Per `(method, dataset size)` statistics over successful runs; groups where
/// every run failed are left out.
pub fn aggregate(env: &str, results: &[RunResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, usize), Vec<f64>> = BTreeMap::new();
    for r in results {
        if r.status == RunStatus::Ok {
            groups.entry((r.method, r.dataset_size)).or_default().push(r.perf);
        }
    }
    groups
        .into_iter()
        .map(|((method, dataset_size), v)| SummaryRow {
            env: env.to_string(),
            method,
            dataset_size,
            mean: v.iter().sum::<f64>() / v.len() as f64,
            cvar10: cvar(&v, 0.1).unwrap(),
            cvar1: cvar(&v, 0.01).unwrap(),
            n_runs: v.len(),
        })
        .collect()
}

pub fn raw_csv(env: &str, results: &[RunResult]) -> String {
    let mut out = format!("{RAW_HEADER}\n");
    for r in results {
        let n_wedge = r.n_wedge.map(|n| n.to_string()).unwrap_or_default();
        let status = match &r.status {
            RunStatus::Ok => "ok",
            RunStatus::Failed(_) => "failed",
        };
        writeln!(
            out,
            "{env},{},{n_wedge},{},{},{},{status},{}",
            r.method.name(),
            r.dataset_size,
            r.run,
            r.seed,
            r.perf
        )
        .unwrap();
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.env,
            r.method.name(),
            r.dataset_size,
            r.mean,
            r.cvar10,
            r.cvar1,
            r.n_runs
        )
        .unwrap();
    }
    out
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SUMMARY_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `{SUMMARY_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.into(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err("expected 7 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
        rows.push(SummaryRow {
            env: f[0].to_string(),
            method: Method::parse(f[1]).ok_or_else(|| err("unknown method"))?,
            dataset_size: f[2].parse().map_err(|_| err("bad dataset size"))?,
            mean: num(f[3])?,
            cvar10: num(f[4])?,
            cvar1: num(f[5])?,
            n_runs: f[6].parse().map_err(|_| err("bad run count"))?,
        });
    }
    Ok(rows)
}

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 50.0;
const COLORS: [(Method, &str); 4] = [
    (Method::BasicRl, "#d62728"),
    (Method::Spibb, "#1f77b4"),
    (Method::Spibb2s, "#2ca02c"),
    (Method::SpibbBeta, "#9467bd"),
];

fn color(m: Method) -> &'static str {
    COLORS.iter().find(|(c, _)| *c == m).map_or("#333333", |(_, c)| c)
}

/// Three panels (mean, CVaR 10%, CVaR 1%) against log dataset size. Learning
/// methods are drawn as one `<g>` with a path per panel; behavior and optimal
/// performance as dashed horizontal lines.
pub fn render_svg(env: &str, rows: &[SummaryRow]) -> String {
    let rows: Vec<&SummaryRow> = rows.iter().filter(|r| r.env == env).collect();
    let mut reference: BTreeMap<Method, f64> = BTreeMap::new();
    let mut curves: BTreeMap<Method, Vec<&SummaryRow>> = BTreeMap::new();
    for r in &rows {
        if r.method.is_reference() {
            reference.entry(r.method).or_insert(r.mean);
        } else {
            curves.entry(r.method).or_default().push(r);
        }
    }
    let xs = rows.iter().map(|r| (r.dataset_size.max(1) as f64).log10());
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let ys = rows.iter().flat_map(|r| [r.mean, r.cvar10, r.cvar1]).filter(|y| y.is_finite());
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let width = 3.0 * PANEL_W + 4.0 * MARGIN;
    let height = PANEL_H + 2.5 * MARGIN;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<text x="{}" y="16" font-size="14">{env}</text>"#, MARGIN).unwrap();
    let panel_x = |i: usize| MARGIN + i as f64 * (PANEL_W + MARGIN);
    let px = |i: usize, x: f64| panel_x(i) + (x - x0) / (x1 - x0) * PANEL_W;
    let py = |y: f64| MARGIN + (1.0 - (y - y0) / (y1 - y0)) * PANEL_H;
    for (i, title) in ["mean", "CVaR 10%", "CVaR 1%"].iter().enumerate() {
        let x = panel_x(i);
        writeln!(
            svg,
            r##"<rect x="{x:.2}" y="{MARGIN:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="#999999"/>"##
        )
        .unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{title}</text>"#, x, MARGIN - 6.0).unwrap();
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">log10 dataset size [{x0:.2}, {x1:.2}]</text>"#,
            x,
            MARGIN + PANEL_H + 16.0
        )
        .unwrap();
        for (m, y) in &reference {
            let dash = if *m == Method::Optimal { "6,3" } else { "2,2" };
            writeln!(
                svg,
                r##"<line class="{}" x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555555" stroke-dasharray="{dash}"/>"##,
                m.name(),
                py(*y),
                x + PANEL_W,
                py(*y)
            )
            .unwrap();
        }
    }
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}">y range [{y0:.4}, {y1:.4}]; dashed: optimal, dotted: behavior</text>"#,
        MARGIN,
        height - 8.0
    )
    .unwrap();
    for (k, (m, pts)) in curves.iter().enumerate() {
        writeln!(svg, r#"<g class="{}" stroke="{}" fill="none">"#, m.name(), color(*m)).unwrap();
        for panel in 0..3 {
            let mut d = String::new();
            for (j, r) in pts.iter().enumerate() {
                let y = [r.mean, r.cvar10, r.cvar1][panel];
                let cmd = if j == 0 { 'M' } else { 'L' };
                write!(d, "{cmd}{:.2},{:.2} ", px(panel, (r.dataset_size.max(1) as f64).log10()), py(y)).unwrap();
            }
            writeln!(svg, r#"<path d="{}"/>"#, d.trim_end()).unwrap();
        }
        writeln!(svg, "</g>").unwrap();
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{}">{}</text>"#,
            width - MARGIN - 80.0,
            16.0 + 12.0 * k as f64,
            color(*m),
            m.name()
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `raw.csv`, `summary.csv` and `<env>.svg` into `out_dir`.
pub fn emit_outputs(
    env: &str,
    summary: &[SummaryRow],
    raw: &[RunResult],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let files = [
        (out_dir.join("raw.csv"), raw_csv(env, raw)),
        (out_dir.join("summary.csv"), summary_csv(summary)),
        (out_dir.join(format!("{env}.svg")), render_svg(env, summary)),
    ];
    let mut written = Vec::new();
    for (path, text) in files {
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

/// One SVG per environment found in `summary`, written next to each other in `out_dir`.
pub fn plot_summary(summary: &[SummaryRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let envs: std::collections::BTreeSet<&str> = summary.iter().map(|r| r.env.as_str()).collect();
    let mut written = Vec::new();
    for env in envs {
        let path = out_dir.join(format!("{env}.svg"));
        std::fs::write(&path, render_svg(env, summary))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(method: Method, size: usize, run: usize, perf: f64) -> RunResult {
        RunResult {
            method,
            n_wedge: None,
            dataset_size: size,
            run,
            seed: 0,
            status: RunStatus::Ok,
            perf,
        }
    }

    #[test]
    fn cvar_basics() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(cvar(&v, 0.1).unwrap(), 1.0);
        assert_eq!(cvar(&v, 1.0).unwrap(), 5.5);
        assert_eq!(cvar(&v, 0.25).unwrap(), 2.0);
        assert!(matches!(cvar(&[], 0.1), Err(Error::EmptyInput)));
        assert!(cvar(&v, 0.0).is_err());
    }

    #[test]
    fn single_and_constant_groups() {
        let rows = aggregate("g", &[result(Method::Spibb, 10, 0, 0.3)]);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mean, rows[0].cvar10, rows[0].cvar1), (0.3, 0.3, 0.3));
        let many: Vec<RunResult> = (0..50).map(|i| result(Method::Spibb, 10, i, 0.7)).collect();
        let rows = aggregate("g", &many);
        assert!((rows[0].mean - 0.7).abs() < 1e-15);
        assert_eq!(rows[0].cvar1, 0.7);
    }

    #[test]
    fn failed_runs_are_not_averaged() {
        let mut bad = result(Method::Spibb, 10, 1, f64::NAN);
        bad.status = RunStatus::Failed("boom".into());
        let rows = aggregate("g", &[result(Method::Spibb, 10, 0, 0.5), bad.clone()]);
        assert_eq!(rows[0].n_runs, 1);
        assert_eq!(rows[0].mean, 0.5);
        assert!(raw_csv("g", &[bad]).contains(",failed,NaN"));
    }

    #[test]
    fn empty_outputs_have_headers() {
        assert_eq!(raw_csv("g", &[]), format!("{RAW_HEADER}\n"));
        assert_eq!(summary_csv(&[]), format!("{SUMMARY_HEADER}\n"));
        assert!(render_svg("g", &[]).contains("</svg>"));
    }

    #[test]
    fn summary_round_trip() {
        let rs: Vec<RunResult> = (0..7)
            .map(|i| result(Method::BasicRl, 100, i, 0.1 * i as f64 + 1.0 / 3.0))
            .collect();
        let rows = aggregate("g", &rs);
        assert_eq!(parse_summary_csv(&summary_csv(&rows)).unwrap(), rows);
        assert!(parse_summary_csv("bad header\n").is_err());
    }

    #[test]
    fn one_group_one_curve_set() {
        let rows = aggregate("g", &[result(Method::Spibb, 10, 0, 0.3), result(Method::Behavior, 10, 0, 0.2)]);
        let svg = render_svg("g", &rows);
        assert_eq!(svg.matches("<path").count(), 3);
        assert_eq!(svg.matches("<g ").count(), 1);
        assert_eq!(svg.matches(r#"<line class="behavior""#).count(), 3);
        assert_eq!(svg, render_svg("g", &rows));
    }
}
