//! Standalone SVG charts. Output depends only on the report contents, so
//! the same report always renders to the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::RankTiming;

use super::report::BenchReport;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

type Segment = (&'static str, fn(&RankTiming) -> f64);

/// Stacked-bar segments, bottom to top.
pub const RANK_SEGMENTS: [Segment; 7] = [
    ("t_comp", |t| t.t_comp),
    ("t_io", |t| t.t_io),
    ("t_comm", |t| t.t_comm),
    ("t_end_loop", |t| t.t_end_loop),
    ("t_opening_trajectory", |t| t.t_opening_trajectory),
    ("t_overhead1", |t| t.t_overhead1),
    ("t_overhead2", |t| t.t_overhead2),
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(span: f64) -> f64 {
    if !(span > 0.0) || !span.is_finite() {
        return 1.0;
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    format!("{v:.decimals$}")
}

struct Canvas {
    svg: String,
    y_max: f64,
    y_step: f64,
}

impl Canvas {
    fn new(title: &str, y_label: &str, x_label: &str, y_top: f64) -> Self {
        let y_step = nice_step(y_top);
        let y_max = (y_top / y_step).ceil().max(1.0) * y_step;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + Self::plot_w() / 2.0,
            escape(title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + Self::plot_w() / 2.0,
            HEIGHT - 16.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(20 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + Self::plot_h() / 2.0,
            escape(y_label)
        );
        let mut c = Self { svg, y_max, y_step };
        c.y_axis();
        c
    }

    fn plot_w() -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn plot_h() -> f64 {
        HEIGHT - TOP - BOTTOM
    }

    fn y(&self, v: f64) -> f64 {
        TOP + Self::plot_h() * (1.0 - (v / self.y_max).clamp(0.0, 1.0))
    }

    fn y_axis(&mut self) {
        let n = (self.y_max / self.y_step).round() as usize;
        for k in 0..=n {
            let v = k as f64 * self.y_step;
            let y = self.y(v);
            let _ = writeln!(
                self.svg,
                r##"<line x1="{LEFT:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#dddddd"/>"##,
                LEFT + Self::plot_w()
            );
            let _ = writeln!(
                self.svg,
                r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(v, self.y_step)
            );
        }
        let _ = writeln!(
            self.svg,
            r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            Self::plot_w(),
            Self::plot_h()
        );
    }

    fn x_tick(&mut self, x: f64, label: &str) {
        let base = TOP + Self::plot_h();
        let _ = writeln!(
            self.svg,
            r#"<line x1="{x:.2}" y1="{base:.1}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"#,
            base + 5.0
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            base + 19.0,
            escape(label)
        );
    }

    fn legend(&mut self, k: usize, color: &str, label: &str) {
        let x = WIDTH - RIGHT + 14.0;
        let y = TOP + 8.0 + 20.0 * k as f64;
        let _ = writeln!(
            self.svg,
            r#"<rect x="{x:.1}" y="{y:.1}" width="12" height="12" fill="{color}"/>"#
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 18.0,
            y + 10.0,
            escape(label)
        );
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

/// Log2-spaced x positions for the union of worker counts.
struct WorkerAxis {
    lo: f64,
    hi: f64,
}

impl WorkerAxis {
    fn new(counts: &[usize]) -> Self {
        let logs = counts.iter().map(|&n| (n.max(1) as f64).log2());
        let lo = logs.clone().fold(f64::INFINITY, f64::min);
        let hi = logs.fold(f64::NEG_INFINITY, f64::max);
        Self { lo, hi }
    }

    fn x(&self, n: usize) -> f64 {
        let pad = 30.0;
        let w = Canvas::plot_w() - 2.0 * pad;
        let l = (n.max(1) as f64).log2();
        if self.hi > self.lo {
            LEFT + pad + w * (l - self.lo) / (self.hi - self.lo)
        } else {
            LEFT + Canvas::plot_w() / 2.0
        }
    }
}

fn worker_counts(reports: &[BenchReport]) -> Vec<usize> {
    let mut counts: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.points.iter().map(|p| p.n_workers))
        .collect();
    counts.sort_unstable();
    counts.dedup();
    counts
}

fn series_label(r: &BenchReport) -> String {
    format!("{} {} X={}", r.machine, r.strategy, r.workload_factor)
}

fn draw_series(c: &mut Canvas, axis: &WorkerAxis, color: &str, pts: &[(usize, f64, f64)]) {
    let mut path = String::new();
    for (k, &(n, v, _)) in pts.iter().enumerate() {
        let _ = write!(path, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, axis.x(n), c.y(v));
    }
    let _ = writeln!(
        c.svg,
        r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="2"/>"#
    );
    for &(n, v, err) in pts {
        let x = axis.x(n);
        if err > 0.0 {
            let (y0, y1) = (c.y(v - err), c.y(v + err));
            let _ = writeln!(
                c.svg,
                r#"<path d="M{x:.2},{y0:.2} L{x:.2},{y1:.2} M{:.2},{y0:.2} L{:.2},{y0:.2} M{:.2},{y1:.2} L{:.2},{y1:.2}" stroke="{color}"/>"#,
                x - 4.0,
                x + 4.0,
                x - 4.0,
                x + 4.0
            );
        }
        let _ = writeln!(
            c.svg,
            r#"<circle cx="{x:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
            c.y(v)
        );
    }
}

/// Total time to solution against worker count, with repeat standard
/// deviations as error bars. Several reports are overlaid.
pub fn plot_total_time(reports: &[BenchReport]) -> String {
    let counts = worker_counts(reports);
    let axis = WorkerAxis::new(&counts);
    let top = reports
        .iter()
        .flat_map(|r| r.points.iter().map(|p| p.t_total_mean + p.t_total_std))
        .fold(0.0, f64::max);
    let mut c = Canvas::new("Total time", "t_total (s)", "workers N", top * 1.05);
    for &n in &counts {
        c.x_tick(axis.x(n), &n.to_string());
    }
    for (k, r) in reports.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<_> = r.points.iter().map(|p| (p.n_workers, p.t_total_mean, p.t_total_std)).collect();
        draw_series(&mut c, &axis, color, &pts);
        c.legend(k, color, &series_label(r));
    }
    c.finish()
}

/// Speed-up against worker count with the ideal `S = N` line.
pub fn plot_speedup(reports: &[BenchReport]) -> String {
    let counts = worker_counts(reports);
    let axis = WorkerAxis::new(&counts);
    let max_n = counts.last().copied().unwrap_or(1) as f64;
    let top = reports
        .iter()
        .flat_map(|r| r.points.iter().map(|p| p.speedup))
        .fold(max_n, f64::max);
    let mut c = Canvas::new("Speed-up", "S(N)", "workers N", top * 1.05);
    for &n in &counts {
        c.x_tick(axis.x(n), &n.to_string());
    }
    let ideal: Vec<_> = counts.iter().map(|&n| (n, n as f64, 0.0)).collect();
    let mut path = String::new();
    for (k, &(n, v, _)) in ideal.iter().enumerate() {
        let _ = write!(path, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, axis.x(n), c.y(v));
    }
    let _ = writeln!(
        c.svg,
        r##"<path d="{path}" fill="none" stroke="#555555" stroke-dasharray="6 4"/>"##
    );
    c.legend(0, "#555555", "ideal");
    for (k, r) in reports.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<_> = r.points.iter().map(|p| (p.n_workers, p.speedup, 0.0)).collect();
        draw_series(&mut c, &axis, color, &pts);
        c.legend(k + 1, color, &series_label(r));
    }
    c.finish()
}

/// Per-rank stacked timing components for the largest worker count of a
/// report. Negative overheads are drawn as zero height.
pub fn plot_ranks(report: &BenchReport) -> String {
    let point = report.points.iter().max_by_key(|p| p.n_workers);
    let timings: &[RankTiming] = point.map_or(&[], |p| &p.rank_timings);
    let heights: Vec<Vec<f64>> = timings
        .iter()
        .map(|t| RANK_SEGMENTS.iter().map(|(_, f)| f(t).max(0.0)).collect())
        .collect();
    let top = heights.iter().map(|h| h.iter().sum::<f64>()).fold(0.0, f64::max);
    let title = format!(
        "Per-rank timing, N = {} ({})",
        point.map_or(0, |p| p.n_workers),
        report.strategy
    );
    let mut c = Canvas::new(&title, "time (s)", "rank", top * 1.05);
    let n = timings.len().max(1) as f64;
    let slot = Canvas::plot_w() / n;
    let bar = (slot * 0.8).max(1.0);
    let label_every = (timings.len() / 16).max(1);
    for (i, (t, h)) in timings.iter().zip(&heights).enumerate() {
        let x = LEFT + slot * i as f64 + (slot - bar) / 2.0;
        let mut acc = 0.0;
        for (k, &v) in h.iter().enumerate() {
            let (y_hi, y_lo) = (c.y(acc + v), c.y(acc));
            acc += v;
            if y_lo - y_hi <= 0.0 {
                continue;
            }
            let _ = writeln!(
                c.svg,
                r#"<rect x="{x:.2}" y="{y_hi:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                y_lo - y_hi,
                PALETTE[k]
            );
        }
        if i % label_every == 0 {
            c.x_tick(x + bar / 2.0, &t.rank.to_string());
        }
    }
    for (k, (name, _)) in RANK_SEGMENTS.iter().enumerate() {
        c.legend(k, PALETTE[k], name);
    }
    c.finish()
}

fn stem(out: &Path) -> PathBuf {
    out.with_extension("")
}

fn suffixed(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    stem.with_file_name(name)
}

/// Writes the chart set for `reports` next to `out`: `<stem>_total.svg`,
/// `<stem>_speedup.svg`, and one per-rank chart per report
/// (`<stem>_ranks.svg`, or `<stem>_ranks_<k>.svg` for several reports).
pub fn emit_plots(reports: &[BenchReport], out: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to plot"));
    }
    let stem = stem(out);
    let mut files = vec![
        (suffixed(&stem, "_total.svg"), plot_total_time(reports)),
        (suffixed(&stem, "_speedup.svg"), plot_speedup(reports)),
    ];
    if reports.len() == 1 {
        files.push((suffixed(&stem, "_ranks.svg"), plot_ranks(&reports[0])));
    } else {
        for (k, r) in reports.iter().enumerate() {
            files.push((suffixed(&stem, &format!("_ranks_{k}.svg")), plot_ranks(r)));
        }
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, svg) in files {
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
