//! Static SVG plots of leaves, flow lines and Ξ-fiber orbits, each with a
//! CSV of the plotted points.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bisubmersion::{GeneratorSet, HolonomyWord};
use crate::error::{Error, Result};
use crate::flows::{flow_trajectory, leaf_sample};
use crate::lie2::lifted_action;
use crate::sampling::Region;
use crate::scenario::Scenario;

/// Cap on flow evaluations per plotted leaf.
pub const LEAF_PLOT_BUDGET: usize = 4000;
/// Leaves started along the last coordinate when no start point is given.
pub const LEAF_SEEDS: usize = 5;
/// Group elements per plotted orbit.
pub const ORBIT_POINTS: usize = 64;

const WIDTH: f64 = 480.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Leaves,
    Flow,
    Fibers,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaves" => Ok(PlotKind::Leaves),
            "flow" => Ok(PlotKind::Flow),
            "fibers" => Ok(PlotKind::Fibers),
            _ => Err(Error::Precondition(format!("plot target must be leaves, flow or fibers, not `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub seed: u64,
    pub budget: usize,
    /// Flow time.
    pub time: f64,
    pub from: Option<Vec<f64>>,
}

impl PlotOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        PlotOptions {
            seed: s.seed,
            budget: s.budget,
            time: 1.0,
            from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Vec<f64>>,
    /// Joined by a polyline rather than scattered.
    pub line: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub title: String,
    pub coords: Vec<String>,
    pub series: Vec<Series>,
}

/// Points to plot, in chart coordinates. Leaves are clipped to the
/// default sample box.
pub fn plot_data(s: &Scenario, kind: PlotKind, opts: &PlotOptions) -> Result<PlotData> {
    let f = s.foliation()?;
    let m = f.manifold();
    let starts = match &opts.from {
        Some(p) => vec![p.clone()],
        None => default_starts(s)?,
    };
    let bounds = Region::default_for(m);
    let series = match kind {
        PlotKind::Leaves => starts
            .iter()
            .map(|p| {
                let leaf = leaf_sample(f, p, opts.budget.min(LEAF_PLOT_BUDGET), opts.seed)?;
                let mut points = leaf.points;
                points.retain(|q| q.iter().zip(bounds.lo.iter().zip(&bounds.hi)).all(|(x, (a, b))| a <= x && x <= b));
                Ok(Series {
                    label: format!("leaf through {}", fmt_point(p)),
                    points,
                    line: false,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        PlotKind::Flow => {
            let x = f.fields().into_iter().next().ok_or_else(|| Error::Precondition("the zero module has no flow".into()))?;
            let p = &starts[0];
            let (_, tr) = flow_trajectory(&x, p, opts.time)?;
            let mut points = vec![m.normalize(p)];
            points.extend(tr.into_iter().filter(|(t, _)| *t != 0.0).map(|(_, q)| q));
            vec![Series {
                label: format!("flow of {} from {} for t = {}", f.generators()[0].0, fmt_point(p), opts.time),
                points,
                line: true,
            }]
        }
        PlotKind::Fibers => {
            let act = s.action()?;
            let set = GeneratorSet::of_foliation(f, "F");
            let p = &starts[0];
            let w = HolonomyWord::single(&set, vec![1.0; f.len()], p)?;
            let group = act.group();
            let gm = group.manifold();
            let mut sources = Vec::new();
            let mut targets = Vec::new();
            for i in 0..ORBIT_POINTS {
                let u = i as f64 / ORBIT_POINTS as f64;
                let g: Vec<f64> = (0..group.dim())
                    .map(|j| match gm.period(j) {
                        Some(per) => u * per,
                        None => -2.0 + 4.0 * u,
                    })
                    .collect();
                let Ok(moved) = lifted_action(&g, &w, act) else { continue };
                sources.push(moved.source().to_vec());
                targets.push(moved.target().to_vec());
            }
            vec![
                Series {
                    label: "sources of g ⋆ w".into(),
                    points: sources,
                    line: true,
                },
                Series {
                    label: "targets of g ⋆ w".into(),
                    points: targets,
                    line: true,
                },
            ]
        }
    };
    let what = match kind {
        PlotKind::Leaves => "leaves",
        PlotKind::Flow => "flow",
        PlotKind::Fibers => "Ξ-fiber orbit",
    };
    Ok(PlotData {
        title: format!("{}: {what}", s.name),
        coords: m.coord_names().to_vec(),
        series,
    })
}

/// Probe points, else points spread along the last coordinate.
fn default_starts(s: &Scenario) -> Result<Vec<Vec<f64>>> {
    let m = s.manifold()?;
    if !s.probes.is_empty() {
        return Ok(s.probes.iter().map(|p| p.point.clone()).collect());
    }
    let r = Region::default_for(m);
    let n = m.dim();
    let mut out = Vec::new();
    for k in 0..LEAF_SEEDS {
        let mut p: Vec<f64> = r.lo.iter().zip(&r.hi).map(|(a, b)| (a + b) / 2.0).collect();
        if n > 0 {
            p[n - 1] = -2.0 + 4.0 * k as f64 / (LEAF_SEEDS - 1) as f64;
        }
        if m.in_domain(&p) {
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(out)
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{x:.3}")).collect();
    format!("({})", parts.join(", "))
}

fn xy(p: &[f64]) -> (f64, f64) {
    (p.first().copied().unwrap_or(0.0), p.get(1).copied().unwrap_or(0.0))
}

/// The first two coordinates as an SVG scatter or polyline.
pub fn render_svg(d: &PlotData) -> String {
    let pts = d.series.iter().flat_map(|s| s.points.iter()).map(|p| xy(p));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let w = if *hi > *lo { 0.05 * (*hi - *lo) } else { 0.5 };
        *lo -= w;
        *hi += w;
    };
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let inner = WIDTH - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * inner;
    let sy = |y: f64| WIDTH - MARGIN - (y - y0) / (y1 - y0) * inner;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{WIDTH}" viewBox="0 0 {WIDTH} {WIDTH}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(&d.title));
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="#888"/>"##
    );
    let xl = d.coords.first().cloned().unwrap_or_default();
    let yl = d.coords.get(1).cloned().unwrap_or_default();
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{} ∈ [{x0:.2}, {x1:.2}]</text>"#,
        MARGIN,
        WIDTH - 12.0,
        escape(&xl)
    );
    let _ = writeln!(
        out,
        r#"<text x="8" y="{:.1}" font-family="sans-serif" font-size="12" transform="rotate(-90 8 {:.1})">{} ∈ [{y0:.2}, {y1:.2}]</text>"#,
        WIDTH - MARGIN,
        WIDTH - MARGIN,
        escape(&yl)
    );
    for (i, s) in d.series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(out, r#"<g fill="{c}" stroke="{c}"><title>{}</title>"#, escape(&s.label));
        if s.line && s.points.len() > 1 {
            let path: Vec<String> = s.points.iter().map(|p| xy(p)).map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        } else {
            for (x, y) in s.points.iter().map(|p| xy(p)) {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" stroke="none"/>"#, sx(x), sy(y));
            }
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `series, index, coords…` rows.
pub fn render_csv(d: &PlotData) -> Result<String> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["series".to_string(), "index".to_string()];
    header.extend(d.coords.iter().cloned());
    wr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for (k, s) in d.series.iter().enumerate() {
        for (i, p) in s.points.iter().enumerate() {
            let mut row = vec![k.to_string(), i.to_string()];
            row.extend(p.iter().map(|x| format!("{x:.12}")));
            wr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    let bytes = wr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the SVG to `path` and the CSV next to it; returns both paths.
pub fn write_plot(d: &PlotData, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = path.with_extension("csv");
    std::fs::write(path, render_svg(d))?;
    std::fs::write(&csv_path, render_csv(d)?)?;
    Ok((path.to_path_buf(), csv_path))
}
