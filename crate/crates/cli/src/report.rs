//! Report bundle: SVG figures plus the CSV behind each one, rendered from
//! the artifacts of a run directory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use structamp_core::attribution::ConsensusMatrix;
use structamp_core::reference::reference;
use structamp_core::stats::{fit_line, AmplificationFit};
use structamp_core::structural::{AttentiveComparison, NoisePoint, PairSelection, StructuralReport};

use crate::manifest::RunDir;
use crate::svg::{diverging, fit_annotation, fixed, sequential, Figure, Frame, NiceScale};

pub const STAGE: &str = "report";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

/// Written by the analyze stage; tells the report which predictors exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisIndex {
    pub primary: PairSelection,
    pub predictors: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureEntry {
    pub stem: String,
    pub title: String,
}

const POINT: &str = "#1f77b4";
const ACCENT: &str = "#d62728";

fn frame(x: NiceScale, y: NiceScale) -> Frame {
    Frame { left: 70.0, top: 40.0, width: 400.0, height: 340.0, x, y }
}

/// Model-side against human-side correlations with the identity line, the
/// fitted line and the `k = …, R² = …` annotation.
#[allow(clippy::too_many_arguments)]
pub fn scatter_figure(
    title: &str,
    series: &str,
    labels: &[(String, String)],
    human: &[f64],
    model: &[f64],
    fit: &AmplificationFit<f64>,
    x_name: &str,
    y_name: &str,
) -> Result<Figure, ReportError> {
    if human.is_empty() || human.len() != model.len() || labels.len() != human.len() {
        return Err(ReportError::MissingArtifact(format!("pair vector for {series} is empty or ragged")));
    }
    let s = NiceScale::symmetric(human.iter().chain(model).copied());
    let f = frame(s, s);
    let mut fig = Figure::new(title, 500.0, 440.0);
    fig.axes(&f, x_name, y_name);
    fig.segment(&f, "identity", (s.lo, s.lo), (s.hi, s.hi), r##"stroke="#999" stroke-dasharray="4 3""##);
    for ((a, b), (&h, &m)) in labels.iter().zip(human.iter().zip(model)) {
        fig.point(&f, series, &format!("{a}~{b}"), h, m, POINT);
    }
    let line = |x: f64| fit.intercept + fit.k * x;
    fig.segment(&f, "fit", (s.lo, line(s.lo)), (s.hi, line(s.hi)), &format!(r#"stroke="{ACCENT}" stroke-width="1.5""#));
    let (text, k, r2) = fit_annotation(fit.k, fit.r_squared);
    fig.value_text(f.left + 10.0, f.top + 18.0, "start", "annotation", series, &text, &[("k", &k), ("r_squared", &r2)]);
    Ok(fig)
}

/// Factor × sub-scale grids of human and model correlations, one panel
/// above the other.
pub fn heatmap_figure(report: &StructuralReport<f64>) -> Result<Figure, ReportError> {
    let sel = report
        .selection(PairSelection::Big5ByTarget)
        .ok_or_else(|| ReportError::MissingArtifact(format!("{}: no big5_by_target pairs", report.predictor_id)))?;
    let v = &sel.pairs.vector;
    if v.is_empty() {
        return Err(ReportError::MissingArtifact(format!("{}: empty pair vector", report.predictor_id)));
    }
    let mut rows: Vec<&str> = Vec::new();
    let mut cols: Vec<&str> = Vec::new();
    for (a, b) in &v.labels {
        if !rows.contains(&a.as_str()) {
            rows.push(a);
        }
        if !cols.contains(&b.as_str()) {
            cols.push(b);
        }
    }
    let (cw, ch, left, top) = (30.0, 24.0, 60.0, 60.0);
    let panel_h = ch * rows.len() as f64 + 90.0;
    let width = left + cw * cols.len() as f64 + 30.0;
    let mut fig = Figure::new(&format!("Big Five by sub-scale correlations: {}", report.predictor_id), width.max(360.0), top + 2.0 * panel_h);
    for (p, (series, values)) in [("human", &v.human_r), ("model", &v.model_r)].into_iter().enumerate() {
        let y0 = top + p as f64 * panel_h;
        fig.label(left, y0 - 8.0, "start", "axis", series);
        for (r, row) in rows.iter().enumerate() {
            fig.label(left - 6.0, y0 + ch * r as f64 + ch / 2.0 + 4.0, "end", "category", row);
        }
        for ((a, b), &val) in v.labels.iter().zip(values.iter()) {
            let r = rows.iter().position(|x| x == a).expect("row listed");
            let c = cols.iter().position(|x| x == b).expect("column listed");
            let (x, y) = (left + cw * c as f64, y0 + ch * r as f64);
            fig.cell(series, &format!("{a}~{b}"), x, y, cw, ch, val, &diverging(val), 2);
        }
        for (c, col) in cols.iter().enumerate() {
            fig.label_rotated(left + cw * c as f64 + cw / 2.0, y0 + ch * rows.len() as f64 + 8.0, col);
        }
    }
    Ok(fig)
}

/// Amplification against predictive accuracy, one point per predictor.
pub fn k_vs_r_figure(points: &[(String, f64, f64)], meta: Option<&AmplificationFit<f64>>) -> Result<Figure, ReportError> {
    if points.is_empty() {
        return Err(ReportError::MissingArtifact("no predictor has a defined mean predictive r".into()));
    }
    let xs = NiceScale::new(
        points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let ys = NiceScale::new(
        points.iter().map(|p| p.2).fold(f64::INFINITY, f64::min),
        points.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max),
    );
    let f = frame(xs, ys);
    let mut fig = Figure::new("Amplification against predictive accuracy", 500.0, 440.0);
    fig.axes(&f, "k", "mean predictive r");
    for (id, k, r) in points {
        fig.point(&f, "predictor", id, *k, *r, POINT);
        fig.label(f.px(*k) + 6.0, f.py(*r) - 6.0, "start", "category", id);
    }
    if let Some(m) = meta {
        let line = |x: f64| m.intercept + m.k * x;
        fig.segment(&f, "fit", (xs.lo, line(xs.lo)), (xs.hi, line(xs.hi)), &format!(r#"stroke="{ACCENT}" stroke-width="1.5""#));
        let (slope, r2) = (fixed(m.k, 2), fixed(m.r_squared, 2));
        fig.value_text(
            f.left + 10.0,
            f.top + 18.0,
            "start",
            "annotation",
            "fit",
            &format!("slope = {slope}, R² = {r2}"),
            &[("slope", &slope), ("r_squared", &r2)],
        );
    }
    Ok(fig)
}

pub fn noise_figure(points: &[NoisePoint<f64>]) -> Result<Figure, ReportError> {
    if points.is_empty() {
        return Err(ReportError::MissingArtifact("noise sweep has no points".into()));
    }
    let xs = NiceScale::new(points.iter().map(|p| p.sigma).fold(f64::INFINITY, f64::min), points.iter().map(|p| p.sigma).fold(f64::NEG_INFINITY, f64::max));
    let ys = NiceScale::new(points.iter().map(|p| p.k).fold(f64::INFINITY, f64::min), points.iter().map(|p| p.k).fold(f64::NEG_INFINITY, f64::max));
    let f = frame(xs, ys);
    let mut fig = Figure::new("Amplification under injected noise", 500.0, 440.0);
    fig.axes(&f, "noise sigma", "k");
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.sigma, p.k)).collect();
    fig.polyline(&f, "k", &pts, POINT);
    for (i, p) in points.iter().enumerate() {
        fig.point(&f, "k", &i.to_string(), p.sigma, p.k, POINT);
    }
    Ok(fig)
}

/// Pairwise agreement grid; `metric` is `pearson` or `kl`.
pub fn consensus_figure(m: &ConsensusMatrix<f64>, metric: &str) -> Result<Figure, ReportError> {
    let n = m.labels.len();
    if n < 2 {
        return Err(ReportError::MissingArtifact("consensus needs at least two attribution vectors".into()));
    }
    let (cw, left, top) = (56.0, 140.0, 60.0);
    let max_kl = m.kl_grid.iter().copied().fold(0.0f64, f64::max);
    let title = if metric == "kl" { "Attribution consensus: KL divergence" } else { "Attribution consensus: Pearson" };
    let mut fig = Figure::new(title, left + cw * n as f64 + 30.0, top + cw * n as f64 + 120.0);
    for (i, a) in m.labels.iter().enumerate() {
        fig.label(left - 6.0, top + cw * i as f64 + cw / 2.0 + 4.0, "end", "category", a);
        fig.label_rotated(left + cw * i as f64 + cw / 2.0, top + cw * n as f64 + 8.0, a);
        for (j, b) in m.labels.iter().enumerate() {
            let (v, fill) = if metric == "kl" {
                let v = m.kl(i, j);
                (v, sequential(v, max_kl))
            } else {
                let v = m.pearson(i, j);
                (v, diverging(v))
            };
            fig.cell(metric, &format!("{a}~{b}"), left + cw * j as f64, top + cw * i as f64, cw, cw, v, &fill, 3);
        }
    }
    Ok(fig)
}

/// Published condition grid with its meta-regression, for side-by-side
/// display with a run's own k-vs-r figure.
pub fn reference_figure() -> Result<Figure, ReportError> {
    let cells = &reference().conditions.cells;
    let ks: Vec<f64> = cells.iter().map(|c| c.k).collect();
    let rs: Vec<f64> = cells.iter().map(|c| c.r).collect();
    let fit = fit_line(&ks, &rs).map_err(|e| ReportError::Other(e.into()))?;
    let xs = NiceScale::new(ks.iter().copied().fold(f64::INFINITY, f64::min), ks.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let ys = NiceScale::new(rs.iter().copied().fold(f64::INFINITY, f64::min), rs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let f = frame(xs, ys);
    let mut fig = Figure::new("Published condition grid (reference values)", 500.0, 440.0);
    fig.axes(&f, "k", "mean predictive r");
    for c in cells {
        fig.point(&f, c.condition.as_str(), &c.model, c.k, c.r, POINT);
    }
    let line = |x: f64| fit.intercept + fit.k * x;
    fig.segment(&f, "fit", (xs.lo, line(xs.lo)), (xs.hi, line(xs.hi)), &format!(r#"stroke="{ACCENT}" stroke-width="1.5""#));
    let r2 = fixed(fit.r_squared, 2);
    fig.value_text(f.left + 10.0, f.top + 18.0, "start", "annotation", "fit", &format!("R² = {r2}"), &[("r_squared", &r2)]);
    Ok(fig)
}

fn emit(dir: &mut RunDir, out: &mut Vec<FigureEntry>, stem: &str, title: &str, fig: Figure) -> anyhow::Result<()> {
    dir.write(STAGE, &format!("reports/{stem}.svg"), fig.svg().as_bytes())?;
    dir.write(STAGE, &format!("reports/{stem}.csv"), fig.csv().as_bytes())?;
    out.push(FigureEntry { stem: stem.to_string(), title: title.to_string() });
    Ok(())
}

fn require(dir: &RunDir, rel: &str) -> Result<(), ReportError> {
    if dir.has(rel) && dir.path(rel).is_file() {
        Ok(())
    } else {
        Err(ReportError::MissingArtifact(rel.to_string()))
    }
}

/// Renders every figure the run's artifacts support and lists them in
/// `reports/index.json`.
pub fn render(dir: &mut RunDir) -> Result<Vec<FigureEntry>, ReportError> {
    require(dir, "analysis/index.json")?;
    let index: AnalysisIndex = dir.read_json("analysis/index.json")?;
    let mut figures = Vec::new();
    let mut kr = Vec::new();
    for entry in &index.predictors {
        let rel = format!("analysis/{}.json", entry.id);
        require(dir, &rel)?;
        let report: StructuralReport<f64> = dir.read_json(&rel)?;
        if report.selection(PairSelection::Big5ByTarget).is_some() {
            let stem = format!("heatmap_{}", entry.id);
            emit(dir, &mut figures, &stem, "correlation heatmap", heatmap_figure(&report)?)?;
        }
        for sel in &report.selections {
            let v = &sel.pairs.vector;
            let title = format!("Structure alignment: {} ({})", entry.id, sel.selection.as_str());
            let fig = scatter_figure(&title, &entry.id, &v.labels, &v.human_r, &v.model_r, &sel.fit, "human r", "model r")?;
            emit(dir, &mut figures, &format!("scatter_{}_{}", entry.id, sel.selection.as_str()), &title, fig)?;
        }
        if let (Some(sel), Some(r)) = (report.selection(index.primary), report.mean_predictive_r) {
            kr.push((entry.id.clone(), sel.k, r));
        }
    }
    if !kr.is_empty() {
        let meta: Option<AmplificationFit<f64>> =
            if dir.has("analysis/meta.json") { Some(dir.read_json("analysis/meta.json")?) } else { None };
        emit(dir, &mut figures, "k_vs_r", "amplification against accuracy", k_vs_r_figure(&kr, meta.as_ref())?)?;
    }
    if dir.has("noise/noise.json") {
        let pts: Vec<NoisePoint<f64>> = dir.read_json("noise/noise.json")?;
        emit(dir, &mut figures, "noise_curve", "noise dose-response", noise_figure(&pts)?)?;
    }
    if dir.has("attentive/attentive.json") {
        let a: AttentiveComparison<f64> = dir.read_json("attentive/attentive.json")?;
        let v = &a.pairs.vector;
        let title = "Full sample against attentive subgroup";
        let fig = scatter_figure(title, "attentive", &v.labels, &v.human_r, &v.model_r, &a.fit, "full-sample r", "attentive r")?;
        emit(dir, &mut figures, "attentive", title, fig)?;
    }
    if dir.has("attribution/consensus.json") {
        let m: ConsensusMatrix<f64> = dir.read_json("attribution/consensus.json")?;
        emit(dir, &mut figures, "consensus_pearson", "attribution consensus (Pearson)", consensus_figure(&m, "pearson")?)?;
        emit(dir, &mut figures, "consensus_kl", "attribution consensus (KL)", consensus_figure(&m, "kl")?)?;
    }
    emit(dir, &mut figures, "reference_conditions", "published condition grid", reference_figure()?)?;
    dir.write_json(STAGE, "reports/index.json", &figures)?;
    Ok(figures)
}
