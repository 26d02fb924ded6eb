//! Convergence diagnostics over a finished or running campaign: lengthscale
//! evolution, parameter variability and an embedding-ready data export.
//!
//! Everything here is a pure function of [`CampaignState`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mfbo::CampaignState;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("campaign has no GP snapshots")]
    NoSnapshots,
    #[error("campaign has no evaluations")]
    EmptyHistory,
    #[error("lengthscale {index} is {value}; all must be positive and finite")]
    NonPositiveLengthscale { index: usize, value: f64 },
    #[error("{labels} labels for {values} lengthscales")]
    LabelMismatch { labels: usize, values: usize },
    #[error("csv: {0}")]
    Csv(String),
}

/// Objective-GP lengthscales per guided iteration, in normalised input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthscaleHistory {
    /// Design labels followed by the fidelity labels.
    pub labels: Vec<String>,
    pub iterations: Vec<usize>,
    /// `rows[i][d]`: lengthscale of dimension `d` at `iterations[i]`.
    pub rows: Vec<Vec<f64>>,
}

pub fn lengthscale_history(state: &CampaignState) -> Result<LengthscaleHistory, AnalysisError> {
    if state.gp_snapshots.is_empty() {
        return Err(AnalysisError::NoSnapshots);
    }
    Ok(LengthscaleHistory {
        labels: state.space.joint_labels(),
        iterations: state.gp_snapshots.iter().map(|s| s.iteration).collect(),
        rows: state
            .gp_snapshots
            .iter()
            .map(|s| s.objective.lengthscales.clone())
            .collect(),
    })
}

impl LengthscaleHistory {
    /// `iteration,<label>...`
    pub fn to_csv(&self) -> Result<String, AnalysisError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["iteration".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (it, row) in self.iterations.iter().zip(&self.rows) {
            let mut rec = vec![it.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        finish(w)
    }

    /// Histogram of `log10 ℓ` per iteration over shared bins.
    pub fn histograms(&self, bins: usize) -> Vec<Histogram> {
        let logs: Vec<Vec<f64>> = self.rows.iter().map(|r| r.iter().map(|v| v.log10()).collect()).collect();
        let (lo, hi) = logs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let bins = bins.max(1);
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        self.iterations
            .iter()
            .zip(&logs)
            .map(|(&iteration, row)| {
                let mut counts = vec![0usize; bins];
                for &v in row {
                    let k = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
                    counts[k.min(bins - 1)] += 1;
                }
                Histogram {
                    iteration,
                    log10_edges: edges.clone(),
                    counts,
                }
            })
            .collect()
    }

    /// Line chart of `log10 ℓ` against iteration, one polyline per dimension.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 48.0);
        let logs: Vec<Vec<f64>> = self.rows.iter().map(|r| r.iter().map(|v| v.log10()).collect()).collect();
        let (lo, hi) = logs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let n = self.iterations.len().max(2) - 1;
        let px = |i: usize| pad + (w - 2.0 * pad) * i as f64 / n as f64;
        let py = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{pad}\" y=\"24\" font-size=\"14\">log10 lengthscale by iteration</text>\n\
             <line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <text x=\"4\" y=\"{pad}\" font-size=\"10\">{hi:.2}</text>\n\
             <text x=\"4\" y=\"{b}\" font-size=\"10\">{lo:.2}</text>\n",
            b = h - pad,
            r = w - pad,
        );
        for (d, label) in self.labels.iter().enumerate() {
            let hue = 360.0 * d as f64 / self.labels.len() as f64;
            let points: Vec<String> = logs
                .iter()
                .enumerate()
                .filter_map(|(i, row)| row.get(d).map(|&v| format!("{:.2},{:.2}", px(i), py(v))))
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"hsl({hue:.0},70%,40%)\" points=\"{}\"><title>{}</title></polyline>\n",
                points.join(" "),
                xml_escape(label)
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Heatmap of `log10 ℓ`: iterations across, dimensions down.
    pub fn to_heatmap_svg(&self) -> String {
        let cell = 12.0;
        let left = 110.0;
        let (rows, cols) = (self.labels.len(), self.iterations.len());
        let logs: Vec<Vec<f64>> = self.rows.iter().map(|r| r.iter().map(|v| v.log10()).collect()).collect();
        let (lo, hi) = logs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (w, h) = (left + cell * cols as f64 + 8.0, 8.0 + cell * rows as f64);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        for (d, label) in self.labels.iter().enumerate() {
            let y = 4.0 + cell * d as f64;
            svg.push_str(&format!(
                "<text x=\"2\" y=\"{:.1}\" font-size=\"9\">{}</text>\n",
                y + cell - 3.0,
                xml_escape(label)
            ));
            for (i, row) in logs.iter().enumerate() {
                let t = row.get(d).map_or(0.0, |v| (v - lo) / span);
                let shade = (255.0 * (1.0 - t)).round() as u8;
                svg.push_str(&format!(
                    "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\"/>\n",
                    left + cell * i as f64
                ));
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Counts of `log10 ℓ` across dimensions at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub iteration: usize,
    pub log10_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Normalised inverse lengthscales: the most influential parameter reads 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityReport {
    pub labels: Vec<String>,
    pub variability: Vec<f64>,
    pub source_iteration: usize,
}

/// `vᵢ = (1/ℓᵢ) / maxⱼ(1/ℓⱼ)`, computed as `min ℓ / ℓᵢ`.
pub fn parameter_variability(
    lengthscales: &[f64],
    labels: &[String],
    source_iteration: usize,
) -> Result<VariabilityReport, AnalysisError> {
    if labels.len() != lengthscales.len() {
        return Err(AnalysisError::LabelMismatch {
            labels: labels.len(),
            values: lengthscales.len(),
        });
    }
    if let Some((index, &value)) = lengthscales
        .iter()
        .enumerate()
        .find(|(_, &l)| !(l > 0.0 && l.is_finite()))
    {
        return Err(AnalysisError::NonPositiveLengthscale { index, value });
    }
    let min = lengthscales.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(VariabilityReport {
        labels: labels.to_vec(),
        variability: lengthscales.iter().map(|&l| min / l).collect(),
        source_iteration,
    })
}

/// Variability of the design parameters from the latest snapshot.
pub fn campaign_variability(state: &CampaignState) -> Result<VariabilityReport, AnalysisError> {
    let snap = state.gp_snapshots.last().ok_or(AnalysisError::NoSnapshots)?;
    let d = state.space.x_dim();
    parameter_variability(&snap.objective.lengthscales[..d], &state.space.labels, snap.iteration)
}

/// Design vectors with label columns, one row per evaluation.
///
/// Column order: `index`, the design labels, then `iteration`, `axial`,
/// `radial`, `f` (empty for failed evaluations). Fidelities are labels only.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn export_embedding_data(state: &CampaignState) -> Result<EmbeddingTable, AnalysisError> {
    if state.history.is_empty() {
        return Err(AnalysisError::EmptyHistory);
    }
    let mut header = vec!["index".to_string()];
    header.extend(state.space.labels.iter().cloned());
    header.extend(["iteration", "axial", "radial", "f"].map(String::from));
    let rows = state
        .history
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut r = vec![i.to_string()];
            r.extend(e.x.iter().map(|v| v.to_string()));
            r.push(e.iteration.to_string());
            r.push(e.z_rounded.axial.to_string());
            r.push(e.z_rounded.radial.to_string());
            r.push(e.f.map(|f| f.to_string()).unwrap_or_default());
            r
        })
        .collect();
    Ok(EmbeddingTable { header, rows })
}

impl EmbeddingTable {
    pub fn to_csv(&self) -> Result<String, AnalysisError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        finish(w)
    }
}

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Csv(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, AnalysisError> {
    let bytes = w.into_inner().map_err(|e| AnalysisError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AnalysisError::Csv(e.to_string()))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
