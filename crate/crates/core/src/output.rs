//! Report serialization: JSON documents, CSV tables, and gnuplot scripts.
//!
//! Every output file starts with a header block recording the tool version,
//! the SHA-256 of the config it came from, and the seed. The CSV dialect is
//! frozen: comma separator, `.` decimal point, LF line endings, one header
//! row after the comment block. All writers are byte-deterministic.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::amc::AmcModel;
use crate::metrics::{AoiReport, TruncatedPmf};
use crate::optimizer::{KCurvePoint, SweepResult};
use crate::rmc::RmcModel;
use crate::sim::SimResult;
use crate::state_space::{AmcState, RmcState};

pub const TOOL_NAME: &str = "dtdq";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct OutputMeta {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl OutputMeta {
    pub fn new(config_sha256: &str, seed: Option<u64>) -> Self {
        OutputMeta {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
        }
    }

    fn comment_block(&self, comment: &str) -> String {
        let seed = match self.seed {
            Some(s) => s.to_string(),
            None => "none".to_string(),
        };
        format!(
            "{comment} tool: {} {}\n{comment} config_sha256: {}\n{comment} seed: {seed}\n",
            self.tool, self.version, self.config_sha256
        )
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    meta: &'a OutputMeta,
    #[serde(flatten)]
    payload: &'a T,
}

/// Writes `{ meta, ...payload }` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, meta: &OutputMeta, payload: &T) -> io::Result<()> {
    let doc = Document { meta, payload };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text)
}

/// Writes a CSV file: comment header block, one header row, then rows.
pub fn write_csv<I>(path: &Path, meta: &OutputMeta, header: &str, rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut text = meta.comment_block("#");
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text)
}

pub fn write_pmf_csv(path: &Path, meta: &OutputMeta, pmf: &TruncatedPmf) -> io::Result<()> {
    write_csv(
        path,
        meta,
        "h,probability",
        pmf.values.iter().map(|(h, p)| format!("{h},{p}")),
    )
}

pub fn write_report_files(dir: &Path, meta: &OutputMeta, report: &AoiReport) -> io::Result<()> {
    write_json(&dir.join("report.json"), meta, report)?;
    write_pmf_csv(&dir.join("aoi_pmf.csv"), meta, &report.aoi_pmf)?;
    write_pmf_csv(&dir.join("paoi_pmf.csv"), meta, &report.paoi_pmf)
}

pub fn write_sim_files(dir: &Path, meta: &OutputMeta, result: &SimResult) -> io::Result<()> {
    write_json(&dir.join("sim_result.json"), meta, result)?;
    write_csv(
        &dir.join("aoi_histogram.csv"),
        meta,
        "h,count",
        result.aoi_histogram.iter().map(|(h, c)| format!("{h},{c}")),
    )
}

pub fn write_k_curve_csv(path: &Path, meta: &OutputMeta, curve: &[KCurvePoint]) -> io::Result<()> {
    write_csv(
        path,
        meta,
        "k,aoi_mean,paoi_mean",
        curve.iter().map(|p| format!("{},{},{}", p.k, p.aoi_mean, p.paoi_mean)),
    )
}

/// Long-format sweep table: one row per grid point per k.
pub fn write_sweep_long_csv(
    path: &Path,
    meta: &OutputMeta,
    sweep: &SweepResult,
) -> io::Result<()> {
    let mut rows = Vec::new();
    for point in &sweep.points {
        for cp in &point.gain.curve {
            rows.push(format!(
                "{},{},{},{},{},{},{},{}",
                point.index,
                point.mean1,
                point.mean2,
                point.variance1,
                point.variance2,
                cp.k,
                cp.aoi_mean,
                cp.paoi_mean
            ));
        }
    }
    write_csv(
        path,
        meta,
        "point,mean1,mean2,variance1,variance2,k,aoi_mean,paoi_mean",
        rows,
    )
}

/// Per-point optimum and gain table.
pub fn write_sweep_gain_csv(
    path: &Path,
    meta: &OutputMeta,
    sweep: &SweepResult,
) -> io::Result<()> {
    let rows = sweep.points.iter().map(|p| {
        let g = &p.gain;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.index,
            p.mean1,
            p.mean2,
            p.variance1,
            p.variance2,
            g.k_star,
            g.optimum_aoi,
            g.baseline.value,
            g.baseline.std_err,
            g.gain_percent,
            g.gain_ci.0,
            g.gain_ci.1,
            g.freezing_beneficial
        )
    });
    write_csv(
        path,
        meta,
        "point,mean1,mean2,variance1,variance2,k_star,aoi_at_k_star,baseline_mean,\
         baseline_std_err,gain_percent,gain_ci_low,gain_ci_high,freezing_beneficial",
        rows,
    )
}

fn amc_state_fields(s: &AmcState) -> String {
    format!("{},{},{},{}", s.class, s.i, s.j, s.l)
}

fn rmc_state_fields(s: &RmcState) -> String {
    format!("{},{},{},{}", s.class, s.i, s.j, s.l)
}

/// Enumeration dump: `index,class,i,j,l`.
pub fn write_amc_states_csv(path: &Path, meta: &OutputMeta, model: &AmcModel) -> io::Result<()> {
    write_csv(
        path,
        meta,
        "index,class,i,j,l",
        model
            .space
            .states()
            .iter()
            .enumerate()
            .map(|(idx, s)| format!("{idx},{}", amc_state_fields(s))),
    )
}

pub fn write_rmc_states_csv(path: &Path, meta: &OutputMeta, model: &RmcModel) -> io::Result<()> {
    write_csv(
        path,
        meta,
        "index,class,i,j,l",
        model
            .space
            .states()
            .iter()
            .enumerate()
            .map(|(idx, s)| format!("{idx},{}", rmc_state_fields(s))),
    )
}

/// Transient-matrix dump as `(row_state, col_state, probability)` triples.
pub fn write_amc_matrix_csv(path: &Path, meta: &OutputMeta, model: &AmcModel) -> io::Result<()> {
    let states = model.space.states();
    let mut rows = Vec::with_capacity(model.a.nnz());
    for (r, rs) in states.iter().enumerate() {
        for (c, v) in model.a.row(r) {
            rows.push(format!(
                "{r},{},{c},{},{v}",
                amc_state_fields(rs),
                amc_state_fields(&states[c])
            ));
        }
    }
    write_csv(
        path,
        meta,
        "row_index,row_class,row_i,row_j,row_l,col_index,col_class,col_i,col_j,col_l,probability",
        rows,
    )
}

/// Vector dump keyed by state tuple (used for c_s, c_u, sigma, v, pi).
pub fn write_amc_vector_csv(
    path: &Path,
    meta: &OutputMeta,
    model: &AmcModel,
    values: &[f64],
) -> io::Result<()> {
    write_csv(
        path,
        meta,
        "index,class,i,j,l,value",
        model
            .space
            .states()
            .iter()
            .zip(values)
            .enumerate()
            .map(|(idx, (s, v))| format!("{idx},{},{v}", amc_state_fields(s))),
    )
}

pub fn write_rmc_matrix_csv(path: &Path, meta: &OutputMeta, model: &RmcModel) -> io::Result<()> {
    let states = model.space.states();
    let mut rows = Vec::with_capacity(model.w.nnz());
    for (r, rs) in states.iter().enumerate() {
        for (c, v) in model.w.row(r) {
            rows.push(format!(
                "{r},{},{c},{},{v}",
                rmc_state_fields(rs),
                rmc_state_fields(&states[c])
            ));
        }
    }
    write_csv(
        path,
        meta,
        "row_index,row_class,row_i,row_j,row_l,col_index,col_class,col_i,col_j,col_l,probability",
        rows,
    )
}

pub fn write_rmc_vector_csv(
    path: &Path,
    meta: &OutputMeta,
    model: &RmcModel,
    values: &[f64],
) -> io::Result<()> {
    write_csv(
        path,
        meta,
        "index,class,i,j,l,value",
        model
            .space
            .states()
            .iter()
            .zip(values)
            .enumerate()
            .map(|(idx, (s, v))| format!("{idx},{},{v}", rmc_state_fields(s))),
    )
}

/// One curve of a plot: a data file plus its legend entry.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub data_file: String,
    pub title: String,
    /// gnuplot style, e.g. "with lines" or "with points pt 7".
    pub style: String,
}

/// Writes a whitespace-separated data file for one series.
pub fn write_dat(
    path: &Path,
    meta: &OutputMeta,
    columns: &str,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    let mut text = meta.comment_block("#");
    let _ = writeln!(text, "# columns: {columns}");
    for row in rows {
        let formatted: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&formatted.join(" "));
        text.push('\n');
    }
    fs::write(path, text)
}

/// Emits a gnuplot script plotting the given series into `<name>.png`.
pub fn write_gnuplot_script(
    dir: &Path,
    meta: &OutputMeta,
    name: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[PlotSeries],
) -> io::Result<PathBuf> {
    let mut text = meta.comment_block("#");
    let _ = writeln!(text, "set terminal pngcairo size 960,640");
    let _ = writeln!(text, "set output '{name}.png'");
    let _ = writeln!(text, "set xlabel '{xlabel}'");
    let _ = writeln!(text, "set ylabel '{ylabel}'");
    let _ = writeln!(text, "set key top left");
    let _ = writeln!(text, "set grid");
    let plots: Vec<String> = series
        .iter()
        .map(|s| format!("'{}' using 1:2 {} title '{}'", s.data_file, s.style, s.title))
        .collect();
    let _ = writeln!(text, "plot {}", plots.join(", \\\n     "));
    let path = dir.join(format!("{name}.gp"));
    fs::write(&path, text)?;
    Ok(path)
}
