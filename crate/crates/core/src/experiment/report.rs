//! Run reports and their file artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

pub use crate::audit::AuditCheck as Check;
use crate::error::Result;
use crate::stats::Series;

pub const REPORT_SCHEMA: &str = "curvflow.report/1";
pub const SERIES_VERSION: &str = "curvflow.series/1";

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: &'static str,
}

/// Fitted exponential growth of one observable against its closed form.
#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub observable: String,
    /// Closed form, e.g. `lk(n=3,k=0)`.
    pub kind: String,
    /// Exact rational per unit `μ₂`.
    pub predicted_exact: String,
    pub predicted_rate: f64,
    pub fitted_rate: f64,
    pub ci: [f64; 2],
    /// `None` when the predicted rate is zero.
    pub relative_error: Option<f64>,
    /// Zero-rate cases use the equivalence test `|fitted| <= max(half-width, 0.02 μ₂)`.
    pub zero_rate: bool,
    /// Whether the statistical acceptance rule holds.
    pub consistent: bool,
}

impl RateSummary {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci[1] - self.ci[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub schema: &'static str,
    pub experiment: String,
    /// Primary rate; decides the exit status together with `checks`.
    pub rate: Option<RateSummary>,
    /// Rates of further observables recorded by the same runs.
    pub secondary: Vec<RateSummary>,
    pub checks: Vec<Check>,
    pub replicas: usize,
    pub aborted: usize,
    /// Relative standard error of the ensemble mean at the horizon.
    pub achieved_rel_std_error: Option<f64>,
    pub values: BTreeMap<String, f64>,
    pub passed: bool,
    pub provenance: Provenance,
}

impl RateReport {
    /// 0 when everything passed, 3 on a statistical failure.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RateReport,
    pub series: Option<(String, Series)>,
    /// Predicted curve `mean(0) exp(rate t)` for the plot file.
    pub predicted_rate: Option<f64>,
}

pub fn series_csv(experiment: &str, observable: &str, s: &Series) -> String {
    let mut out = format!("# {SERIES_VERSION} experiment={experiment} observable={observable}\n");
    out.push_str("t,ensemble_mean,std_error,alive\n");
    for i in 0..s.t.len() {
        writeln!(out, "{:?},{:?},{:?},{}", s.t[i], s.mean[i], s.std_error[i], s.alive[i]).unwrap();
    }
    out
}

/// Whitespace-separated columns for gnuplot:
/// `t mean lower upper predicted`, with a two-standard-error band.
pub fn plot_data(s: &Series, predicted_rate: Option<f64>) -> String {
    let mut out = String::from("# t mean mean-2se mean+2se predicted\n");
    let m0 = s.mean.first().copied().unwrap_or(0.0);
    for i in 0..s.t.len() {
        let p = predicted_rate.map_or(f64::NAN, |r| m0 * (r * s.t[i]).exp());
        writeln!(
            out,
            "{:.6e} {:.9e} {:.9e} {:.9e} {:.9e}",
            s.t[i],
            s.mean[i],
            s.mean[i] - 2.0 * s.std_error[i],
            s.mean[i] + 2.0 * s.std_error[i],
            p
        )
        .unwrap();
    }
    out
}

pub fn report_json(r: &RateReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

/// Writes `report.json` and, for runs with a time series, `series.csv` and `plot.dat`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report_json(&out.report)?)?;
    if let Some((obs, s)) = &out.series {
        std::fs::write(dir.join("series.csv"), series_csv(&out.report.experiment, obs, s))?;
        std::fs::write(dir.join("plot.dat"), plot_data(s, out.predicted_rate))?;
    }
    Ok(())
}
