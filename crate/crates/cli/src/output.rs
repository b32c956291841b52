//! Run directories, the report document, and CSV emission.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use hma_core::report::CheckList;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize)]
pub struct GridInfo {
    pub h: f64,
    pub interior_nodes: usize,
    pub octagon_nodes: usize,
    pub fingerprint: String,
}

#[derive(Debug, Serialize)]
pub struct GroupInfo {
    pub relation_residual: f64,
    pub series_depth: usize,
    pub series_elements: usize,
    pub elements_per_level: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct SeedInfo {
    pub coefficients: [f64; 6],
    pub sup_norm: f64,
    pub trace_max: f64,
    pub div_max: f64,
    pub nodes_checked: usize,
}

#[derive(Debug, Serialize)]
pub struct SolverInfo {
    pub iterations: usize,
    pub final_residual: f64,
    pub history: Vec<f64>,
    pub min_u: f64,
    pub max_u: f64,
}

#[derive(Debug, Serialize)]
pub struct GeometryInfo {
    pub area: hma_core::AreaReport,
    pub b: hma_core::BReport,
    pub min_b: f64,
    pub mu_identity_rel: f64,
    pub tension_sup: f64,
    pub curvature_defect: f64,
    pub gamma: hma_core::GammaCheck,
    pub diameter_estimate: f64,
    pub diameter_bound: f64,
}

#[derive(Debug, Serialize)]
pub struct MmsLevel {
    pub h: f64,
    pub interior_nodes: usize,
    pub solve_error: f64,
    pub laplacian_error: f64,
    pub hessian_error: f64,
    pub iterations: usize,
}

#[derive(Debug, Serialize)]
pub struct MmsInfo {
    pub levels: Vec<MmsLevel>,
    /// None when a single level was requested (orders are n/a).
    pub order_solve: Option<f64>,
    pub order_laplacian: Option<f64>,
    pub order_hessian: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RoundtripRow {
    pub label: String,
    pub seed_sup: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub linear_residual: f64,
    pub trace_max: f64,
    pub div_max: f64,
    pub b_dev: f64,
    pub lambda_dev: f64,
}

#[derive(Debug, Serialize)]
pub struct ScanRayInfo {
    pub direction: [f64; 6],
    pub rows: Vec<hma_core::ScanRow>,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
}

/// The full report document. Sections stay `None` when a run fails before
/// reaching them, so partial reports are always well-formed JSON.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub created_unix: u64,
    pub config: RunConfig,
    pub config_hash: String,
    pub grid: Option<GridInfo>,
    pub group: Option<GroupInfo>,
    pub seed: Option<SeedInfo>,
    pub solver: Option<SolverInfo>,
    pub geometry: Option<GeometryInfo>,
    pub mms: Option<MmsInfo>,
    pub roundtrip: Option<Vec<RoundtripRow>>,
    pub scan: Option<Vec<ScanRayInfo>>,
    pub checks: CheckList,
    /// "pass", "fail", or "error".
    pub status: String,
    pub error: Option<String>,
    /// Wall-clock stage timings in seconds; the only non-deterministic field.
    pub timings: Vec<(String, f64)>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> RunReport {
        RunReport {
            command: command.into(),
            created_unix: unix_now(),
            config: config.clone(),
            config_hash: config.hash(),
            grid: None,
            group: None,
            seed: None,
            solver: None,
            geometry: None,
            mms: None,
            roundtrip: None,
            scan: None,
            checks: CheckList::new(),
            status: "error".into(),
            error: None,
            timings: Vec::new(),
        }
    }

    /// Sets the final status from the check list; returns the exit code.
    pub fn finish(&mut self) -> i32 {
        if self.checks.all_pass() {
            self.status = "pass".into();
            0
        } else {
            self.status = "fail".into();
            1
        }
    }

    pub fn fail_with(&mut self, err: &dyn std::fmt::Display) -> i32 {
        self.status = "error".into();
        self.error = Some(err.to_string());
        3
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).context("report serialization")?;
        std::fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    /// One line per check plus the final verdict, for the terminal.
    pub fn summarize(&self) -> String {
        let mut out = String::new();
        for e in &self.checks.entries {
            let cmp = if e.kind == "below" { "<=" } else { ">=" };
            out.push_str(&format!(
                "{} {:>24}  {:.3e} {} {:.3e}\n",
                if e.pass { "pass" } else { "FAIL" },
                e.name,
                e.value,
                cmp,
                e.tolerance
            ));
        }
        out.push_str(&format!("status: {}\n", self.status));
        out
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Creates `out_dir/<hash8>-<unix>[-<k>]/`, never reusing an existing one.
pub fn run_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let stamp = unix_now();
    let tag = &cfg.hash()[..8];
    let base = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&base)
        .with_context(|| format!("cannot create output directory {}", base.display()))?;
    for k in 0..1000 {
        let name = if k == 0 {
            format!("{tag}-{stamp}")
        } else {
            format!("{tag}-{stamp}-{k}")
        };
        let dir = base.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(e).with_context(|| format!("cannot create run dir in {}", base.display()))
            }
        }
    }
    anyhow::bail!("could not find a free run directory name under {}", base.display());
}

/// Writes one CSV file; each row formats floats with shortest round-trip
/// precision so identical runs emit identical bytes.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                text.push(',');
            }
            first = false;
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Stage timer that appends into the report's timing list.
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Stopwatch {
        Stopwatch(Instant::now())
    }

    pub fn lap(&mut self, report: &mut RunReport, stage: &str) {
        let now = Instant::now();
        report
            .timings
            .push((stage.into(), (now - self.0).as_secs_f64()));
        self.0 = now;
    }
}
