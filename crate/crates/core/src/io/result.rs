use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::{
    Method, MultiviewDataset, Objective, PhaseTimings, RunFlags, SolveResult, SolverConfig,
    TraceEntry,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub view_dims: Vec<usize>,
    pub view_names: Vec<String>,
    pub has_labels: bool,
}

impl DatasetSummary {
    pub fn of(ds: &MultiviewDataset) -> Self {
        Self {
            name: ds.name.clone(),
            n: ds.n_samples(),
            view_dims: ds.view_dims(),
            view_names: ds.view_names.clone(),
            has_labels: ds.labels.is_some(),
        }
    }
}

/// One point of a `d` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub d: usize,
    pub seed: u64,
    pub final_unsquared: f64,
    pub iters_run: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// `"acc"` when labels were available, otherwise `"objective"`.
    pub criterion: String,
    pub best_index: usize,
    pub points: Vec<SweepPoint>,
}

/// Per-seed outcomes of repeated runs with the mean of each metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub final_unsquared: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<MetricReport>,
}

/// Everything written for a run. Wall-clock values live only in `timing`, so
/// two runs with the same inputs differ only there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSummary>,
    pub method: Method,
    pub config: SolverConfig,
    pub converged: bool,
    pub iters_run: usize,
    pub initial_objective: Objective,
    pub final_objective: Objective,
    pub trace: Vec<TraceEntry>,
    pub weights: Vec<f64>,
    pub per_view_residuals: Vec<f64>,
    pub flags: RunFlags,
    pub assignment: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<RepeatSummary>,
    pub timing: Timing,
}

/// Wall-clock section, excluded from determinism comparisons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Phase timings of the reported run.
    pub phases: PhaseTimings,
    /// Whole command, including loading and any sweep or repeats.
    pub wall_seconds: f64,
}

impl ResultDocument {
    pub fn new(result: &SolveResult, metrics: Option<MetricReport>) -> Self {
        Self {
            dataset: None,
            method: result.method,
            config: result.config.clone(),
            converged: result.converged,
            iters_run: result.iters_run,
            initial_objective: result.initial_objective.clone(),
            final_objective: result.final_objective.clone(),
            trace: result.trace.clone(),
            weights: result.model.weights(),
            per_view_residuals: result.per_view_residuals().to_vec(),
            flags: result.flags.clone(),
            assignment: result.assignment().to_vec(),
            metrics,
            sweep: None,
            repeats: None,
            timing: Timing {
                phases: result.timings.clone(),
                wall_seconds: result.timings.total,
            },
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Writes `<stem>.trace.csv` and then the JSON document, each atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)? + "\n";
        let mut csv = String::from("iter,unsquared,weighted_squared\n");
        csv.push_str(&format!(
            "0,{},{}\n",
            self.initial_objective.unsquared, self.initial_objective.weighted_squared
        ));
        for e in &self.trace {
            csv.push_str(&format!("{},{},{}\n", e.iter, e.unsquared, e.weighted_squared));
        }
        // the trace goes first so that the JSON only appears once both are complete
        write_atomic(&trace_path(path), csv.as_bytes())?;
        write_atomic(path, json.as_bytes())
    }
}

pub fn trace_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "result".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.trace.csv"))
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_result(result: &SolveResult, metrics: Option<MetricReport>, path: &Path) -> Result<()> {
    ResultDocument::new(result, metrics).write(path)
}
