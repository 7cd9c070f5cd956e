//! Data types shared by the solvers, the metrics, and the file formats.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// `m` views of the same `n` samples. `views[v]` is `d_v × n`: one column per sample.
#[derive(Debug, Clone)]
pub struct MultiviewDataset {
    pub name: String,
    pub views: Vec<DenseMatrix>,
    pub view_names: Vec<String>,
    /// Raw categorical codes, one per sample.
    pub labels: Option<Vec<i64>>,
    pub declared_k: Option<usize>,
}

impl MultiviewDataset {
    /// Builds a dataset and rejects it if [`validate_dataset`] reports errors.
    pub fn new(
        name: impl Into<String>,
        views: Vec<DenseMatrix>,
        view_names: Option<Vec<String>>,
        labels: Option<Vec<i64>>,
        declared_k: Option<usize>,
    ) -> Result<Self> {
        let view_names =
            view_names.unwrap_or_else(|| (0..views.len()).map(|v| format!("view{v}")).collect());
        let ds = Self {
            name: name.into(),
            views,
            view_names,
            labels,
            declared_k,
        };
        let report = validate_dataset(&ds);
        if !report.is_valid() {
            return Err(Error::InvalidDataset(
                report.errors.iter().map(ToString::to_string).collect(),
            ));
        }
        Ok(ds)
    }

    pub fn n_samples(&self) -> usize {
        self.views.first().map_or(0, DenseMatrix::cols)
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(DenseMatrix::rows).collect()
    }

    /// Sum of the view dimensions.
    pub fn total_dim(&self) -> usize {
        self.views.iter().map(DenseMatrix::rows).sum()
    }

    /// Labels remapped to dense 0-based class ids (codes in ascending order).
    pub fn class_ids(&self) -> Option<Vec<usize>> {
        self.labels.as_deref().map(dense_ids)
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }
}

/// Maps arbitrary integer codes to `0..c` preserving code order.
pub fn dense_ids(codes: &[i64]) -> Vec<usize> {
    let mut sorted = codes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let index: BTreeMap<i64, usize> = sorted.into_iter().enumerate().map(|(i, c)| (c, i)).collect();
    codes.iter().map(|c| index[c]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    NoViews,
    TooFewSamples { n: usize },
    SampleCountMismatch { view: usize, expected: usize, found: usize },
    NonFinite { view: usize, row: usize, col: usize },
    LabelLength { expected: usize, found: usize },
    ConstantFeatures { view: usize, count: usize, first_row: usize },
    DimBelowK { view: usize, dim: usize, k: usize },
    DimBelowD { view: usize, dim: usize, d: usize },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::NoViews => write!(f, "dataset has no views"),
            Issue::TooFewSamples { n } => write!(f, "need at least 2 samples, found {n}"),
            Issue::SampleCountMismatch {
                view,
                expected,
                found,
            } => write!(
                f,
                "view {view} has {found} samples, expected {expected} (sample-count mismatch)"
            ),
            Issue::NonFinite { view, row, col } => {
                write!(f, "non-finite entry in view {view} at row {row}, column {col}")
            }
            Issue::LabelLength { expected, found } => {
                write!(f, "labels have length {found}, expected {expected}")
            }
            Issue::ConstantFeatures {
                view,
                count,
                first_row,
            } => write!(
                f,
                "view {view} has {count} zero-variance feature(s), first at row {first_row}"
            ),
            Issue::DimBelowK { view, dim, k } => {
                write!(f, "view {view} dimension {dim} is below cluster count k={k}")
            }
            Issue::DimBelowD { view, dim, d } => {
                write!(f, "view {view} dimension {dim} is below latent dimension d={d}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks shapes, finiteness, and feature variance. Warnings cover views whose
/// dimension is below the declared `k`.
pub fn validate_dataset(ds: &MultiviewDataset) -> ValidationReport {
    validate_inner(ds, ds.declared_k, None)
}

/// As [`validate_dataset`], also warning about views narrower than `cfg.d`.
pub fn validate_for_config(ds: &MultiviewDataset, cfg: &SolverConfig) -> ValidationReport {
    validate_inner(ds, Some(cfg.k), Some(cfg.d))
}

fn validate_inner(ds: &MultiviewDataset, k: Option<usize>, d: Option<usize>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let Some(first) = ds.views.first() else {
        report.errors.push(Issue::NoViews);
        return report;
    };
    let n = first.cols();
    if n < 2 {
        report.errors.push(Issue::TooFewSamples { n });
    }
    for (v, x) in ds.views.iter().enumerate() {
        if x.cols() != n {
            report.errors.push(Issue::SampleCountMismatch {
                view: v,
                expected: n,
                found: x.cols(),
            });
        }
        if let Some((row, col)) = x.first_non_finite() {
            report.errors.push(Issue::NonFinite { view: v, row, col });
        }
        let constant: Vec<usize> = (0..x.rows())
            .filter(|&r| {
                let row = x.row(r);
                row.iter().all(|&e| e == row[0])
            })
            .collect();
        if let Some(&first_row) = constant.first() {
            report.warnings.push(Issue::ConstantFeatures {
                view: v,
                count: constant.len(),
                first_row,
            });
        }
        if let Some(k) = k {
            if x.rows() < k {
                report.warnings.push(Issue::DimBelowK {
                    view: v,
                    dim: x.rows(),
                    k,
                });
            }
        }
        if let Some(d) = d {
            if x.rows() < d {
                report.warnings.push(Issue::DimBelowD {
                    view: v,
                    dim: x.rows(),
                    d,
                });
            }
        }
    }
    if let Some(labels) = &ds.labels {
        if labels.len() != n {
            report.errors.push(Issue::LabelLength {
                expected: n,
                found: labels.len(),
            });
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    KmeansConcat,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    UnitL2Sample,
    ZscoreFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Aimc,
    Nonmf,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Aimc => "aimc",
            Method::Nonmf => "nonmf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Latent dimension. Must be at least `k`.
    pub d: usize,
    pub k: usize,
    pub max_iters: usize,
    /// Relative change of the unsquared objective below which the run stops.
    pub tol: f64,
    pub seed: u64,
    pub init_mode: InitMode,
    /// Restarts of the k-means++ initializer; the lowest-inertia run wins.
    pub kmeans_restarts: usize,
    pub epsilon: f64,
    pub normalization: Normalization,
    pub repair_empty_clusters: bool,
    /// Run per-view and per-sample-block work on the rayon pool. Results are
    /// bit-identical either way.
    pub parallel: bool,
}

impl SolverConfig {
    pub fn new(k: usize, d: usize) -> Self {
        Self {
            d,
            k,
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
            init_mode: InitMode::KmeansConcat,
            kmeans_restarts: 10,
            epsilon: 1e-12,
            normalization: Normalization::None,
            repair_empty_clusters: true,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.d < self.k {
            return Err(Error::Config(format!(
                "latent dimension d={} must satisfy d >= k={}",
                self.d, self.k
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.kmeans_restarts < 1 {
            return Err(Error::Config("kmeans_restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// AIMC parameters: generators `G^(v)` (d_v×d), centroids `F` (d×k), a hard
/// assignment (one cluster id per sample), and view weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub generators: Vec<DenseMatrix>,
    pub centroids: DenseMatrix,
    pub assignment: Vec<usize>,
    pub weights: Vec<f64>,
    pub d: usize,
    pub k: usize,
}

impl ModelState {
    /// Checks orthogonality (tolerance `tol`), label range and weight positivity.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let mut problems = Vec::new();
        if self.centroids.shape() != (self.d, self.k) {
            problems.push(format!(
                "centroids are {:?}, expected ({}, {})",
                self.centroids.shape(),
                self.d,
                self.k
            ));
        } else {
            let defect = self.centroids.orthonormality_defect();
            if defect >= tol {
                problems.push(format!("||FᵀF - I|| = {defect:e}"));
            }
        }
        for (v, g) in self.generators.iter().enumerate() {
            if g.cols() != self.d {
                problems.push(format!("generator {v} has {} columns, expected {}", g.cols(), self.d));
            } else if g.rows() >= self.d {
                let defect = g.orthonormality_defect();
                if defect >= tol {
                    problems.push(format!("||G{v}ᵀG{v} - I|| = {defect:e}"));
                }
            }
        }
        if let Some(j) = self.assignment.iter().position(|&c| c >= self.k) {
            problems.push(format!("sample {j} assigned to cluster {} >= k", self.assignment[j]));
        }
        if self.weights.len() != self.generators.len() {
            problems.push("weights and generators differ in length".into());
        }
        if let Some(v) = self.weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            problems.push(format!("weight {v} = {} is not strictly positive", self.weights[v]));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Numeric(problems.join("; ")))
        }
    }

    /// `C^(v) = G^(v)·F` for every view.
    pub fn view_centroids(&self) -> Result<Vec<DenseMatrix>> {
        self.generators
            .iter()
            .map(|g| g.matmul(&self.centroids))
            .collect()
    }
}

/// NONMF parameters: one orthonormal centroid matrix `F^(v)` (d_v×k) per view
/// and a shared assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct NonmfState {
    pub centroids: Vec<DenseMatrix>,
    pub assignment: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Aimc(ModelState),
    Nonmf(NonmfState),
}

impl FittedModel {
    pub fn assignment(&self) -> &[usize] {
        match self {
            FittedModel::Aimc(s) => &s.assignment,
            FittedModel::Nonmf(s) => &s.assignment,
        }
    }

    /// View weights; NONMF has none and reports 1 for every view.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            FittedModel::Aimc(s) => s.weights.clone(),
            FittedModel::Nonmf(s) => vec![1.0; s.centroids.len()],
        }
    }

    pub fn k(&self) -> usize {
        match self {
            FittedModel::Aimc(s) => s.k,
            FittedModel::Nonmf(s) => s.k,
        }
    }
}

/// Objective values at one state.
///
/// For AIMC `unsquared = Σ_v r_v` and `weighted_squared = Σ_v α_v r_v²`; for
/// NONMF the weights are all one, so `weighted_squared = Σ_v r_v²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub unsquared: f64,
    pub weighted_squared: f64,
    /// Frobenius residual `r_v` of each view.
    pub per_view: Vec<f64>,
}

impl Objective {
    pub fn from_residuals(per_view: Vec<f64>, weights: &[f64]) -> Self {
        let unsquared = per_view.iter().sum();
        let weighted_squared = per_view.iter().zip(weights).map(|(r, a)| a * r * r).sum();
        Self {
            unsquared,
            weighted_squared,
            per_view,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub unsquared: f64,
    pub weighted_squared: f64,
}

/// Accumulated wall time per phase, in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub init: f64,
    pub generators: f64,
    pub centroids: f64,
    pub assignments: f64,
    /// Weight update, including the residual pass.
    pub weights: f64,
    pub total: f64,
}

/// Things that happened during a run that a caller may want to know about.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFlags {
    /// Views whose residual hit zero, so their weight was clamped by epsilon.
    pub zero_residual_views: Vec<usize>,
    /// Views narrower than `d`: their generator has orthonormal rows, not columns.
    pub rank_limited_views: Vec<usize>,
    /// Empty clusters refilled over the run.
    pub repaired_clusters: usize,
    /// Repairs skipped because they would have increased the objective.
    pub rejected_repairs: usize,
    /// Clusters left empty in the final assignment.
    pub empty_clusters: Vec<usize>,
    /// The initial assignment came from the random fallback because k-means
    /// could not produce k non-empty clusters.
    pub init_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub method: Method,
    pub config: SolverConfig,
    pub model: FittedModel,
    pub initial_objective: Objective,
    /// One entry per completed iteration, in order.
    pub trace: Vec<TraceEntry>,
    pub final_objective: Objective,
    pub converged: bool,
    pub iters_run: usize,
    pub timings: PhaseTimings,
    pub flags: RunFlags,
}

impl SolveResult {
    pub fn assignment(&self) -> &[usize] {
        self.model.assignment()
    }

    pub fn per_view_residuals(&self) -> &[f64] {
        &self.final_objective.per_view
    }
}

/// Returns a copy of `ds` with every view preprocessed according to `mode`.
///
/// `UnitL2Sample` scales each sample of each view to unit Euclidean norm
/// (all-zero samples stay zero). `ZscoreFeature` centers every feature and
/// divides by its population standard deviation; constant features become zero.
pub fn normalize(ds: &MultiviewDataset, mode: Normalization) -> MultiviewDataset {
    let mut out = ds.clone();
    match mode {
        Normalization::None => {}
        Normalization::UnitL2Sample => {
            for x in &mut out.views {
                let n = x.cols();
                let mut norms = vec![0.0; n];
                for r in 0..x.rows() {
                    for (acc, v) in norms.iter_mut().zip(x.row(r)) {
                        *acc += v * v;
                    }
                }
                let inv: Vec<f64> = norms
                    .iter()
                    .map(|s| if *s > 0.0 { 1.0 / s.sqrt() } else { 0.0 })
                    .collect();
                for r in 0..x.rows() {
                    for (v, s) in x.row_mut(r).iter_mut().zip(&inv) {
                        *v *= s;
                    }
                }
            }
        }
        Normalization::ZscoreFeature => {
            for x in &mut out.views {
                for r in 0..x.rows() {
                    zscore_in_place(x.row_mut(r));
                }
            }
        }
    }
    out
}

pub(crate) fn zscore_in_place(row: &mut [f64]) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    let scale = if sd > 0.0 { 1.0 / sd } else { 0.0 };
    for v in row.iter_mut() {
        *v = (*v - mean) * scale;
    }
}
