use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{load_labels, load_matrix, MatrixFormat};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{validate_dataset, MultiviewDataset};

/// JSON dataset description. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub views: Vec<ViewEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub name: String,
    pub path: String,
    pub dim: usize,
    #[serde(default)]
    pub format: MatrixFormat,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::parse(
                path,
                format!("line {}, column {}: {e}", e.line(), e.column()),
            )
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads every view and the optional labels named by the manifest and runs
/// dataset validation. All problems found are reported together.
pub fn load_dataset(manifest_path: &Path) -> Result<MultiviewDataset> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let loaded: Vec<Result<DenseMatrix>> = manifest
        .views
        .par_iter()
        .map(|v| load_matrix(&resolve(base, &v.path), v.format))
        .collect();

    let mut problems = Vec::new();
    let mut views = Vec::with_capacity(loaded.len());
    for (entry, m) in manifest.views.iter().zip(loaded) {
        match m {
            Ok(m) => {
                if m.rows() != entry.dim {
                    problems.push(format!(
                        "view {:?}: declared dim {} but file has {} features",
                        entry.name,
                        entry.dim,
                        m.rows()
                    ));
                }
                if m.cols() != manifest.n {
                    problems.push(format!(
                        "view {:?}: declared n {} but file has {} samples",
                        entry.name,
                        manifest.n,
                        m.cols()
                    ));
                }
                views.push(m);
            }
            Err(e) => problems.push(format!("view {:?}: {e}", entry.name)),
        }
    }
    if manifest.views.is_empty() {
        problems.push("manifest lists no views".into());
    }
    let labels = match &manifest.labels_path {
        Some(p) => match load_labels(&resolve(base, p)) {
            Ok(l) => {
                if l.len() != manifest.n {
                    problems.push(format!(
                        "labels: {} entries, declared n {}",
                        l.len(),
                        manifest.n
                    ));
                }
                Some(l)
            }
            Err(e) => {
                problems.push(format!("labels: {e}"));
                None
            }
        },
        None => None,
    };
    if !problems.is_empty() {
        return Err(Error::InvalidDataset(problems));
    }
    let ds = MultiviewDataset {
        name: manifest.name.clone(),
        view_names: manifest.views.iter().map(|v| v.name.clone()).collect(),
        views,
        labels,
        declared_k: manifest.k,
    };
    let report = validate_dataset(&ds);
    for w in &report.warnings {
        log::warn!("{}: {w}", ds.name);
    }
    if !report.is_valid() {
        return Err(Error::InvalidDataset(
            report.errors.iter().map(ToString::to_string).collect(),
        ));
    }
    Ok(ds)
}

/// Writes the views, labels and a manifest into `dir`.
pub fn write_dataset(ds: &MultiviewDataset, dir: &Path, format: MatrixFormat) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut views = Vec::with_capacity(ds.n_views());
    for (v, x) in ds.views.iter().enumerate() {
        let name = ds
            .view_names
            .get(v)
            .cloned()
            .unwrap_or_else(|| format!("view{v}"));
        let file = format!("{name}.{}", format.extension());
        super::matrix::write_matrix(&dir.join(&file), x, format)?;
        views.push(ViewEntry {
            name,
            path: file,
            dim: x.rows(),
            format,
        });
    }
    let labels_path = match &ds.labels {
        Some(l) => {
            super::matrix::write_labels(&dir.join("labels.txt"), l)?;
            Some("labels.txt".to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        name: ds.name.clone(),
        n: ds.n_samples(),
        k: ds.declared_k,
        views,
        labels_path,
    };
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}
