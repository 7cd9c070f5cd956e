//! Dataset, matrix and result files, plus the planted-data generator.

pub mod manifest;
pub mod matrix;
pub mod result;
pub mod synthetic;

pub use manifest::{load_dataset, write_dataset, Manifest, ViewEntry};
pub use matrix::{load_labels, load_matrix, write_labels, write_matrix, MatrixFormat};
pub use result::{write_result, DatasetSummary, RepeatSummary, ResultDocument, SweepPoint, SweepSummary, Timing};
pub use synthetic::{gen_synthetic, SyntheticSpec};
