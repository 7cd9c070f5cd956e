//! Multiview clustering in a shared latent space with adaptive view weights.
//!
//! Each view `X^(v)` (d_v × n) is modeled as `G^(v) F Y`: a column-orthonormal
//! generator into a common `d`-dimensional space, orthonormal centroids `F`
//! (d × k), and a one-hot assignment `Y`. Views are weighted by
//! `α_v = 1 / (2 r_v)` where `r_v` is the view's Frobenius residual.
//!
//! ```
//! use aimc::io::{gen_synthetic, SyntheticSpec};
//! use aimc::{aimc::solve, metrics, SolverConfig};
//!
//! let (ds, truth) = gen_synthetic(&SyntheticSpec::new(200, 4, 6, vec![20, 12], 0.01, 7)).unwrap();
//! let res = solve(&ds, &SolverConfig::new(4, 6)).unwrap();
//! assert!(metrics::accuracy(res.assignment(), &truth.assignment).unwrap() > 0.99);
//! ```

pub mod aimc;
pub mod bench;
pub mod cli;
pub mod error;
pub mod init;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nonmf;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use model::{
    FittedModel, InitMode, Method, ModelState, MultiviewDataset, Normalization, Objective,
    SolveResult, SolverConfig,
};

/// Runs the solver selected by `method`.
pub fn fit(ds: &MultiviewDataset, cfg: &SolverConfig, method: Method) -> Result<SolveResult> {
    match method {
        Method::Aimc => aimc::solve(ds, cfg),
        Method::Nonmf => nonmf::nonmf_solve(ds, cfg),
    }
}
