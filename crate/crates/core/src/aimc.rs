//! Adaptively-weighted integral-space solver.
//!
//! Minimizes `Σ_v ‖X^(v) − G^(v) F Y‖_F` over column-orthonormal generators
//! `G^(v)`, a column-orthonormal centroid matrix `F` and a hard assignment `Y`,
//! by alternating over the reweighted squared problem
//! `Σ_v α_v ‖X^(v) − G^(v) F Y‖_F²` with `α_v = 1 / (2 r_v)`.
//!
//! Each pass updates, in order: every `G^(v)` (orthogonal Procrustes on
//! `X^(v) Yᵀ Fᵀ`), `F` (Procrustes on `Σ_v α_v G^(v)ᵀ X^(v) Yᵀ`), `Y`
//! (nearest weighted centroid per sample), then `α`. The first three steps
//! never increase the weighted objective for fixed `α`, and the reweighting
//! majorizes the unsquared objective, so the unsquared objective is
//! non-increasing from one pass to the next.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::init;
use crate::kernels::{self, map_maybe_par, AssignmentStep, Scores};
use crate::linalg::{procrustes_max_trace, thin_svd, DenseMatrix};
use crate::model::{
    normalize, validate_for_config, FittedModel, InitMode, Issue, Method, ModelState,
    MultiviewDataset, Objective, PhaseTimings, RunFlags, SolveResult, SolverConfig, TraceEntry,
};

/// Initial assignment shared by both solvers.
pub(crate) fn initial_assignment(
    ds: &MultiviewDataset,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, bool) {
    let n = ds.n_samples();
    match cfg.init_mode {
        InitMode::Random => (init::balanced_random(n, cfg.k, rng), false),
        InitMode::KmeansConcat => {
            let (data, h) = init::concat_zscored(ds);
            let fit = init::kmeans_best_of(&data, h, cfg.k, cfg.kmeans_restarts, rng);
            if fit.occupied < cfg.k {
                log::warn!(
                    "k-means initialization found only {} of {} clusters; using a balanced random labeling",
                    fit.occupied,
                    cfg.k
                );
                (init::balanced_random(n, cfg.k, rng), true)
            } else {
                (fit.labels, false)
            }
        }
    }
}

pub(crate) fn check_feasible(ds: &MultiviewDataset, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    let report = validate_for_config(ds, cfg);
    if !report.is_valid() {
        return Err(Error::InvalidDataset(
            report.errors.iter().map(ToString::to_string).collect(),
        ));
    }
    if cfg.k > ds.n_samples() {
        return Err(Error::Infeasible(format!(
            "k={} exceeds the number of samples n={}",
            cfg.k,
            ds.n_samples()
        )));
    }
    Ok(())
}

/// Top-`d` left singular vectors of `x`, zero-padded when `d_v < d`.
fn leading_subspace(x: &DenseMatrix, d: usize) -> Result<DenseMatrix> {
    let gram = x.matmul_t(x)?;
    let svd = thin_svd(&gram)?;
    let keep = d.min(x.rows());
    Ok(DenseMatrix::from_fn(x.rows(), d, |r, c| {
        if c < keep {
            svd.u[(r, c)]
        } else {
            0.0
        }
    }))
}

/// Builds the starting state: uniform weights `1/m`, generators from each
/// view's leading singular subspace, the initial assignment, and `F` from one
/// centroid update. Deterministic in `cfg.seed`.
pub fn init_state(ds: &MultiviewDataset, cfg: &SolverConfig) -> Result<ModelState> {
    Ok(init_state_flagged(ds, cfg)?.0)
}

fn init_state_flagged(ds: &MultiviewDataset, cfg: &SolverConfig) -> Result<(ModelState, bool)> {
    check_feasible(ds, cfg)?;
    let m = ds.n_views();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (assignment, fallback) = initial_assignment(ds, cfg, &mut rng);
    let generators = map_maybe_par(cfg.parallel, m, |v| leading_subspace(&ds.views[v], cfg.d))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut state = ModelState {
        generators,
        centroids: DenseMatrix::zeros(cfg.d, cfg.k),
        assignment,
        weights: vec![1.0 / m as f64; m],
        d: cfg.d,
        k: cfg.k,
    };
    update_centroids(&mut state, ds, cfg.parallel)?;
    Ok((state, fallback))
}

/// `H^(v) = X^(v) Yᵀ Fᵀ` for one view.
pub fn generator_target(state: &ModelState, x: &DenseMatrix) -> Result<DenseMatrix> {
    kernels::cluster_sums(x, &state.assignment, state.k).matmul_t(&state.centroids)
}

/// `J = Σ_v α_v G^(v)ᵀ X^(v) Yᵀ`, accumulated in view order.
pub fn centroid_target(state: &ModelState, ds: &MultiviewDataset, parallel: bool) -> Result<DenseMatrix> {
    let parts = map_maybe_par(parallel, ds.n_views(), |v| {
        let sums = kernels::cluster_sums(&ds.views[v], &state.assignment, state.k);
        state.generators[v].t_matmul(&sums)
    });
    let mut j = DenseMatrix::zeros(state.d, state.k);
    for (part, &a) in parts.into_iter().zip(&state.weights) {
        j.add_scaled(a, &part?)?;
    }
    Ok(j)
}

/// Replaces every `G^(v)` with the Procrustes maximizer of `Tr(Gᵀ H^(v))`.
pub fn update_generators(state: &mut ModelState, ds: &MultiviewDataset, parallel: bool) -> Result<()> {
    let snapshot = &*state;
    let updated = map_maybe_par(parallel, ds.n_views(), |v| {
        procrustes_max_trace(&generator_target(snapshot, &ds.views[v])?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    state.generators = updated;
    Ok(())
}

/// Replaces `F` with the Procrustes maximizer of `Tr(Fᵀ J)`.
pub fn update_centroids(state: &mut ModelState, ds: &MultiviewDataset, parallel: bool) -> Result<()> {
    let j = centroid_target(state, ds, parallel)?;
    state.centroids = procrustes_max_trace(&j)?;
    Ok(())
}

/// Assigns every sample to the cluster minimizing
/// `Σ_v α_v ‖x_j^(v) − (G^(v) F)_{:,i}‖²`, then optionally refills empty clusters.
pub fn update_assignments(
    state: &mut ModelState,
    ds: &MultiviewDataset,
    repair_empty: bool,
    parallel: bool,
) -> Result<AssignmentStep> {
    let centroids = state.view_centroids()?;
    let scores = Scores::compute(&ds.views, &centroids, &state.weights, parallel);
    Ok(kernels::assign_and_repair(
        &scores,
        &mut state.assignment,
        repair_empty,
    ))
}

/// Sets `α_v = 1 / (2·max(r_v, ε))` and returns the objective at the new
/// weights together with the views whose residual fell below `ε`.
pub fn update_weights(
    state: &mut ModelState,
    ds: &MultiviewDataset,
    epsilon: f64,
    parallel: bool,
) -> Result<(Objective, Vec<usize>)> {
    let residuals = residuals(state, ds, parallel)?;
    let mut clamped = Vec::new();
    for (v, (a, r)) in state.weights.iter_mut().zip(&residuals).enumerate() {
        if *r < epsilon {
            clamped.push(v);
        }
        *a = weight_for_residual(*r, epsilon);
    }
    Ok((Objective::from_residuals(residuals, &state.weights), clamped))
}

#[inline]
pub fn weight_for_residual(r: f64, epsilon: f64) -> f64 {
    1.0 / (2.0 * r.max(epsilon))
}

fn residuals(state: &ModelState, ds: &MultiviewDataset, parallel: bool) -> Result<Vec<f64>> {
    if state.generators.len() != ds.n_views() || state.assignment.len() != ds.n_samples() {
        return Err(Error::Dimension(format!(
            "state has {} generators and {} labels; dataset has {} views and {} samples",
            state.generators.len(),
            state.assignment.len(),
            ds.n_views(),
            ds.n_samples()
        )));
    }
    for (v, (g, x)) in state.generators.iter().zip(&ds.views).enumerate() {
        if g.rows() != x.rows() {
            return Err(Error::Dimension(format!(
                "generator {v} has {} rows, view has {}",
                g.rows(),
                x.rows()
            )));
        }
    }
    let centroids = state.view_centroids()?;
    Ok(kernels::view_residuals(
        &ds.views,
        &centroids,
        &state.assignment,
        parallel,
    ))
}

/// Unsquared and weighted squared objective at `state`, with the per-view residuals.
pub fn objective(state: &ModelState, ds: &MultiviewDataset) -> Result<Objective> {
    objective_par(state, ds, true)
}

pub(crate) fn objective_par(state: &ModelState, ds: &MultiviewDataset, parallel: bool) -> Result<Objective> {
    let r = residuals(state, ds, parallel)?;
    Ok(Objective::from_residuals(r, &state.weights))
}

/// Relative change test shared by both solvers.
pub(crate) fn has_converged(prev: f64, cur: f64, tol: f64, epsilon: f64) -> bool {
    (prev - cur).abs() / prev.max(epsilon) < tol
}

/// Stateful driver; [`solve`] is the usual entry point. Exposed so callers
/// (the scaling benchmark) can time individual passes.
pub struct AimcSolver {
    data: MultiviewDataset,
    cfg: SolverConfig,
    state: ModelState,
    flags: RunFlags,
    timings: PhaseTimings,
    iter: usize,
    last: Objective,
    initial: Objective,
}

impl AimcSolver {
    /// Normalizes `ds` as configured and initializes the state.
    pub fn new(ds: &MultiviewDataset, cfg: &SolverConfig) -> Result<Self> {
        let start = Instant::now();
        cfg.validate()?;
        let data = normalize(ds, cfg.normalization);
        let report = validate_for_config(&data, cfg);
        for w in &report.warnings {
            if matches!(w, Issue::DimBelowD { .. }) {
                log::warn!("{w}; its generator will have orthonormal rows instead of columns");
            }
        }
        let (state, init_fallback) = init_state_flagged(&data, cfg)?;
        let initial = objective_par(&state, &data, cfg.parallel)?;
        let flags = RunFlags {
            rank_limited_views: data
                .view_dims()
                .iter()
                .enumerate()
                .filter(|(_, &dv)| dv < cfg.d)
                .map(|(v, _)| v)
                .collect(),
            init_fallback,
            ..Default::default()
        };
        let timings = PhaseTimings {
            init: start.elapsed().as_secs_f64(),
            ..Default::default()
        };
        Ok(Self {
            data,
            cfg: cfg.clone(),
            state,
            flags,
            timings,
            iter: 0,
            last: initial.clone(),
            initial,
        })
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn data(&self) -> &MultiviewDataset {
        &self.data
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    /// One full pass (G, F, Y, α). Returns the objective after the pass.
    pub fn step(&mut self) -> Result<Objective> {
        let par = self.cfg.parallel;
        let t = Instant::now();
        update_generators(&mut self.state, &self.data, par)?;
        self.timings.generators += t.elapsed().as_secs_f64();

        let t = Instant::now();
        update_centroids(&mut self.state, &self.data, par)?;
        self.timings.centroids += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let step = update_assignments(
            &mut self.state,
            &self.data,
            self.cfg.repair_empty_clusters,
            par,
        )?;
        self.flags.repaired_clusters += step.repaired;
        self.flags.rejected_repairs += step.rejected;
        self.timings.assignments += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let (obj, clamped) = update_weights(&mut self.state, &self.data, self.cfg.epsilon, par)?;
        for v in clamped {
            if !self.flags.zero_residual_views.contains(&v) {
                self.flags.zero_residual_views.push(v);
            }
        }
        self.timings.weights += t.elapsed().as_secs_f64();

        self.iter += 1;
        if !obj.unsquared.is_finite() || !obj.weighted_squared.is_finite() {
            return Err(Error::Numeric(format!(
                "objective became non-finite at iteration {}",
                self.iter
            )));
        }
        self.last = obj.clone();
        Ok(obj)
    }

    /// Iterates until the relative change of the unsquared objective drops
    /// below `tol` or `max_iters` passes have run.
    pub fn run(mut self) -> Result<SolveResult> {
        let start = Instant::now();
        let mut trace = Vec::new();
        let mut converged = false;
        let mut prev = self.initial.unsquared;
        while self.iter < self.cfg.max_iters {
            let obj = self.step()?;
            trace.push(TraceEntry {
                iter: self.iter,
                unsquared: obj.unsquared,
                weighted_squared: obj.weighted_squared,
            });
            if has_converged(prev, obj.unsquared, self.cfg.tol, self.cfg.epsilon) {
                converged = true;
                break;
            }
            prev = obj.unsquared;
        }
        self.timings.total = self.timings.init + start.elapsed().as_secs_f64();
        Ok(self.finish(trace, converged))
    }

    fn finish(mut self, trace: Vec<TraceEntry>, converged: bool) -> SolveResult {
        let sizes = kernels::cluster_sizes(&self.state.assignment, self.state.k);
        self.flags.empty_clusters = (0..self.state.k).filter(|&i| sizes[i] == 0).collect();
        SolveResult {
            method: Method::Aimc,
            config: self.cfg,
            model: FittedModel::Aimc(self.state),
            initial_objective: self.initial,
            final_objective: self.last,
            trace,
            converged,
            iters_run: self.iter,
            timings: self.timings,
            flags: self.flags,
        }
    }
}

/// Runs the full alternating minimization on `ds`.
pub fn solve(ds: &MultiviewDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    AimcSolver::new(ds, cfg)?.run()
}
