//! NONMF baseline: `min Σ_v ‖X^(v) − F^(v) Y‖_F²` with column-orthonormal
//! per-view centroids `F^(v)` and one shared hard assignment. No latent space
//! and no view weights.
//!
//! Solved by alternating `F^(v) ← Procrustes(X^(v) Yᵀ)` with a nearest-centroid
//! assignment summed over views. Both steps are exact minimizers of their
//! block, so the squared objective is non-increasing.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aimc::{check_feasible, has_converged, initial_assignment};
use crate::error::{Error, Result};
use crate::kernels::{self, map_maybe_par, AssignmentStep, Scores};
use crate::linalg::procrustes_max_trace;
use crate::model::{
    normalize, FittedModel, Method, MultiviewDataset, NonmfState, Objective, PhaseTimings,
    RunFlags, SolveResult, SolverConfig, TraceEntry,
};

pub fn update_centroids(state: &mut NonmfState, ds: &MultiviewDataset, parallel: bool) -> Result<()> {
    let updated = map_maybe_par(parallel, ds.n_views(), |v| {
        procrustes_max_trace(&kernels::cluster_sums(&ds.views[v], &state.assignment, state.k))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    state.centroids = updated;
    Ok(())
}

pub fn update_assignments(
    state: &mut NonmfState,
    ds: &MultiviewDataset,
    repair_empty: bool,
    parallel: bool,
) -> AssignmentStep {
    let ones = vec![1.0; ds.n_views()];
    let scores = Scores::compute(&ds.views, &state.centroids, &ones, parallel);
    kernels::assign_and_repair(&scores, &mut state.assignment, repair_empty)
}

pub fn objective(state: &NonmfState, ds: &MultiviewDataset, parallel: bool) -> Objective {
    let r = kernels::view_residuals(&ds.views, &state.centroids, &state.assignment, parallel);
    Objective::from_residuals(r, &vec![1.0; ds.n_views()])
}

pub fn init_state(ds: &MultiviewDataset, cfg: &SolverConfig) -> Result<(NonmfState, bool)> {
    check_feasible(ds, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (assignment, fallback) = initial_assignment(ds, cfg, &mut rng);
    let mut state = NonmfState {
        centroids: Vec::new(),
        assignment,
        k: cfg.k,
    };
    update_centroids(&mut state, ds, cfg.parallel)?;
    Ok((state, fallback))
}

/// Alternates centroid and assignment updates. Convergence is tested on the
/// relative change of the squared objective, the quantity this method
/// minimizes. `cfg.d` is not used.
pub fn nonmf_solve(ds: &MultiviewDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    let start = Instant::now();
    cfg.validate()?;
    let data = normalize(ds, cfg.normalization);
    let par = cfg.parallel;
    let (mut state, init_fallback) = init_state(&data, cfg)?;
    let initial = objective(&state, &data, par);
    let mut timings = PhaseTimings {
        init: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    let mut flags = RunFlags {
        init_fallback,
        ..Default::default()
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev = initial.weighted_squared;
    let mut last = initial.clone();
    let mut iter = 0;
    while iter < cfg.max_iters {
        let t = Instant::now();
        let step = update_assignments(&mut state, &data, cfg.repair_empty_clusters, par);
        flags.repaired_clusters += step.repaired;
        flags.rejected_repairs += step.rejected;
        timings.assignments += t.elapsed().as_secs_f64();

        let t = Instant::now();
        update_centroids(&mut state, &data, par)?;
        timings.centroids += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let obj = objective(&state, &data, par);
        timings.weights += t.elapsed().as_secs_f64();
        iter += 1;
        if !obj.weighted_squared.is_finite() {
            return Err(Error::Numeric(format!(
                "objective became non-finite at iteration {iter}"
            )));
        }
        trace.push(TraceEntry {
            iter,
            unsquared: obj.unsquared,
            weighted_squared: obj.weighted_squared,
        });
        let done = has_converged(prev, obj.weighted_squared, cfg.tol, cfg.epsilon);
        prev = obj.weighted_squared;
        last = obj;
        if done {
            converged = true;
            break;
        }
    }
    timings.total = start.elapsed().as_secs_f64();
    let sizes = kernels::cluster_sizes(&state.assignment, state.k);
    flags.empty_clusters = (0..state.k).filter(|&i| sizes[i] == 0).collect();
    Ok(SolveResult {
        method: Method::Nonmf,
        config: cfg.clone(),
        model: FittedModel::Nonmf(state),
        initial_objective: initial,
        trace,
        final_objective: last,
        converged,
        iters_run: iter,
        timings,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_orthonormal, DenseMatrix};

    #[test]
    fn single_view_matches_direct_nearest_centroid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DenseMatrix::random_normal(6, 30, &mut rng);
        let ds = MultiviewDataset::new("one", vec![x.clone()], None, None, None).unwrap();
        let mut state = NonmfState {
            centroids: vec![random_orthonormal(6, 3, &mut rng).unwrap()],
            assignment: vec![0; 30],
            k: 3,
        };
        update_assignments(&mut state, &ds, false, false);
        for j in 0..30 {
            let dist = |i: usize| {
                (0..6)
                    .map(|r| (x[(r, j)] - state.centroids[0][(r, i)]).powi(2))
                    .sum::<f64>()
            };
            let best = (0..3)
                .min_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap())
                .unwrap();
            assert_eq!(state.assignment[j], best, "sample {j}");
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let views = vec![
            DenseMatrix::random_normal(8, 120, &mut rng),
            DenseMatrix::random_normal(5, 120, &mut rng),
        ];
        let ds = MultiviewDataset::new("r", views, None, None, None).unwrap();
        let res = nonmf_solve(&ds, &SolverConfig::new(4, 4)).unwrap();
        let mut prev = res.initial_objective.weighted_squared;
        for e in &res.trace {
            assert!(e.weighted_squared <= prev + 1e-9, "{e:?}");
            prev = e.weighted_squared;
        }
        assert!(matches!(res.model, FittedModel::Nonmf(_)));
    }
}
