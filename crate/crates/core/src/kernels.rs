//! Label-indexed kernels shared by both solvers. The assignment is always a
//! label vector; products with the indicator matrix are scatters and gathers.

use rayon::prelude::*;

use crate::linalg::DenseMatrix;

/// Samples per block in the streamed kernels. Fixed so that the floating-point
/// summation order does not depend on the thread count.
pub(crate) const BLOCK: usize = 512;

pub(crate) fn map_maybe_par<T, F>(parallel: bool, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

fn blocks(n: usize) -> usize {
    n.div_ceil(BLOCK)
}

/// `X · Yᵀ`: column `i` is the sum of the samples assigned to cluster `i`.
pub fn cluster_sums(x: &DenseMatrix, assignment: &[usize], k: usize) -> DenseMatrix {
    debug_assert_eq!(x.cols(), assignment.len());
    let mut out = DenseMatrix::zeros(x.rows(), k);
    for r in 0..x.rows() {
        let src = x.row(r);
        let dst = out.row_mut(r);
        for (v, &c) in src.iter().zip(assignment) {
            dst[c] += v;
        }
    }
    out
}

pub fn cluster_sizes(assignment: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &c in assignment {
        sizes[c] += 1;
    }
    sizes
}

/// Per-sample weighted squared norms `Σ_v α_v ‖x_j^(v)‖²`.
pub fn weighted_sample_norms(views: &[DenseMatrix], weights: &[f64]) -> Vec<f64> {
    let n = views.first().map_or(0, DenseMatrix::cols);
    let mut out = vec![0.0; n];
    for (x, &a) in views.iter().zip(weights) {
        for r in 0..x.rows() {
            for (o, v) in out.iter_mut().zip(x.row(r)) {
                *o += a * v * v;
            }
        }
    }
    out
}

/// Weighted scores for every (sample, cluster) pair.
pub struct Scores {
    pub k: usize,
    /// `cost[j*k + i] = Σ_v α_v ‖x_j^(v) − c_i^(v)‖²`, evaluated as
    /// `‖x_j‖²_α + t_i − 2·S_ji`.
    pub cost: Vec<f64>,
}

impl Scores {
    /// Builds `S = Σ_v α_v X^(v)ᵀ C^(v)` block by block and turns it into costs.
    pub fn compute(
        views: &[DenseMatrix],
        centroids: &[DenseMatrix],
        weights: &[f64],
        parallel: bool,
    ) -> Self {
        let n = views.first().map_or(0, DenseMatrix::cols);
        let k = centroids.first().map_or(0, DenseMatrix::cols);
        let mut t = vec![0.0; k];
        for (c, &a) in centroids.iter().zip(weights) {
            for r in 0..c.rows() {
                for (ti, v) in t.iter_mut().zip(c.row(r)) {
                    *ti += a * v * v;
                }
            }
        }
        let norms = weighted_sample_norms(views, weights);
        let chunks = map_maybe_par(parallel, blocks(n), |b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            let mut s = vec![0.0; (hi - lo) * k];
            for ((x, c), &a) in views.iter().zip(centroids).zip(weights) {
                for r in 0..x.rows() {
                    let xr = &x.row(r)[lo..hi];
                    let cr = c.row(r);
                    for (jj, &xv) in xr.iter().enumerate() {
                        let ax = a * xv;
                        if ax == 0.0 {
                            continue;
                        }
                        let srow = &mut s[jj * k..(jj + 1) * k];
                        for (si, cv) in srow.iter_mut().zip(cr) {
                            *si += ax * cv;
                        }
                    }
                }
            }
            for (jj, row) in s.chunks_mut(k).enumerate() {
                let xn = norms[lo + jj];
                for (si, ti) in row.iter_mut().zip(&t) {
                    *si = xn + ti - 2.0 * *si;
                }
            }
            s
        });
        Self {
            k,
            cost: chunks.concat(),
        }
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.cost[j * self.k..(j + 1) * self.k]
    }

    /// Argmin per sample; ties go to the smallest cluster index.
    pub fn argmin(&self) -> Vec<usize> {
        self.cost
            .chunks(self.k)
            .map(|row| {
                let mut best = 0;
                for (i, &c) in row.iter().enumerate().skip(1) {
                    if c < row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// Total cost of a labeling.
    pub fn total(&self, assignment: &[usize]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .map(|(j, &c)| self.cost[j * self.k + c])
            .sum()
    }
}

/// Outcome of one assignment step.
#[derive(Debug, Clone, Default)]
pub struct AssignmentStep {
    /// Weighted objective (by the score expansion) with the previous labels.
    pub cost_before: f64,
    /// After the argmin, before any repair.
    pub cost_argmin: f64,
    /// After repair.
    pub cost_after: f64,
    pub repaired: usize,
    pub rejected: usize,
}

/// Nearest-centroid step with budgeted empty-cluster repair.
///
/// For each empty cluster (ascending index) the sample with the largest cost
/// to its own centroid, among those whose cluster would not become empty, is
/// moved there. A move is only accepted while the total cost stays at or
/// below `cost_before`, i.e. the repair may spend what the argmin gained but
/// never more.
pub fn assign_and_repair(
    scores: &Scores,
    assignment: &mut Vec<usize>,
    repair: bool,
) -> AssignmentStep {
    let k = scores.k;
    let cost_before = scores.total(assignment);
    let mut labels = scores.argmin();
    let cost_argmin = scores.total(&labels);
    let mut step = AssignmentStep {
        cost_before,
        cost_argmin,
        cost_after: cost_argmin,
        ..Default::default()
    };
    if repair {
        let mut sizes = cluster_sizes(&labels, k);
        let mut budget = (cost_before - cost_argmin).max(0.0);
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let mut worst: Option<(usize, f64)> = None;
            for (j, &c) in labels.iter().enumerate() {
                if sizes[c] < 2 {
                    continue;
                }
                let own = scores.row(j)[c];
                if worst.is_none_or(|(_, w)| own > w) {
                    worst = Some((j, own));
                }
            }
            let Some((j, own)) = worst else {
                step.rejected += 1;
                continue;
            };
            let increase = scores.row(j)[empty] - own;
            if increase <= budget {
                budget -= increase.max(0.0);
                sizes[labels[j]] -= 1;
                sizes[empty] += 1;
                labels[j] = empty;
                step.cost_after += increase;
                step.repaired += 1;
            } else {
                step.rejected += 1;
            }
        }
    }
    *assignment = labels;
    step
}

/// Frobenius residual `‖X^(v) − C^(v)·Y‖_F` of every view, streamed by sample
/// blocks so the reconstruction is never materialized.
pub fn view_residuals(
    views: &[DenseMatrix],
    centroids: &[DenseMatrix],
    assignment: &[usize],
    parallel: bool,
) -> Vec<f64> {
    let n = assignment.len();
    let nb = blocks(n);
    let m = views.len();
    let partial = map_maybe_par(parallel, m * nb, |task| {
        let (v, b) = (task / nb, task % nb);
        let (x, c) = (&views[v], &centroids[v]);
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let labels = &assignment[lo..hi];
        let mut acc = 0.0;
        for r in 0..x.rows() {
            let xr = &x.row(r)[lo..hi];
            let cr = c.row(r);
            for (xv, &l) in xr.iter().zip(labels) {
                let e = xv - cr[l];
                acc += e * e;
            }
        }
        acc
    });
    partial
        .chunks(nb.max(1))
        .map(|p| p.iter().sum::<f64>().sqrt())
        .collect()
}
