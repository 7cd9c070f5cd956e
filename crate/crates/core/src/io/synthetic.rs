//! Planted-model generator: `X^(v) = G*^(v) F* Y* + noise` with known truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_orthonormal, DenseMatrix};
use crate::model::{ModelState, MultiviewDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub d: usize,
    pub view_dims: Vec<usize>,
    pub noise_sigma: f64,
    /// Cluster proportions; uniform when absent.
    #[serde(default)]
    pub cluster_weights: Option<Vec<f64>>,
    /// Per-view noise levels replacing `noise_sigma`.
    #[serde(default)]
    pub bad_view_sigma: Option<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, k: usize, d: usize, view_dims: Vec<usize>, noise_sigma: f64, seed: u64) -> Self {
        Self {
            n,
            m: view_dims.len(),
            k,
            d,
            view_dims,
            noise_sigma,
            cluster_weights: None,
            bad_view_sigma: None,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Infeasible(msg));
        if self.k < 1 || self.d < self.k {
            return bad(format!("need 1 <= k <= d, got k={} d={}", self.k, self.d));
        }
        if self.m < 1 || self.view_dims.len() != self.m {
            return bad(format!(
                "m={} but {} view dims given",
                self.m,
                self.view_dims.len()
            ));
        }
        if self.view_dims.contains(&0) {
            return bad("view dimensions must be at least 1".into());
        }
        if self.n < self.k.max(2) {
            return bad(format!("n={} is below max(k, 2)", self.n));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if let Some(w) = &self.cluster_weights {
            if w.len() != self.k || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return bad("cluster_weights must be k non-negative values with positive sum".into());
            }
        }
        if let Some(s) = &self.bad_view_sigma {
            if s.len() != self.m || s.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return bad("bad_view_sigma must hold m finite non-negative values".into());
            }
        }
        Ok(())
    }
}

/// Cluster sizes by largest remainder so that they sum to `n`.
fn quotas(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Draws a planted dataset and returns it with the generating state.
///
/// Generators are `d_v × d`; when `d_v < d` they have orthonormal rows rather
/// than columns. Labels follow the cluster proportions exactly (largest
/// remainder), in shuffled order. The planted state carries uniform weights.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(MultiviewDataset, ModelState)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centroids = random_orthonormal(spec.d, spec.k, &mut rng)?;
    let mut generators = Vec::with_capacity(spec.m);
    for &dv in &spec.view_dims {
        let g = if dv >= spec.d {
            random_orthonormal(dv, spec.d, &mut rng)?
        } else {
            random_orthonormal(spec.d, dv, &mut rng)?.transpose()
        };
        generators.push(g);
    }
    let weights = spec
        .cluster_weights
        .clone()
        .unwrap_or_else(|| vec![1.0; spec.k]);
    let mut labels: Vec<usize> = quotas(spec.n, &weights)
        .into_iter()
        .enumerate()
        .flat_map(|(c, s)| std::iter::repeat_n(c, s))
        .collect();
    labels.shuffle(&mut rng);

    let mut views = Vec::with_capacity(spec.m);
    for (v, g) in generators.iter().enumerate() {
        let sigma = spec
            .bad_view_sigma
            .as_ref()
            .map_or(spec.noise_sigma, |s| s[v]);
        let c = g.matmul(&centroids)?;
        let mut x = DenseMatrix::zeros(g.rows(), spec.n);
        for r in 0..g.rows() {
            let crow = c.row(r);
            for (xv, &l) in x.row_mut(r).iter_mut().zip(&labels) {
                *xv = crow[l];
            }
        }
        if sigma > 0.0 {
            for xv in x.as_mut_slice() {
                *xv += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        views.push(x);
    }
    let ds = MultiviewDataset::new(
        format!("planted-n{}-m{}-k{}-d{}-s{}", spec.n, spec.m, spec.k, spec.d, spec.seed),
        views,
        None,
        Some(labels.iter().map(|&l| l as i64).collect()),
        Some(spec.k),
    )?;
    let state = ModelState {
        generators,
        centroids,
        assignment: labels,
        weights: vec![1.0 / spec.m as f64; spec.m],
        d: spec.d,
        k: spec.k,
    };
    Ok((ds, state))
}
