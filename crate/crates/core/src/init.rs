//! Initial assignments: seeded k-means++ on the concatenated, feature-wise
//! standardized views, or a balanced random labeling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::linalg::dot;
use crate::model::{zscore_in_place, MultiviewDataset};

const LLOYD_MAX_ITERS: usize = 100;

/// Samples as rows: `n × h` with every feature standardized.
pub fn concat_zscored(ds: &MultiviewDataset) -> (Vec<f64>, usize) {
    let n = ds.n_samples();
    let h = ds.total_dim();
    let mut data = vec![0.0; n * h];
    let mut offset = 0;
    let mut feature = vec![0.0; n];
    for x in &ds.views {
        for r in 0..x.rows() {
            feature.copy_from_slice(x.row(r));
            zscore_in_place(&mut feature);
            for (j, v) in feature.iter().enumerate() {
                data[j * h + offset] = *v;
            }
            offset += 1;
        }
    }
    (data, h)
}

#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Number of distinct clusters in `labels`.
    pub occupied: usize,
}

/// Best of `restarts` k-means++ runs by inertia. `data` is row-major `n × h`.
pub fn kmeans_best_of<R: Rng + ?Sized>(
    data: &[f64],
    h: usize,
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> KmeansFit {
    let mut best: Option<KmeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = kmeans(data, h, k, rng);
        let better = match &best {
            None => true,
            Some(b) => (fit.occupied, -fit.inertia) > (b.occupied, -b.inertia),
        };
        if better {
            best = Some(fit);
        }
    }
    best.expect("at least one restart")
}

/// One k-means++ seeding followed by Lloyd iterations until the labels stop
/// changing. Empty clusters are reseeded with the point farthest from its center.
pub fn kmeans<R: Rng + ?Sized>(data: &[f64], h: usize, k: usize, rng: &mut R) -> KmeansFit {
    let n = data.len() / h.max(1);
    let point = |j: usize| &data[j * h..(j + 1) * h];
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let mut centers = vec![0.0; k * h];
    let first = rng.random_range(0..n);
    centers[..h].copy_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|j| sq(point(j), &centers[..h])).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (j, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = j;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers[c * h..(c + 1) * h].copy_from_slice(point(pick));
        for (j, dj) in d2.iter_mut().enumerate() {
            *dj = dj.min(sq(point(j), &centers[c * h..(c + 1) * h]));
        }
    }

    let point_norms: Vec<f64> = (0..n).map(|j| dot(point(j), point(j))).collect();
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for _ in 0..LLOYD_MAX_ITERS {
        let center_norms: Vec<f64> = (0..k)
            .map(|c| dot(&centers[c * h..(c + 1) * h], &centers[c * h..(c + 1) * h]))
            .collect();
        let mut changed = false;
        for j in 0..n {
            let p = point(j);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = center_norms[c] - 2.0 * dot(p, &centers[c * h..(c + 1) * h]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            dist[j] = (best_d + point_norms[j]).max(0.0);
            if labels[j] != best {
                labels[j] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut counts = vec![0usize; k];
        centers.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let c = labels[j];
            counts[c] += 1;
            for (a, b) in centers[c * h..(c + 1) * h].iter_mut().zip(point(j)) {
                *a += b;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centers[c * h..(c + 1) * h].iter_mut().for_each(|v| *v *= inv);
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                centers[c * h..(c + 1) * h].copy_from_slice(point(far));
                dist[far] = 0.0;
            }
        }
    }
    let mut occupied = vec![false; k];
    labels.iter().for_each(|&c| occupied[c] = true);
    KmeansFit {
        inertia: dist.iter().sum(),
        occupied: occupied.iter().filter(|o| **o).count(),
        labels,
    }
}

/// `j mod k`, shuffled: cluster sizes differ by at most one.
pub fn balanced_random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|j| j % k).collect();
    labels.shuffle(rng);
    labels
}
