//! External clustering metrics: ACC (optimal one-to-one matching), NMI,
//! purity, and pairwise F-score. All of them work from the contingency table,
//! so they are invariant under renaming of either labeling's ids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of (predicted cluster, true class) co-occurrences.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    /// `table[p][t]`
    pub table: Vec<Vec<u64>>,
    pub n: u64,
}

impl Contingency {
    pub fn from_labels<A: Ord + Clone, B: Ord + Clone>(pred: &[A], truth: &[B]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Dimension(format!(
                "label length mismatch: predicted {} vs true {}",
                pred.len(),
                truth.len()
            )));
        }
        let pi = index_of(pred);
        let ti = index_of(truth);
        let mut table = vec![vec![0u64; ti.len()]; pi.len()];
        for (p, t) in pred.iter().zip(truth) {
            table[pi[p]][ti[t]] += 1;
        }
        Ok(Self {
            table,
            n: pred.len() as u64,
        })
    }

    pub fn n_pred(&self) -> usize {
        self.table.len()
    }

    pub fn n_true(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    fn row_sums(&self) -> Vec<u64> {
        self.table.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        let mut s = vec![0; self.n_true()];
        for row in &self.table {
            for (a, b) in s.iter_mut().zip(row) {
                *a += b;
            }
        }
        s
    }
}

fn index_of<T: Ord + Clone>(labels: &[T]) -> BTreeMap<T, usize> {
    let mut map = BTreeMap::new();
    for l in labels {
        map.entry(l.clone()).or_insert(0);
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

/// Maximum-weight one-to-one matching between rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(row, col)` pairs, sorted by row. Has `min(rows, cols)` entries.
    pub pairs: Vec<(usize, usize)>,
    pub weight: f64,
}

/// Hungarian algorithm (shortest augmenting paths with potentials), O(s³) with
/// `s = max(rows, cols)`. Rectangular inputs are padded with zeros.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Matching {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let s = rows.max(cols);
    if s == 0 {
        return Matching {
            pairs: Vec::new(),
            weight: 0.0,
        };
    }
    let w = |i: usize, j: usize| {
        if i < rows && j < cols {
            weights[i][j]
        } else {
            0.0
        }
    };
    let max_w = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| w(i, j))
        .fold(0.0_f64, f64::max);
    let cost = |i: usize, j: usize| max_w - w(i, j);

    // 1-based potentials; column 0 is the virtual start.
    let mut u = vec![0.0_f64; s + 1];
    let mut v = vec![0.0_f64; s + 1];
    let mut match_col = vec![0usize; s + 1];
    let mut way = vec![0usize; s + 1];
    for i in 1..=s {
        match_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; s + 1];
        let mut used = vec![false; s + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=s {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=s {
                if used[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=s)
        .filter_map(|j| {
            let i = match_col[j];
            (i >= 1 && i - 1 < rows && j - 1 < cols).then(|| (i - 1, j - 1))
        })
        .collect();
    pairs.sort_unstable();
    let weight = pairs.iter().map(|&(i, j)| weights[i][j]).sum();
    Matching { pairs, weight }
}

/// Fraction of samples on the diagonal after the best cluster-to-class matching.
pub fn accuracy<A: Ord + Clone, B: Ord + Clone>(pred: &[A], truth: &[B]) -> Result<f64> {
    let c = Contingency::from_labels(pred, truth)?;
    Ok(accuracy_from(&c))
}

pub fn accuracy_from(c: &Contingency) -> f64 {
    if c.n == 0 {
        return 1.0;
    }
    let w: Vec<Vec<f64>> = c
        .table
        .iter()
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect();
    hungarian_max(&w).weight / c.n as f64
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(pred; truth) / sqrt(H(pred)·H(truth))`, natural log. Both entropies zero
/// gives 1, exactly one zero gives 0.
pub fn nmi<A: Ord + Clone, B: Ord + Clone>(pred: &[A], truth: &[B]) -> Result<f64> {
    let c = Contingency::from_labels(pred, truth)?;
    Ok(nmi_from(&c))
}

pub fn nmi_from(c: &Contingency) -> f64 {
    let n = c.n as f64;
    let rows = c.row_sums();
    let cols = c.col_sums();
    let hp = entropy(&rows, n);
    let ht = entropy(&cols, n);
    if hp == 0.0 && ht == 0.0 {
        return 1.0;
    }
    if hp == 0.0 || ht == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += nij / n * (n * nij / (rows[i] as f64 * cols[j] as f64)).ln();
        }
    }
    (mi / (hp * ht).sqrt()).clamp(0.0, 1.0)
}

/// Share of samples belonging to the majority class of their cluster.
pub fn purity<A: Ord + Clone, B: Ord + Clone>(pred: &[A], truth: &[B]) -> Result<f64> {
    let c = Contingency::from_labels(pred, truth)?;
    Ok(purity_from(&c))
}

pub fn purity_from(c: &Contingency) -> f64 {
    if c.n == 0 {
        return 1.0;
    }
    let hits: u64 = c
        .table
        .iter()
        .map(|r| r.iter().copied().max().unwrap_or(0))
        .sum();
    hits as f64 / c.n as f64
}

fn pairs(x: u64) -> u128 {
    let x = x as u128;
    x * x.saturating_sub(1) / 2
}

/// Pairwise F-score over all `n(n−1)/2` sample pairs, from contingency sums.
pub fn fscore_pairwise<A: Ord + Clone, B: Ord + Clone>(pred: &[A], truth: &[B]) -> Result<f64> {
    let c = Contingency::from_labels(pred, truth)?;
    Ok(fscore_from(&c))
}

pub fn fscore_from(c: &Contingency) -> f64 {
    let tp: u128 = c.table.iter().flatten().map(|&x| pairs(x)).sum();
    let same_pred: u128 = c.row_sums().into_iter().map(pairs).sum();
    let same_true: u128 = c.col_sums().into_iter().map(pairs).sum();
    if same_pred == 0 && same_true == 0 {
        // both all-singleton: every pair is agreed on as "different"
        return 1.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / same_pred as f64;
    let recall = tp as f64 / same_true as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub nmi: f64,
    pub purity: f64,
    pub fscore: f64,
}

impl MetricReport {
    pub fn compute<A: Ord + Clone, B: Ord + Clone>(pred: &[A], truth: &[B]) -> Result<Self> {
        let c = Contingency::from_labels(pred, truth)?;
        Ok(Self {
            acc: accuracy_from(&c),
            nmi: nmi_from(&c),
            purity: purity_from(&c),
            fscore: fscore_from(&c),
        })
    }
}
