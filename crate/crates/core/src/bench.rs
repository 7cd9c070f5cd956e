//! Per-iteration scaling benchmark on planted data.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aimc::AimcSolver;
use crate::error::{Error, Result};
use crate::io::synthetic::{gen_synthetic, SyntheticSpec};
use crate::model::{InitMode, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub ns: Vec<usize>,
    /// Passes timed per size, after one untimed warm-up pass. Convergence
    /// never stops the loop early.
    pub iters: usize,
    pub k: usize,
    pub d: usize,
    pub view_dims: Vec<usize>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub init_mode: InitMode,
    pub parallel: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            ns: vec![1000, 2000, 4000, 8000, 16000],
            iters: 10,
            k: 10,
            d: 15,
            view_dims: vec![100, 80, 60],
            noise_sigma: 0.1,
            seed: 0,
            init_mode: InitMode::Random,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub iter: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: BenchSpec,
    pub rows: Vec<BenchRow>,
    /// Median per-iteration seconds for each entry of `spec.ns`.
    pub median_seconds: Vec<f64>,
    /// Least-squares slope of `ln(median)` against `ln(n)`.
    pub slope: f64,
    /// `median[i + 1] / median[i]` for consecutive sizes.
    pub ratios: Vec<f64>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,iter,seconds\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.n, r.iter, r.seconds));
        }
        out
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.ns.len() < 2 {
        return Err(Error::Config("bench needs at least two sample sizes".into()));
    }
    if spec.iters < 1 {
        return Err(Error::Config("bench needs at least one iteration".into()));
    }
    let mut solvers = Vec::with_capacity(spec.ns.len());
    for &n in &spec.ns {
        let (ds, _) = gen_synthetic(&SyntheticSpec::new(
            n,
            spec.k,
            spec.d,
            spec.view_dims.clone(),
            spec.noise_sigma,
            spec.seed,
        ))?;
        let mut cfg = SolverConfig::new(spec.k, spec.d);
        cfg.seed = spec.seed;
        cfg.init_mode = spec.init_mode;
        cfg.parallel = spec.parallel;
        let mut solver = AimcSolver::new(&ds, &cfg)?;
        // untimed warm-up pass: first touch of the work buffers
        solver.step()?;
        solvers.push(solver);
    }
    // Sizes are interleaved within each round so that slow periods on a busy
    // machine hit every size rather than skewing one.
    let mut times = vec![Vec::with_capacity(spec.iters); spec.ns.len()];
    let mut rows = Vec::with_capacity(spec.iters * spec.ns.len());
    for iter in 1..=spec.iters {
        for (i, solver) in solvers.iter_mut().enumerate() {
            let t = Instant::now();
            solver.step()?;
            let seconds = t.elapsed().as_secs_f64();
            times[i].push(seconds);
            rows.push(BenchRow {
                n: spec.ns[i],
                iter,
                seconds,
            });
        }
    }
    rows.sort_by_key(|r| (r.n, r.iter));
    let medians: Vec<f64> = times.iter().map(|t| median(t)).collect();
    for (n, m) in spec.ns.iter().zip(&medians) {
        log::info!("bench n={n}: median {m:.6} s/iter");
    }
    let lx: Vec<f64> = spec.ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = medians.iter().map(|t| t.ln()).collect();
    let ratios = medians.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(BenchReport {
        spec: spec.clone(),
        rows,
        slope: ls_slope(&lx, &ly),
        median_seconds: medians,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [3.0f64, 6.0, 12.0, 24.0].iter().map(|v| v.ln()).collect();
        assert!((ls_slope(&x, &y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn one_row_per_size_and_iteration() {
        let spec = BenchSpec {
            ns: vec![50, 100],
            iters: 3,
            k: 2,
            d: 3,
            view_dims: vec![5, 4],
            ..Default::default()
        };
        let rep = run_bench(&spec).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert_eq!(rep.to_csv().lines().count(), 7);
        assert_eq!(rep.ratios.len(), 1);
    }
}
