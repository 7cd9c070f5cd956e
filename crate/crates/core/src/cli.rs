//! Command-line front end. Every failure ends with one JSON line on stderr,
//! `{"error":{"kind":...,"message":...}}`, and a nonzero exit status.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::bench::{run_bench, BenchSpec};
use crate::error::{Error, Result};
use crate::io::result::{write_atomic, Timing};
use crate::io::{
    gen_synthetic, load_dataset, load_labels, write_dataset, DatasetSummary, MatrixFormat,
    RepeatSummary, ResultDocument, SweepPoint, SweepSummary, SyntheticSpec,
};
use crate::metrics::MetricReport;
use crate::model::{InitMode, Method, MultiviewDataset, Normalization, SolveResult, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "aimc", version, about = "Multiview clustering with adaptive view weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a dataset described by a manifest.
    Run(RunArgs),
    /// Write a planted dataset (views, labels, manifest) to a directory.
    Gen(GenArgs),
    /// Time solver passes on planted data of growing size.
    Bench(BenchArgs),
    /// Compare two labelings.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Aimc)]
    pub method: Method,
    /// Number of clusters. Defaults to the manifest's `k`, then to the label count.
    #[arg(long)]
    pub k: Option<usize>,
    /// Latent dimension. Defaults to `k`.
    #[arg(long)]
    pub d: Option<usize>,
    /// Sweep `d` and keep the best run. Takes `a,b,c` or `start:step:stop`;
    /// bare `--d-sweep` means `k:5:300`.
    #[arg(long = "d-sweep", value_name = "LIST", num_args = 0..=1, default_missing_value = "")]
    pub d_sweep: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitMode::KmeansConcat)]
    pub init: InitMode,
    #[arg(long, value_enum, default_value_t = Normalization::None)]
    pub normalize: Normalization,
    /// Independent runs per setting, with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// k-means restarts used by the `kmeans-concat` initializer.
    #[arg(long, default_value_t = 10)]
    pub kmeans_restarts: usize,
    /// Run everything on the calling thread.
    #[arg(long)]
    pub serial: bool,
    /// Result JSON; the trace goes to `<stem>.trace.csv` beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    /// Number of views; must match `--view-dims` when given.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub view_dims: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub noise_sigma: f64,
    #[arg(long, value_delimiter = ',')]
    pub cluster_weights: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub bad_view_sigma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
    pub format: MatrixFormat,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000,16000")]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 15)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', default_value = "100,80,60")]
    pub view_dims: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitMode::Random)]
    pub init: InitMode,
    /// Run everything on the calling thread.
    #[arg(long)]
    pub serial: bool,
    /// Per-iteration CSV; a summary goes to `<stem>.summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted labels: a label file, or a result JSON (its assignment is used).
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference labels file.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_line("usage", &e.to_string()));
            return 2;
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            1
        }
    }
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message.trim_end() } }).to_string()
}

/// `""` gives `k, k+5, ..., 300`; otherwise `a,b,c` or `start:step:stop`.
pub fn parse_d_sweep(text: &str, k: usize) -> Result<Vec<usize>> {
    let bad = |why: &str| Error::Config(format!("bad --d-sweep value {text:?}: {why}"));
    let ds: Vec<usize> = if text.trim().is_empty() {
        (k..=300.max(k)).step_by(5).collect()
    } else if text.contains(':') {
        let parts: Vec<usize> = text
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| bad("expected start:step:stop")))
            .collect::<Result<_>>()?;
        let [start, step, stop] = parts[..] else {
            return Err(bad("expected start:step:stop"));
        };
        if step == 0 {
            return Err(bad("step must be positive"));
        }
        (start..=stop).step_by(step).collect()
    } else {
        text.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad("expected integers")))
            .collect::<Result<_>>()?
    };
    if ds.is_empty() {
        return Err(bad("no values"));
    }
    if let Some(&d) = ds.iter().find(|&&d| d < k) {
        return Err(bad(&format!("d={d} is below k={k}")));
    }
    Ok(ds)
}

fn resolve_k(ds: &MultiviewDataset, k: Option<usize>) -> Result<usize> {
    k.or(ds.declared_k).or_else(|| ds.n_classes()).ok_or_else(|| {
        Error::Config("--k not given and the dataset declares neither k nor labels".into())
    })
}

struct Job {
    d: usize,
    seed: u64,
}

struct Finished {
    result: SolveResult,
    metrics: Option<MetricReport>,
}

fn run_job(ds: &MultiviewDataset, base: &SolverConfig, method: Method, job: &Job) -> Result<Finished> {
    let mut cfg = base.clone();
    cfg.d = job.d;
    cfg.seed = job.seed;
    let result = crate::fit(ds, &cfg, method)?;
    let metrics = match &ds.labels {
        Some(l) => Some(MetricReport::compute(result.assignment(), l)?),
        None => None,
    };
    Ok(Finished { result, metrics })
}

/// Index of the best run: highest ACC when labels exist, else lowest final
/// unsquared objective. Ties keep the earliest run.
fn select_best(runs: &[Finished]) -> (usize, &'static str) {
    let labeled = runs.iter().all(|r| r.metrics.is_some());
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        let better = if labeled {
            r.metrics.expect("labeled").acc > runs[best].metrics.expect("labeled").acc
        } else {
            r.result.final_objective.unsquared < runs[best].result.final_objective.unsquared
        };
        if better {
            best = i;
        }
    }
    (best, if labeled { "acc" } else { "objective" })
}

fn mean_report(reports: &[MetricReport]) -> Option<MetricReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let sum = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Some(MetricReport {
        acc: sum(|r| r.acc),
        nmi: sum(|r| r.nmi),
        purity: sum(|r| r.purity),
        fscore: sum(|r| r.fscore),
    })
}

/// Loads, solves (once, repeated, or over a `d` sweep) and writes the result.
/// Returns the one-line summary.
pub fn cmd_run(a: &RunArgs) -> Result<String> {
    let start = Instant::now();
    if a.repeats < 1 {
        return Err(Error::Config("--repeats must be at least 1".into()));
    }
    let ds = load_dataset(&a.data)?;
    let k = resolve_k(&ds, a.k)?;
    let mut base = SolverConfig::new(k, a.d.unwrap_or(k));
    base.max_iters = a.max_iters;
    base.tol = a.tol;
    base.seed = a.seed;
    base.init_mode = a.init;
    base.normalization = a.normalize;
    base.kmeans_restarts = a.kmeans_restarts;
    base.parallel = !a.serial;
    base.validate()?;

    let d_values = match &a.d_sweep {
        Some(text) => parse_d_sweep(text, k)?,
        None => vec![base.d],
    };
    let jobs: Vec<Job> = d_values
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| {
            (0..a.repeats).map(move |r| Job {
                d,
                seed: a.seed + (i * a.repeats + r) as u64,
            })
        })
        .collect();
    let runs: Vec<Finished> = if base.parallel {
        jobs.par_iter()
            .map(|j| run_job(&ds, &base, a.method, j))
            .collect::<Result<_>>()?
    } else {
        jobs.iter()
            .map(|j| run_job(&ds, &base, a.method, j))
            .collect::<Result<_>>()?
    };

    let sweeping = a.d_sweep.is_some();
    let (best, criterion) = if sweeping { select_best(&runs) } else { (0, "") };
    let chosen = &runs[best];
    let mut doc = ResultDocument::new(&chosen.result, chosen.metrics);
    doc.dataset = Some(DatasetSummary::of(&ds));
    if sweeping {
        doc.sweep = Some(SweepSummary {
            criterion: criterion.into(),
            best_index: best,
            points: runs
                .iter()
                .map(|r| SweepPoint {
                    d: r.result.config.d,
                    seed: r.result.config.seed,
                    final_unsquared: r.result.final_objective.unsquared,
                    iters_run: r.result.iters_run,
                    converged: r.result.converged,
                    metrics: r.metrics,
                })
                .collect(),
        });
    }
    let mean = if a.repeats > 1 && !sweeping {
        let metrics: Vec<MetricReport> = runs.iter().filter_map(|r| r.metrics).collect();
        let mean = mean_report(&metrics);
        doc.repeats = Some(RepeatSummary {
            seeds: runs.iter().map(|r| r.result.config.seed).collect(),
            final_unsquared: runs.iter().map(|r| r.result.final_objective.unsquared).collect(),
            metrics,
            mean,
        });
        mean
    } else {
        None
    };
    let seconds = start.elapsed().as_secs_f64();
    doc.timing = Timing {
        phases: chosen.result.timings.clone(),
        wall_seconds: seconds,
    };
    doc.write(&a.out)?;

    let mut line = format!("{} d={} seed={}", a.method, doc.config.d, doc.config.seed);
    if let Some(m) = chosen.metrics {
        line.push_str(&format!(
            " acc={:.4} nmi={:.4} purity={:.4} fscore={:.4}",
            m.acc, m.nmi, m.purity, m.fscore
        ));
    }
    if let Some(m) = mean {
        line.push_str(&format!(" mean_acc={:.4} mean_nmi={:.4}", m.acc, m.nmi));
    }
    if sweeping {
        line.push_str(&format!(" sweep={} by={criterion}", runs.len()));
    }
    line.push_str(&format!(
        " objective={:.6e} iters={} converged={} seconds={seconds:.2}",
        doc.final_objective.unsquared, doc.iters_run, doc.converged
    ));
    Ok(line)
}

pub fn cmd_gen(a: &GenArgs) -> Result<String> {
    let spec = SyntheticSpec {
        n: a.n,
        m: a.m.unwrap_or(a.view_dims.len()),
        k: a.k,
        d: a.d,
        view_dims: a.view_dims.clone(),
        noise_sigma: a.noise_sigma,
        cluster_weights: a.cluster_weights.clone(),
        bad_view_sigma: a.bad_view_sigma.clone(),
        seed: a.seed,
    };
    let (ds, _) = gen_synthetic(&spec)?;
    let manifest = write_dataset(&ds, &a.out, a.format)?;
    Ok(format!(
        "wrote {} (n={} m={} k={})",
        manifest.display(),
        spec.n,
        spec.m,
        spec.k
    ))
}

pub fn cmd_bench(a: &BenchArgs) -> Result<String> {
    let spec = BenchSpec {
        ns: a.ns.clone(),
        iters: a.iters,
        k: a.k,
        d: a.d,
        view_dims: a.view_dims.clone(),
        noise_sigma: a.noise_sigma,
        seed: a.seed,
        init_mode: a.init,
        parallel: !a.serial,
    };
    let report = run_bench(&spec)?;
    let summary = json!({
        "spec": report.spec,
        "median_seconds": report.median_seconds,
        "slope": report.slope,
        "ratios": report.ratios,
    });
    let stem = a
        .out
        .file_stem()
        .map_or_else(|| "bench".into(), |s| s.to_string_lossy().into_owned());
    let summary_path = a.out.with_file_name(format!("{stem}.summary.json"));
    write_atomic(&summary_path, (serde_json::to_string_pretty(&summary)? + "\n").as_bytes())?;
    write_atomic(&a.out, report.to_csv().as_bytes())?;
    let ratios: Vec<String> = report.ratios.iter().map(|r| format!("{r:.2}")).collect();
    Ok(format!(
        "slope={:.3} ratios=[{}] rows={}",
        report.slope,
        ratios.join(","),
        report.rows.len()
    ))
}

fn load_prediction(path: &Path) -> Result<Vec<i64>> {
    if path.extension().is_some_and(|e| e == "json") {
        let doc = ResultDocument::read(path)?;
        Ok(doc.assignment.into_iter().map(|c| c as i64).collect())
    } else {
        load_labels(path)
    }
}

/// Prints the four metrics as one JSON object.
pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let pred = load_prediction(&a.pred)?;
    let truth = load_labels(&a.truth)?;
    let report = MetricReport::compute(&pred, &truth)?;
    let text = serde_json::to_string(&report)?;
    if let Some(out) = &a.out {
        fs::write(out, format!("{text}\n")).map_err(|e| Error::io(out, e))?;
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_lists() {
        assert_eq!(parse_d_sweep("", 10).unwrap().len(), 59);
        assert_eq!(parse_d_sweep("", 10).unwrap()[58], 300);
        assert_eq!(parse_d_sweep("10:5:20", 10).unwrap(), vec![10, 15, 20]);
        assert_eq!(parse_d_sweep("12, 30", 10).unwrap(), vec![12, 30]);
        assert!(parse_d_sweep("5,20", 10).is_err());
        assert!(parse_d_sweep("10:0:20", 10).is_err());
        assert!(parse_d_sweep("x", 10).is_err());
    }

    #[test]
    fn exact_flag_spelling_parses() {
        let cli = Cli::try_parse_from([
            "aimc", "run", "--data", "m.json", "--method", "nonmf", "--k", "3", "--d", "4",
            "--d-sweep", "--max-iters", "5", "--tol", "1e-4", "--seed", "7", "--init",
            "random", "--normalize", "unit-l2-sample", "--out", "o.json",
        ])
        .unwrap();
        let Command::Run(a) = cli.command else {
            panic!("expected run")
        };
        assert_eq!(a.method, Method::Nonmf);
        assert_eq!(a.d_sweep.as_deref(), Some(""));
        assert_eq!(a.init, InitMode::Random);
        assert_eq!(a.normalize, Normalization::UnitL2Sample);
        assert!(Cli::try_parse_from(["aimc", "run", "--normalize", "zscore-feature"]).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["aimc", "run", "--bogus"]), 2);
    }
}
