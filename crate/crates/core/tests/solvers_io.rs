use std::fs;

use aimc::io::{gen_synthetic, load_dataset, write_dataset, MatrixFormat, SyntheticSpec};
use aimc::metrics::MetricReport;
use aimc::{fit, Method, SolverConfig};

fn planted(n: usize, k: usize, sigma: f64, seed: u64) -> aimc::MultiviewDataset {
    gen_synthetic(&SyntheticSpec::new(n, k, 8, vec![12, 10, 9], sigma, seed))
        .unwrap()
        .0
}

#[test]
fn both_methods_recover_well_separated_clusters() {
    let ds = planted(300, 5, 0.01, 3);
    let truth = ds.class_ids().unwrap();
    for method in [Method::Aimc, Method::Nonmf] {
        let res = fit(&ds, &SolverConfig::new(5, 8), method).unwrap();
        let rep = MetricReport::compute(res.assignment(), &truth).unwrap();
        assert!(rep.acc > 0.99, "{method}: {rep:?}");
        assert!(res.converged);
    }
}

#[test]
fn nonmf_squared_objective_never_increases() {
    let ds = planted(250, 4, 0.5, 9);
    let mut cfg = SolverConfig::new(4, 8);
    cfg.tol = 1e-300;
    cfg.max_iters = 30;
    let res = fit(&ds, &cfg, Method::Nonmf).unwrap();
    let mut prev = res.initial_objective.weighted_squared;
    for e in &res.trace {
        assert!(e.weighted_squared <= prev * (1.0 + 1e-12), "{} > {prev}", e.weighted_squared);
        prev = e.weighted_squared;
    }
    assert!(res.model.weights().iter().all(|&w| w == 1.0));
}

#[test]
fn noisy_view_gets_the_smallest_weight() {
    let mut spec = SyntheticSpec::new(400, 4, 6, vec![10, 10, 10], 0.05, 21);
    spec.bad_view_sigma = Some(vec![0.05, 0.05, 2.0]);
    let (ds, _) = gen_synthetic(&spec).unwrap();
    let res = fit(&ds, &SolverConfig::new(4, 6), Method::Aimc).unwrap();
    let w = res.model.weights();
    assert!(w[2] < w[0] && w[2] < w[1], "{w:?}");
    let rep = MetricReport::compute(res.assignment(), &ds.class_ids().unwrap()).unwrap();
    assert!(rep.acc > 0.95, "{rep:?}");
}

#[test]
fn csv_and_binary_round_trips_agree() {
    let ds = planted(60, 3, 0.1, 4);
    let dir = tempfile::tempdir().unwrap();
    let csv = load_dataset(&write_dataset(&ds, &dir.path().join("c"), MatrixFormat::Csv).unwrap()).unwrap();
    let bin = load_dataset(&write_dataset(&ds, &dir.path().join("b"), MatrixFormat::Mvm1).unwrap()).unwrap();
    assert_eq!(csv.labels, ds.labels);
    assert_eq!(bin.labels, ds.labels);
    for v in 0..ds.n_views() {
        assert_eq!(bin.views[v].as_slice(), ds.views[v].as_slice());
        assert_eq!(csv.views[v].as_slice(), ds.views[v].as_slice());
    }
    let cfg = SolverConfig::new(3, 8);
    let a = fit(&csv, &cfg, Method::Aimc).unwrap();
    let b = fit(&bin, &cfg, Method::Aimc).unwrap();
    assert_eq!(a.assignment(), b.assignment());
    assert_eq!(a.final_objective, b.final_objective);
}

#[test]
fn manifest_problems_are_reported_together() {
    let ds = planted(30, 2, 0.1, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(&ds, dir.path(), MatrixFormat::Csv).unwrap();
    let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    m["views"][0]["dim"] = 99.into();
    m["views"][1]["path"] = "missing.csv".into();
    fs::write(&path, m.to_string()).unwrap();
    let err = load_dataset(&path).unwrap_err();
    assert_eq!(err.kind(), "invalid_dataset");
    let aimc::Error::InvalidDataset(problems) = err else { unreachable!() };
    assert_eq!(problems.len(), 2, "{problems:?}");
}

#[test]
fn malformed_manifest_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    fs::write(&path, "{\"name\": \"x\", \"n\": ").unwrap();
    assert_eq!(load_dataset(&path).unwrap_err().kind(), "parse");
}
