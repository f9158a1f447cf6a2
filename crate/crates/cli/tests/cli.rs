use std::path::Path;
use std::process::{Command, Output};

use mixergm::rng::{self, domain};
use mixergm::{Ensemble, Graph, NodeCovariates};
use mixergm_cli::config::RunConfig;
use mixergm_cli::harness::simulate_ensemble;
use mixergm_cli::io;
use rand::Rng;

const SMALL: &str = "seed = 11\n\
[fit]\nk_max = 2\ntotal_iterations = 1500\nburn_in = 300\nthin = 20\n\
[prior]\nmu = [-1.0, 0.0, 0.0]\n\
[ppc]\nreplicates = 2\npartition_attr = \"X\"\n\
[simulate]\nnodes = 16\ncluster_sizes = [4, 4]\n";

fn mixergm(out: &Path, config: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixergm"));
    cmd.arg("--out").arg(out).env("RUST_LOG", "error");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path();
    for step in [
        &["simulate"][..],
        &["fit"],
        &["select"],
        &["membership"],
        &["ppc"],
        &["metrics"],
    ] {
        let o = mixergm(out, Some(&cfg), step);
        assert!(o.status.success(), "{step:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for rel in [
        "data/manifest.csv",
        "data/truth.csv",
        "fits/K1/draws.csv",
        "fits/K2/z.csv",
        "fits/K2/COMPLETE",
        "dic_report.csv",
        "metrics.csv",
    ] {
        assert!(out.join(rel).exists(), "{rel}");
    }
    let (rows, selected) = io::read_dic_report(&out.join("dic_report.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(out.join(format!("membership_K{selected}.csv")).exists());
    let hellinger = std::fs::read_to_string(out.join(format!("ppc_K{selected}/hellinger.csv"))).unwrap();
    assert!(hellinger.starts_with("metric,hellinger,bins"));
    assert_eq!(hellinger.lines().count(), 6, "{hellinger}");

    let ens = io::read_ensemble(&out.join("data/manifest.csv")).unwrap();
    assert_eq!(ens.len(), 8);
    let pred = io::read_ensemble(&out.join(format!("ppc_K{selected}/predictive/manifest.csv"))).unwrap();
    assert_eq!(pred.len(), 16);
}

#[test]
fn ensemble_round_trip() {
    let mut rng = rng::stream(3, domain::TEST, 0);
    let members: Vec<(Graph, NodeCovariates)> = (0..4)
        .map(|k| {
            let n = 3 + k;
            let edges: Vec<_> = mixergm::graph::dyads(n).filter(|_| rng.random::<bool>()).collect();
            let x = NodeCovariates::empty(n)
                .with_attribute("party", (0..n).map(|v| if v % 2 == 0 { "D" } else { "R" }))
                .unwrap();
            (Graph::new(n, &edges).unwrap(), x)
        })
        .collect();
    let ens = Ensemble::new(members).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = io::write_ensemble(dir.path(), &ens).unwrap();
    assert_eq!(io::read_ensemble(&manifest).unwrap(), ens);
}

#[test]
fn simulated_mean_degree_is_near_the_design() {
    let cfg = RunConfig::default();
    let spec = cfg.model_spec().unwrap();
    let (ens, labels) = simulate_ensemble(&spec, &cfg.simulate, 9).unwrap();
    assert_eq!(labels.len(), 20);
    let mean: f64 = ens
        .iter()
        .map(|n| 2.0 * n.graph.edge_count() as f64 / n.graph.node_count() as f64)
        .sum::<f64>()
        / ens.len() as f64;
    assert!((mean - 9.9).abs() < 1.5, "mean degree {mean}");
}

#[test]
fn single_k_range_selects_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("k_max = 2", "k_max = 1"));
    for step in ["simulate", "fit", "select"] {
        assert!(mixergm(dir.path(), Some(&cfg), &[step]).status.success());
    }
    let (rows, selected) = io::read_dic_report(&dir.path().join("dic_report.csv")).unwrap();
    assert_eq!((rows.len(), selected), (1, 1));
}

#[test]
fn missing_fit_is_reported_by_k() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert!(mixergm(dir.path(), Some(&cfg), &["simulate"]).status.success());
    assert!(mixergm(dir.path(), Some(&cfg), &["fit"]).status.success());
    std::fs::remove_file(dir.path().join("fits/K2/COMPLETE")).unwrap();
    let o = mixergm(dir.path(), Some(&cfg), &["select"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("K = 2"));
}

#[test]
fn missing_attribute_fails_before_fitting() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert!(mixergm(dir.path(), Some(&cfg), &["simulate"]).status.success());
    let text = SMALL
        .replace("mu = [-1.0, 0.0, 0.0]", "")
        .replace("[ppc]", "[model]\nterms = [\"edges\", \"nodematch attr=party\"]\n[ppc]");
    let bad = write_config(dir.path(), &text);
    let o = mixergm(dir.path(), Some(&bad), &["fit"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("party"));
    assert!(!dir.path().join("fits").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // unknown flag
    assert_eq!(mixergm(dir.path(), None, &["fit", "--bogus"]).status.code(), Some(1));
    // invalid configuration value
    let cfg = write_config(dir.path(), "[fit]\nthin = 0\n");
    assert_eq!(mixergm(dir.path(), Some(&cfg), &["fit"]).status.code(), Some(1));
    // missing input file
    let o = mixergm(dir.path(), None, &["metrics", "--ensemble", "nowhere.csv"]);
    assert_eq!(o.status.code(), Some(2));
    // help is not an error
    assert_eq!(mixergm(dir.path(), None, &["--help"]).status.code(), Some(0));
}

#[test]
fn rollcall_ingest_builds_an_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let votes = dir.path().join("votes.csv");
    let parties = dir.path().join("parties.csv");
    std::fs::write(
        &votes,
        "senator,b1,b2,b3,b4\nA,yay,yay,nay,yay\nB,yay,yay,nay,nay\nC,nay,nay,yay,absent\n",
    )
    .unwrap();
    std::fs::write(&parties, "senator,party\nA,D\nB,D\nC,R\n").unwrap();
    let v = votes.to_str().unwrap();
    let p = parties.to_str().unwrap();
    let o = mixergm(
        dir.path(),
        None,
        &["ingest-rollcall", "--votes", v, "--votes", v, "--parties", p],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ens = io::read_ensemble(&dir.path().join("data/manifest.csv")).unwrap();
    assert_eq!(ens.len(), 2);
    let g = &ens.networks()[0].graph;
    assert!(g.has_edge(0, 1));
    assert_eq!(g.degree(2), 0);
    assert_eq!(ens.networks()[0].covariates.attribute("party").unwrap().value(2), "R");
}
