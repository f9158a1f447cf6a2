//! Command-line surface and the subcommand implementations.
//!
//! Layout under `--out`:
//!
//! * `data/` simulated or ingested ensemble (`manifest.csv`, `truth.csv`)
//! * `fits/K<k>/` posterior draws per K
//! * `dic_report.csv`, `membership_K<k>.csv`, `metrics.csv`
//! * `ppc_K<k>/` predictive ensemble, metric tables and Hellinger report
//! * `reproduce/` replicate summaries

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use mixergm::metrics::{hellinger_values, modularity, GraphMetric};
use mixergm::selection::{membership_probs, posterior_predictive};
use mixergm::{Ensemble, MixtureModel, PosteriorSample};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, IoContext, Result};
use crate::format::num;
use crate::harness::{self, ReplicateOutcome};
use crate::io;
use crate::rollcall;

#[derive(Debug, Parser)]
#[command(
    name = "mixergm",
    version,
    about = "Fit and check finite mixtures of ERGMs on network ensembles"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled ensemble from the configured design.
    Simulate,
    /// Run one chain per K in the configured range.
    Fit {
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
    /// Compute observed DIC per K and select K.
    Select {
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        epsilon: Option<f64>,
    },
    /// Posterior membership probabilities for one K.
    Membership {
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Defaults to the K selected in `dic_report.csv`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Posterior-predictive check: simulate replicates and compare metrics.
    Ppc {
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Graph metrics for every network of an ensemble.
    Metrics {
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Node attribute used as the partition for modularity.
        #[arg(long)]
        partition_attr: Option<String>,
    },
    /// Build co-voting networks from roll-call tables, one per votes file.
    IngestRollcall {
        /// `senator,<bill>...` table; repeat for several networks.
        #[arg(long, required = true)]
        votes: Vec<PathBuf>,
        /// `senator,party` table; give one for all votes files or one each.
        #[arg(long, required = true)]
        parties: Vec<PathBuf>,
        #[arg(long, default_value_t = rollcall::DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Simulate, fit, select and score R replicates of the configured design.
    Reproduce {
        #[arg(long, default_value_t = 5)]
        replicate: usize,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        // fails only if a pool already exists, e.g. when called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let ctx = Context { cfg, out: cli.out };
    match cli.command {
        Command::Simulate => ctx.simulate(),
        Command::Fit { ensemble } => ctx.fit(ensemble),
        Command::Select { ensemble, epsilon } => ctx.select(ensemble, epsilon),
        Command::Membership { ensemble, k } => ctx.membership(ensemble, k),
        Command::Ppc {
            ensemble,
            k,
            replicates,
            bins,
        } => ctx.ppc(ensemble, k, replicates, bins),
        Command::Metrics {
            ensemble,
            partition_attr,
        } => ctx.metrics(ensemble, partition_attr),
        Command::IngestRollcall {
            votes,
            parties,
            threshold,
        } => ctx.ingest(&votes, &parties, threshold),
        Command::Reproduce { replicate } => ctx.reproduce(replicate),
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

/// Graph metrics plus modularity (when a partition attribute is given) for
/// every network, as named columns.
pub fn metric_columns(
    ens: &Ensemble,
    metrics: &[GraphMetric],
    partition_attr: Option<&str>,
) -> Result<Vec<(String, Vec<f64>)>> {
    let mut columns = Vec::new();
    for &m in metrics {
        let values = ens
            .networks()
            .par_iter()
            .map(|net| m.compute(&net.graph))
            .collect::<mixergm::Result<Vec<_>>>()?;
        columns.push((m.name().to_string(), values));
    }
    if let Some(attr) = partition_attr {
        let values = ens
            .iter()
            .enumerate()
            .map(|(i, net)| {
                let a = net.covariates.attribute(attr).ok_or_else(|| {
                    CliError::config(format!("network {}: no node attribute '{attr}' for modularity", i + 1))
                })?;
                Ok(modularity(&net.graph, a.codes())?)
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(("modularity".to_string(), values));
    }
    Ok(columns)
}

impl Context {
    fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    fn fits_dir(&self) -> PathBuf {
        self.out.join("fits")
    }

    fn ensemble_path(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.cfg.paths.ensemble.clone())
            .unwrap_or_else(|| self.data_dir().join("manifest.csv"))
    }

    fn load_model(&self, flag: Option<PathBuf>) -> Result<(Ensemble, MixtureModel)> {
        let spec = self.cfg.model_spec()?;
        let ens = io::read_ensemble(&self.ensemble_path(flag))?;
        let model = MixtureModel::new(spec, &ens)?;
        Ok((ens, model))
    }

    fn read_fits(&self, ks: impl IntoIterator<Item = usize>, p: usize) -> Result<Vec<PosteriorSample>> {
        let ks: Vec<usize> = ks.into_iter().collect();
        let missing: Vec<String> = ks
            .iter()
            .filter(|&&k| !io::fit_dir(&self.fits_dir(), k).join(io::COMPLETE_MARKER).exists())
            .map(|k| k.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::config(format!(
                "no completed fit for K = {} under {}",
                missing.join(", "),
                self.fits_dir().display()
            )));
        }
        ks.iter()
            .map(|&k| io::read_fit(&io::fit_dir(&self.fits_dir(), k), k, p))
            .collect()
    }

    fn chosen_k(&self, flag: Option<usize>) -> Result<usize> {
        if let Some(k) = flag {
            return Ok(k);
        }
        let report = self.out.join("dic_report.csv");
        if !report.exists() {
            return Err(CliError::config("pass --k or run `select` first"));
        }
        Ok(io::read_dic_report(&report)?.1)
    }

    fn simulate(&self) -> Result<()> {
        let spec = self.cfg.model_spec()?;
        let (ens, labels) = harness::simulate_ensemble(&spec, &self.cfg.simulate, self.cfg.seed)?;
        let dir = self.data_dir();
        let manifest = io::write_ensemble(&dir, &ens)?;
        io::write_truth(&dir.join("truth.csv"), &labels)?;
        let mean_degree = ens
            .iter()
            .map(|n| 2.0 * n.graph.edge_count() as f64 / n.graph.node_count() as f64)
            .sum::<f64>()
            / ens.len() as f64;
        println!(
            "wrote {} networks to {} (mean degree {})",
            ens.len(),
            manifest.display(),
            num(mean_degree)
        );
        Ok(())
    }

    fn fit(&self, ensemble: Option<PathBuf>) -> Result<()> {
        self.cfg.validate()?;
        let (_, model) = self.load_model(ensemble)?;
        let fits = harness::fit_range(&model, &self.cfg, self.cfg.seed)?;
        for post in &fits {
            let dir = io::fit_dir(&self.fits_dir(), post.k);
            io::write_fit(&dir, post, model.spec())?;
            let rates: Vec<String> = post.acceptance.iter().map(|a| num(a.rate())).collect();
            println!(
                "K = {}: {} draws, acceptance {} -> {}",
                post.k,
                post.len(),
                rates.join(" "),
                dir.display()
            );
        }
        Ok(())
    }

    fn select(&self, ensemble: Option<PathBuf>, epsilon: Option<f64>) -> Result<()> {
        let (_, model) = self.load_model(ensemble)?;
        let k_max = self.cfg.k_range()?.end().to_owned();
        let fits = self.read_fits(1..=k_max, model.spec().dim())?;
        let report = harness::dic_report(&model, &fits, epsilon.unwrap_or(self.cfg.select.epsilon))?;
        io::write_dic_report(&self.out.join("dic_report.csv"), &report)?;
        for r in &report.rows {
            let rd = r.rd.map(num).unwrap_or_else(|| "-".into());
            let mark = if r.k == report.selected { "  <- selected" } else { "" };
            println!("K = {}  DIC = {}  RD = {rd}{mark}", r.k, num(r.dic));
        }
        Ok(())
    }

    fn membership(&self, ensemble: Option<PathBuf>, k: Option<usize>) -> Result<()> {
        let (_, model) = self.load_model(ensemble)?;
        let k = self.chosen_k(k)?;
        let post = &self.read_fits([k], model.spec().dim())?[0];
        let m = membership_probs(post, &model)?;
        let path = self.out.join(format!("membership_K{k}.csv"));
        io::write_membership(&path, &m)?;
        let truth_path = self
            .cfg
            .paths
            .truth
            .clone()
            .unwrap_or_else(|| self.data_dir().join("truth.csv"));
        if truth_path.exists() {
            let truth = io::read_truth(&truth_path)?;
            if truth.len() == m.labels.len() {
                let ari = mixergm::metrics::adjusted_rand_index(&truth, &m.labels)?;
                println!("ARI against {}: {}", truth_path.display(), num(ari));
            }
        }
        println!("wrote {}", path.display());
        Ok(())
    }

    fn ppc(
        &self,
        ensemble: Option<PathBuf>,
        k: Option<usize>,
        replicates: Option<usize>,
        bins: Option<usize>,
    ) -> Result<()> {
        self.cfg.validate()?;
        let (ens, model) = self.load_model(ensemble)?;
        let k = self.chosen_k(k)?;
        let post = &self.read_fits([k], model.spec().dim())?[0];
        let count = replicates.unwrap_or(self.cfg.ppc.replicates);
        let bins = bins.unwrap_or(self.cfg.ppc.bins);
        let frames: Vec<_> = ens.iter().map(|n| n.covariates.clone()).collect();
        let sampler = &self.cfg.ppc.sampler;
        let predictive = posterior_predictive(
            post,
            model.spec(),
            &frames,
            count,
            |n| sampler.for_nodes(n),
            self.cfg.seed,
        )?;

        let dir = self.out.join(format!("ppc_K{k}"));
        io::write_ensemble(&dir.join("predictive"), &predictive)?;
        let metrics = self.cfg.metrics()?;
        let attr = self.cfg.ppc.partition_attr.as_deref();
        let observed = metric_columns(&ens, &metrics, attr)?;
        let simulated = metric_columns(&predictive, &metrics, attr)?;
        io::write_metric_table(&dir.join("metrics_observed.csv"), &observed)?;
        io::write_metric_table(&dir.join("metrics_predictive.csv"), &simulated)?;
        let distances = observed
            .iter()
            .zip(&simulated)
            .map(|((name, a), (_, b))| Ok((name.clone(), hellinger_values(a, b, bins)?)))
            .collect::<Result<Vec<_>>>()?;
        io::write_hellinger(&dir.join("hellinger.csv"), &distances, bins)?;
        for (name, d) in &distances {
            println!("{name}: Hellinger {}", num(*d));
        }
        Ok(())
    }

    fn metrics(&self, ensemble: Option<PathBuf>, partition_attr: Option<String>) -> Result<()> {
        let path = self.ensemble_path(ensemble);
        let ens = io::read_ensemble(&path)?;
        let attr = partition_attr.or_else(|| self.cfg.ppc.partition_attr.clone());
        let columns = metric_columns(&ens, &self.cfg.metrics()?, attr.as_deref())?;
        let out = self.out.join("metrics.csv");
        io::write_metric_table(&out, &columns)?;
        println!("wrote {}", out.display());
        Ok(())
    }

    fn ingest(&self, votes: &[PathBuf], parties: &[PathBuf], threshold: f64) -> Result<()> {
        if parties.len() != 1 && parties.len() != votes.len() {
            return Err(CliError::config("give one --parties file, or one per --votes file"));
        }
        let mut members = Vec::with_capacity(votes.len());
        for (idx, v) in votes.iter().enumerate() {
            let table = rollcall::read_votes(v)?;
            let party = rollcall::read_parties(&parties[idx.min(parties.len() - 1)])?;
            let net = rollcall::ingest(&table, &party, threshold)?;
            for w in &net.warnings {
                log::warn!("{}: {w}", v.display());
            }
            members.push((net.graph, net.covariates));
        }
        let ens = Ensemble::new(members)?;
        let manifest = io::write_ensemble(&self.data_dir(), &ens)?;
        println!("wrote {} networks to {}", ens.len(), manifest.display());
        Ok(())
    }

    fn reproduce(&self, replicates: usize) -> Result<()> {
        if replicates == 0 {
            return Err(CliError::config("--replicate must be at least 1"));
        }
        self.cfg.validate()?;
        let seeds = harness::replicate_seeds(self.cfg.seed, replicates);
        let outcomes = seeds
            .par_iter()
            .map(|&s| harness::run_replicate(&self.cfg, s))
            .collect::<Result<Vec<_>>>()?;
        let dir = self.out.join("reproduce");
        write_reproduction(&dir, &outcomes, &self.cfg)?;
        print!("{}", std::fs::read_to_string(dir.join("summary.csv")).at(&dir)?);
        Ok(())
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Writes `replicates.csv`, `bias.csv` and `summary.csv`.
pub fn write_reproduction(dir: &Path, outcomes: &[ReplicateOutcome], cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    let true_k = outcomes.first().map_or(0, |o| o.truth.len());
    let k_max = cfg.fit.k_max;
    let mut w = csv::Writer::from_path(dir.join("replicates.csv")).map_err(|e| CliError::format(dir, e.to_string()))?;
    let mut header = vec![
        "replicate".to_string(),
        "seed".into(),
        "selected_k".into(),
        "ari".into(),
    ];
    header.extend((1..=k_max).map(|k| format!("dic_{k}")));
    w.write_record(&header)
        .map_err(|e| CliError::format(dir, e.to_string()))?;
    for (r, o) in outcomes.iter().enumerate() {
        let mut row = vec![
            (r + 1).to_string(),
            o.seed.to_string(),
            o.report.selected.to_string(),
            num(o.ari),
        ];
        row.extend(o.report.rows.iter().map(|d| num(d.dic)));
        w.write_record(&row).map_err(|e| CliError::format(dir, e.to_string()))?;
    }
    w.flush().at(dir)?;

    let terms: Vec<String> = cfg
        .model
        .terms
        .iter()
        .map(|t| t.split_whitespace().next().unwrap_or(t).to_string())
        .collect();
    let mut w = csv::Writer::from_path(dir.join("bias.csv")).map_err(|e| CliError::format(dir, e.to_string()))?;
    w.write_record(["replicate", "cluster", "term", "truth", "bias"])
        .map_err(|e| CliError::format(dir, e.to_string()))?;
    let mut per_cell: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); terms.len()]; true_k];
    for (r, o) in outcomes.iter().enumerate() {
        let Some(bias) = &o.bias else { continue };
        for (c, (row, truth)) in bias.iter().zip(&o.truth).enumerate() {
            for (t, (b, tv)) in row.iter().zip(truth).enumerate() {
                per_cell[c][t].push(*b);
                w.write_record([
                    (r + 1).to_string(),
                    (c + 1).to_string(),
                    terms[t].clone(),
                    num(*tv),
                    num(*b),
                ])
                .map_err(|e| CliError::format(dir, e.to_string()))?;
            }
        }
    }
    w.flush().at(dir)?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(|e| CliError::format(dir, e.to_string()))?;
    w.write_record(["quantity", "mean", "sd", "replicates"])
        .map_err(|e| CliError::format(dir, e.to_string()))?;
    let aris: Vec<f64> = outcomes.iter().map(|o| o.ari).collect();
    let hits: Vec<f64> = outcomes
        .iter()
        .map(|o| (o.report.selected == true_k) as u8 as f64)
        .collect();
    let mut lines = vec![("ari".to_string(), aris), (format!("selected_k_equals_{true_k}"), hits)];
    for (c, cells) in per_cell.iter().enumerate() {
        for (t, values) in cells.iter().enumerate() {
            if !values.is_empty() {
                lines.push((format!("bias_cluster{}_{}", c + 1, terms[t]), values.clone()));
            }
        }
    }
    for (name, values) in lines {
        let (m, s) = mean_sd(&values);
        w.write_record([name, num(m), num(s), values.len().to_string()])
            .map_err(|e| CliError::format(dir, e.to_string()))?;
    }
    w.flush().at(dir)
}
