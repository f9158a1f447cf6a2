//! Simulation designs and the replicate loop used by `simulate` and
//! `reproduce`: simulate a labelled ensemble, fit every K in range, select K,
//! then score cluster recovery (ARI) and parameter bias.

use mixergm::engine::simulate_graph;
use mixergm::metrics::adjusted_rand_index;
use mixergm::rng::{self, domain};
use mixergm::selection::{membership_probs, observed_dic, select_k, DicReport};
use mixergm::{Ensemble, MixtureModel, ModelSpec, NodeCovariates, PosteriorSample};
use rayon::prelude::*;

use crate::config::{RunConfig, SimulateConfig};
use crate::error::{CliError, Result};

/// Binary covariate with the first half of the nodes at `0`, the rest at `1`.
pub fn binary_frame(n: usize, name: &str) -> Result<NodeCovariates> {
    Ok(NodeCovariates::empty(n).with_attribute(name, (0..n).map(|v| if v < n / 2 { "0" } else { "1" }))?)
}

/// Simulates `cluster_sizes[c]` networks from `thetas[c]` for each cluster,
/// in cluster order. Returns the ensemble and 0-based true labels. Network
/// `i` uses its own random stream, so the output does not depend on threads.
pub fn simulate_ensemble(spec: &ModelSpec, design: &SimulateConfig, seed: u64) -> Result<(Ensemble, Vec<usize>)> {
    if design.thetas.len() != design.cluster_sizes.len() {
        return Err(CliError::config(format!(
            "{} parameter rows for {} cluster sizes",
            design.thetas.len(),
            design.cluster_sizes.len()
        )));
    }
    if let Some(row) = design.thetas.iter().find(|t| t.len() != spec.dim()) {
        return Err(CliError::config(format!(
            "parameter row {row:?} has {} entries; the model has {}",
            row.len(),
            spec.dim()
        )));
    }
    if design.cluster_sizes.iter().sum::<usize>() == 0 {
        return Err(CliError::config("cluster sizes sum to zero"));
    }
    let frame = binary_frame(design.nodes, &design.covariate)?;
    spec.bind(&frame)?;
    let labels: Vec<usize> = design
        .cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();
    let sampler = design.sampler.for_nodes(design.nodes);
    let graphs = labels
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut rng = rng::stream(seed, domain::SIMULATE, i as u64);
            simulate_graph(spec, &design.thetas[c], design.nodes, &frame, sampler, &mut rng)
        })
        .collect::<mixergm::Result<Vec<_>>>()?;
    let ens = Ensemble::new(graphs.into_iter().map(|g| (g, frame.clone())).collect())?;
    Ok((ens, labels))
}

/// Runs one chain per K in the configured range, in parallel. Each chain's
/// stream depends only on `seed` and its K.
pub fn fit_range(model: &MixtureModel, cfg: &RunConfig, seed: u64) -> Result<Vec<PosteriorSample>> {
    let chain = cfg.chain(seed)?;
    let ks: Vec<usize> = cfg.k_range()?.collect();
    let priors = ks
        .iter()
        .map(|&k| cfg.prior(k, model.spec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ks
        .par_iter()
        .zip(&priors)
        .map(|(&k, prior)| {
            log::info!("fitting K = {k}");
            model.run_chain(k, prior, &chain)
        })
        .collect::<mixergm::Result<Vec<_>>>()?)
}

/// DIC for each fit; fits must cover K = 1, 2, ... without gaps.
pub fn dic_report(model: &MixtureModel, fits: &[PosteriorSample], epsilon: f64) -> Result<DicReport> {
    for (idx, f) in fits.iter().enumerate() {
        if f.k != idx + 1 {
            return Err(CliError::config(format!(
                "DIC selection needs fits for K = 1..{}; K = {} is missing",
                fits.len(),
                idx + 1
            )));
        }
    }
    let dics = fits
        .par_iter()
        .map(|f| observed_dic(f, model))
        .collect::<mixergm::Result<Vec<_>>>()?;
    let report = select_k(&dics, epsilon)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub report: DicReport,
    /// ARI of the selected fit's hard labels against the truth.
    pub ari: f64,
    /// Posterior-mean parameters minus the truth, one row per true cluster
    /// ordered by edges coefficient, from the fit with the true K (when that
    /// K was fitted).
    pub bias: Option<Vec<Vec<f64>>>,
    /// Truth rows in the same order as `bias`.
    pub truth: Vec<Vec<f64>>,
}

/// Simulate, fit, select and score one replicate.
pub fn run_replicate(cfg: &RunConfig, seed: u64) -> Result<ReplicateOutcome> {
    let spec = cfg.model_spec()?;
    let (ens, labels) = simulate_ensemble(&spec, &cfg.simulate, seed)?;
    let model = MixtureModel::new(spec, &ens)?;
    let fits = fit_range(&model, cfg, seed)?;
    if cfg.fit.k_min != 1 {
        return Err(CliError::config("replicates need k_min = 1 for DIC selection"));
    }
    let report = dic_report(&model, &fits, cfg.select.epsilon)?;
    let chosen = &fits[report.selected - 1];
    let membership = membership_probs(chosen, &model)?;
    let ari = adjusted_rand_index(&labels, &membership.labels)?;

    let mut truth: Vec<Vec<f64>> = cfg
        .simulate
        .thetas
        .iter()
        .zip(&cfg.simulate.cluster_sizes)
        .filter(|(_, &s)| s > 0)
        .map(|(t, _)| t.clone())
        .collect();
    truth.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let bias = fits.iter().find(|f| f.k == truth.len()).map(|f| {
        f.theta_mean()
            .iter()
            .zip(&truth)
            .map(|(est, tr)| est.iter().zip(tr).map(|(e, t)| e - t).collect())
            .collect()
    });
    Ok(ReplicateOutcome {
        seed,
        report,
        ari,
        bias,
        truth,
    })
}

/// Seeds for `count` replicates derived from a master seed.
pub fn replicate_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|r| rng::child_seed(master, domain::REPLICATE, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_sizes_are_respected() {
        let cfg = RunConfig::default();
        let spec = cfg.model_spec().unwrap();
        let design = SimulateConfig {
            nodes: 12,
            cluster_sizes: vec![0, 5],
            ..SimulateConfig::default()
        };
        let (ens, labels) = simulate_ensemble(&spec, &design, 4).unwrap();
        assert_eq!(ens.len(), 5);
        assert!(labels.iter().all(|&l| l == 1));
        let (again, _) = simulate_ensemble(&spec, &design, 4).unwrap();
        assert_eq!(ens, again);
    }

    #[test]
    fn design_mismatch_is_config_error() {
        let cfg = RunConfig::default();
        let spec = cfg.model_spec().unwrap();
        let design = SimulateConfig {
            thetas: vec![vec![-1.0, 0.0]],
            cluster_sizes: vec![3],
            ..SimulateConfig::default()
        };
        assert_eq!(simulate_ensemble(&spec, &design, 0).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn frame_is_half_zero() {
        let x = binary_frame(5, "X").unwrap();
        let a = x.attribute("X").unwrap();
        assert_eq!(
            (0..5).map(|v| a.value(v)).collect::<Vec<_>>(),
            ["0", "0", "1", "1", "1"]
        );
    }
}
