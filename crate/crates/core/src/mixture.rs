//! Metropolis-within-Gibbs sampling for finite mixtures of ERGMs.
//!
//! Each iteration draws the labels `z` from their full conditional, the
//! weights `tau` from their Dirichlet full conditional, then makes one
//! random-walk Metropolis move per cluster parameter vector, with the
//! pseudo-likelihood standing in for the intractable ERGM likelihood.
//! Clusters are finally permuted so the edges coefficients are nondecreasing.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::engine::PlDesign;
use crate::error::{Error, Result};
use crate::graph::Ensemble;
use crate::kmeans::kmeans;
use crate::rng::{self, domain};
use crate::terms::ModelSpec;

/// Hyperparameters and the random-walk scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// Dirichlet concentration, one entry per cluster.
    pub alpha: Vec<f64>,
    /// Prior mean of every cluster's parameter vector.
    pub mu: Vec<f64>,
    /// Diagonal of the prior covariance.
    pub psi_diag: Vec<f64>,
    /// Standard deviation of the Gaussian random-walk proposal.
    pub proposal_sd: f64,
}

impl PriorSpec {
    pub const DEFAULT_ALPHA: f64 = 3.0;
    pub const DEFAULT_PSI: f64 = 25.0;
    pub const DEFAULT_PROPOSAL_SD: f64 = 0.05;

    /// Default hyperparameters for `k` clusters. With the size offset on and an
    /// a-priori expected degree, the edges prior mean is its logarithm;
    /// everything else is centred at zero.
    pub fn defaults(k: usize, spec: &ModelSpec, expected_degree: Option<f64>) -> Self {
        let mut mu = vec![0.0; spec.dim()];
        if let (true, Some(d)) = (spec.size_offset(), expected_degree) {
            mu[0] = d.ln();
        }
        PriorSpec {
            alpha: vec![Self::DEFAULT_ALPHA; k],
            mu,
            psi_diag: vec![Self::DEFAULT_PSI; spec.dim()],
            proposal_sd: Self::DEFAULT_PROPOSAL_SD,
        }
    }

    pub fn validate(&self, k: usize, p: usize) -> Result<()> {
        if self.alpha.len() != k {
            return Err(Error::config(format!(
                "alpha has {} entries for K = {k}",
                self.alpha.len()
            )));
        }
        if self.mu.len() != p || self.psi_diag.len() != p {
            return Err(Error::config(format!("prior mean/variance must have {p} entries")));
        }
        if self.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::config("alpha must be positive"));
        }
        if self.psi_diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config("prior variances must be positive"));
        }
        if self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("prior mean must be finite"));
        }
        if !(self.proposal_sd > 0.0 && self.proposal_sd.is_finite()) {
            return Err(Error::config("proposal_sd must be positive"));
        }
        Ok(())
    }

    /// Log density of the diagonal multivariate normal prior.
    pub fn log_prior_theta(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.mu)
            .zip(&self.psi_diag)
            .map(|((t, m), v)| -0.5 * ((t - m) * (t - m) / v + (std::f64::consts::TAU * v).ln()))
            .sum()
    }

    /// Log density of the Dirichlet prior on the weights.
    pub fn log_prior_tau(&self, tau: &[f64]) -> f64 {
        let a0: f64 = self.alpha.iter().sum();
        let norm = ln_gamma(a0) - self.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
        norm + tau
            .iter()
            .zip(&self.alpha)
            .map(|(t, a)| (a - 1.0) * t.ln())
            .sum::<f64>()
    }
}

/// Lanczos approximation of `ln Gamma(x)` for `x > 0`.
fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = G[0];
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * std::f64::consts::TAU.ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitStrategy {
    /// Uniform labels, prior-drawn weights, edges coefficients at the anchor
    /// and other coefficients uniform on (-0.1, 0.1).
    Random { edges_anchor: f64 },
    /// Per-network MPLE clustered with K-means.
    MpleKmeans,
}

impl InitStrategy {
    pub const DEFAULT_EDGES_ANCHOR: f64 = -2.0;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub init: InitStrategy,
    pub seed: u64,
}

impl ChainConfig {
    pub const DEFAULT_THIN: usize = 50;

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iterations {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than the total iterations ({})",
                self.burn_in, self.total_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::config("thinning interval must be at least 1"));
        }
        Ok(())
    }

    /// Number of retained draws, `floor((T - B) / thin)`.
    pub fn retained_draws(&self) -> usize {
        (self.total_iterations - self.burn_in) / self.thin
    }
}

/// Labels, weights and per-cluster parameters. Labels are `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    pub z: Vec<usize>,
    pub tau: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub nu: Vec<usize>,
}

impl MixtureState {
    pub fn k(&self) -> usize {
        self.tau.len()
    }

    /// Recomputes the cluster counts from `z`.
    pub fn recount(&mut self) {
        self.nu = vec![0; self.k()];
        for &z in &self.z {
            self.nu[z] += 1;
        }
    }
}

/// Permutes clusters jointly (theta rows, tau, labels) so that the edges
/// coefficients are nondecreasing. Ties keep their order. Returns the
/// permutation: new cluster `r` was old cluster `perm[r]`.
pub fn relabel(state: &mut MixtureState) -> Vec<usize> {
    let k = state.k();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&a, &b| state.theta[a][0].total_cmp(&state.theta[b][0]));
    if perm.iter().enumerate().all(|(r, &p)| r == p) {
        return perm;
    }
    let mut inverse = vec![0; k];
    for (r, &p) in perm.iter().enumerate() {
        inverse[p] = r;
    }
    state.theta = perm.iter().map(|&p| state.theta[p].clone()).collect();
    state.tau = perm.iter().map(|&p| state.tau[p]).collect();
    state.nu = perm.iter().map(|&p| state.nu[p]).collect();
    for z in &mut state.z {
        *z = inverse[*z];
    }
    perm
}

/// Weight draw from `Dirichlet(alpha + nu)`.
pub fn update_weights<R: Rng + ?Sized>(state: &mut MixtureState, priors: &PriorSpec, rng: &mut R) {
    let shape: Vec<f64> = priors.alpha.iter().zip(&state.nu).map(|(a, &n)| a + n as f64).collect();
    state.tau = dirichlet(&shape, rng);
}

fn dirichlet<R: Rng + ?Sized>(shape: &[f64], rng: &mut R) -> Vec<f64> {
    if shape.len() == 1 {
        return vec![1.0];
    }
    let g: Vec<f64> = shape
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        g.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / shape.len() as f64; shape.len()]
    }
}

/// Normalised probabilities from log-weights.
pub(crate) fn softmax(logw: &[f64]) -> Vec<f64> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (k, &p) in probs.iter().enumerate() {
        if u < p {
            return k;
        }
        u -= p;
    }
    // rounding slack: last cluster with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Metropolis acceptance bookkeeping for one cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptanceCount {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptanceCount {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One retained state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    /// 1-based iteration number.
    pub iteration: usize,
    pub tau: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub z: Vec<usize>,
    /// Unnormalised log posterior (pseudo-likelihood based) of the state.
    pub log_posterior: f64,
}

/// Thinned post-burn-in draws with chain metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub k: usize,
    pub draws: Vec<Draw>,
    pub config: Option<ChainConfig>,
    /// Per-cluster acceptance counts over all iterations.
    pub acceptance: Vec<AcceptanceCount>,
    pub warnings: Vec<String>,
}

impl PosteriorSample {
    /// A sample built from stored draws only (e.g. read back from disk).
    pub fn from_draws(k: usize, draws: Vec<Draw>) -> Result<Self> {
        for d in &draws {
            if d.tau.len() != k || d.theta.len() != k {
                return Err(Error::invalid(format!(
                    "draw at iteration {} does not have {k} clusters",
                    d.iteration
                )));
            }
        }
        Ok(PosteriorSample {
            k,
            draws,
            config: None,
            acceptance: vec![AcceptanceCount::default(); k],
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Posterior mean of each cluster's parameter vector.
    pub fn theta_mean(&self) -> Vec<Vec<f64>> {
        let l = self.draws.len().max(1) as f64;
        let p = self.draws.first().map_or(0, |d| d.theta[0].len());
        let mut mean = vec![vec![0.0; p]; self.k];
        for d in &self.draws {
            for (m, t) in mean.iter_mut().zip(&d.theta) {
                for (a, b) in m.iter_mut().zip(t) {
                    *a += b / l;
                }
            }
        }
        mean
    }

    pub fn tau_mean(&self) -> Vec<f64> {
        let l = self.draws.len().max(1) as f64;
        let mut mean = vec![0.0; self.k];
        for d in &self.draws {
            for (m, t) in mean.iter_mut().zip(&d.tau) {
                *m += t / l;
            }
        }
        mean
    }
}

/// A model specification bound to the pseudo-likelihood designs of an
/// observed ensemble. Designs are computed once; every likelihood evaluation
/// afterwards is a sweep over their distinct rows.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    spec: ModelSpec,
    designs: Vec<PlDesign>,
}

impl MixtureModel {
    pub fn new(spec: ModelSpec, ens: &Ensemble) -> Result<Self> {
        let designs = ens
            .iter()
            .enumerate()
            .map(|(i, net)| {
                PlDesign::new(&spec, &net.graph, &net.covariates).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("network {i}: {m}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureModel { spec, designs })
    }

    /// Builds a model from precomputed designs; an empty list gives a
    /// prior-only sampler.
    pub fn from_designs(spec: ModelSpec, designs: Vec<PlDesign>) -> Result<Self> {
        if designs.iter().any(|d| d.dim() != spec.dim()) {
            return Err(Error::config("design dimension does not match the model"));
        }
        Ok(MixtureModel { spec, designs })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn designs(&self) -> &[PlDesign] {
        &self.designs
    }

    /// Ensemble size `m`.
    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    /// `log_pl[i][k]`: log pseudo-likelihood of network `i` under `theta[k]`.
    pub fn log_pl_matrix(&self, theta: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.designs
            .iter()
            .map(|d| theta.iter().map(|t| d.log_pl(t)).collect())
            .collect()
    }

    /// Initial state. The second element lists recoverable problems, such as
    /// networks whose MPLE failed and were replaced by the ensemble median.
    pub fn init_state<R: Rng + ?Sized>(
        &self,
        k: usize,
        priors: &PriorSpec,
        strategy: InitStrategy,
        rng: &mut R,
    ) -> Result<(MixtureState, Vec<String>)> {
        if k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        priors.validate(k, self.spec.dim())?;
        let p = self.spec.dim();
        let m = self.designs.len();
        let mut warnings = Vec::new();
        let mut state = match strategy {
            InitStrategy::Random { edges_anchor } => {
                let z = (0..m).map(|_| rng.random_range(0..k)).collect();
                let tau = dirichlet(&priors.alpha, rng);
                let theta = (0..k)
                    .map(|_| {
                        let mut t = vec![edges_anchor];
                        t.extend((1..p).map(|_| rng.random_range(-0.1..0.1)));
                        t
                    })
                    .collect();
                MixtureState {
                    z,
                    tau,
                    theta,
                    nu: Vec::new(),
                }
            }
            InitStrategy::MpleKmeans => {
                let mut estimates: Vec<Option<Vec<f64>>> = Vec::with_capacity(m);
                for (i, d) in self.designs.iter().enumerate() {
                    match d.mple(0.0) {
                        Ok(t) => estimates.push(Some(t)),
                        Err(e) => {
                            warnings.push(format!("network {i}: MPLE failed ({e}); using ensemble median"));
                            estimates.push(None);
                        }
                    }
                }
                let ok: Vec<&Vec<f64>> = estimates.iter().flatten().collect();
                let median: Vec<f64> = if ok.is_empty() {
                    warnings.push("no network produced an MPLE; using the prior mean".into());
                    priors.mu.clone()
                } else {
                    (0..p)
                        .map(|c| {
                            let mut col: Vec<f64> = ok.iter().map(|t| t[c]).collect();
                            col.sort_by(f64::total_cmp);
                            let h = col.len() / 2;
                            if col.len() % 2 == 1 {
                                col[h]
                            } else {
                                0.5 * (col[h - 1] + col[h])
                            }
                        })
                        .collect()
                };
                let points: Vec<Vec<f64>> = estimates
                    .into_iter()
                    .map(|e| e.unwrap_or_else(|| median.clone()))
                    .collect();
                let fit = kmeans(&points, k, rng)?;
                let mut nu = vec![0usize; k];
                for &l in &fit.labels {
                    nu[l] += 1;
                }
                let theta = (0..k)
                    .map(|c| {
                        if nu[c] == 0 {
                            fit.centroids[c].clone()
                        } else {
                            let mut mean = vec![0.0; p];
                            for (pt, _) in points.iter().zip(&fit.labels).filter(|(_, &l)| l == c) {
                                for (a, b) in mean.iter_mut().zip(pt) {
                                    *a += b / nu[c] as f64;
                                }
                            }
                            mean
                        }
                    })
                    .collect();
                let tau = nu.iter().map(|&n| n as f64 / m as f64).collect();
                MixtureState {
                    z: fit.labels,
                    tau,
                    theta,
                    nu,
                }
            }
        };
        state.recount();
        relabel(&mut state);
        Ok((state, warnings))
    }

    /// Draws every label from its full conditional,
    /// `P(z_i = k) ∝ tau_k * PL(y_i | theta_k)`, then recounts `nu`.
    pub fn update_assignments<R: Rng + ?Sized>(&self, state: &mut MixtureState, rng: &mut R) {
        let ll = self.log_pl_matrix(&state.theta);
        self.assign_from(state, &ll, rng);
    }

    fn assign_from<R: Rng + ?Sized>(&self, state: &mut MixtureState, ll: &[Vec<f64>], rng: &mut R) {
        let log_tau: Vec<f64> = state.tau.iter().map(|t| t.ln()).collect();
        let mut logw = vec![0.0; state.k()];
        for (i, row) in ll.iter().enumerate() {
            for (k, w) in logw.iter_mut().enumerate() {
                *w = if log_tau[k] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    log_tau[k] + row[k]
                };
            }
            state.z[i] = sample_categorical(&softmax(&logw), rng);
        }
        state.recount();
    }

    /// One random-walk Metropolis move per cluster. An empty cluster makes a
    /// prior-only move.
    pub fn update_thetas<R: Rng + ?Sized>(
        &self,
        state: &mut MixtureState,
        priors: &PriorSpec,
        acceptance: &mut [AcceptanceCount],
        rng: &mut R,
    ) {
        let mut ll = self.log_pl_matrix(&state.theta);
        self.thetas_with(state, priors, acceptance, &mut ll, rng);
    }

    /// `ll[i][k]` must hold the log pseudo-likelihood of network `i` under the
    /// current `theta[k]`; it is kept current. A proposal is scored on every
    /// network, so after an accepted move the next label update needs no new
    /// likelihood evaluations.
    fn thetas_with<R: Rng + ?Sized>(
        &self,
        state: &mut MixtureState,
        priors: &PriorSpec,
        acceptance: &mut [AcceptanceCount],
        ll: &mut [Vec<f64>],
        rng: &mut R,
    ) {
        let mut scored = vec![0.0; self.designs.len()];
        for k in 0..state.k() {
            let current = &state.theta[k];
            let proposal: Vec<f64> = current
                .iter()
                .map(|t| t + priors.proposal_sd * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect();
            let mut log_ratio = priors.log_prior_theta(&proposal) - priors.log_prior_theta(current);
            for (i, d) in self.designs.iter().enumerate() {
                scored[i] = d.log_pl(&proposal);
                if state.z[i] == k {
                    log_ratio += scored[i] - ll[i][k];
                }
            }
            acceptance[k].proposed += 1;
            if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                acceptance[k].accepted += 1;
                state.theta[k] = proposal;
                for (row, &v) in ll.iter_mut().zip(&scored) {
                    row[k] = v;
                }
            }
        }
    }

    /// Unnormalised log posterior of a state.
    pub fn log_posterior(&self, state: &MixtureState, priors: &PriorSpec) -> f64 {
        let mut lp = priors.log_prior_tau(&state.tau);
        lp += state.theta.iter().map(|t| priors.log_prior_theta(t)).sum::<f64>();
        for (d, &z) in self.designs.iter().zip(&state.z) {
            lp += state.tau[z].ln() + d.log_pl(&state.theta[z]);
        }
        lp
    }

    /// Runs the full sampler for `k` clusters. The chain's random stream is
    /// derived from `config.seed` and `k`, so chains for different `k` are
    /// independent and each is reproducible.
    pub fn run_chain(&self, k: usize, priors: &PriorSpec, config: &ChainConfig) -> Result<PosteriorSample> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, domain::CHAIN, k as u64);
        let (mut state, warnings) = self.init_state(k, priors, config.init, &mut rng)?;
        let mut acceptance = vec![AcceptanceCount::default(); k];
        let mut draws = Vec::with_capacity(config.retained_draws());
        let mut ll = self.log_pl_matrix(&state.theta);
        for t in 1..=config.total_iterations {
            self.assign_from(&mut state, &ll, &mut rng);
            update_weights(&mut state, priors, &mut rng);
            self.thetas_with(&mut state, priors, &mut acceptance, &mut ll, &mut rng);
            let perm = relabel(&mut state);
            if perm.iter().enumerate().any(|(r, &p)| r != p) {
                for row in &mut ll {
                    *row = perm.iter().map(|&p| row[p]).collect();
                }
            }
            if t > config.burn_in && (t - config.burn_in).is_multiple_of(config.thin) {
                draws.push(Draw {
                    iteration: t,
                    tau: state.tau.clone(),
                    theta: state.theta.clone(),
                    z: state.z.clone(),
                    log_posterior: self.log_posterior(&state, priors),
                });
            }
        }
        for w in &warnings {
            log::warn!("K = {k}: {w}");
        }
        Ok(PosteriorSample {
            k,
            draws,
            config: Some(*config),
            acceptance,
            warnings,
        })
    }
}
