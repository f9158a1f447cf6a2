//! Likelihood machinery for a single ERGM.
//!
//! [`PlDesign`] holds the change-statistic rows of one observed graph, grouped
//! so that identical rows are scored once. It backs the pseudo-likelihood,
//! MPLE and every likelihood evaluation inside the mixture sampler.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, EstimationFailure, Result};
use crate::graph::{dyads, Graph, NodeCovariates};
use crate::terms::{BoundModel, ModelSpec};

/// Largest node count accepted by exact enumeration (2^15 graphs).
pub const MAX_ENUMERATION_NODES: usize = 6;

/// Ridge penalty callers may fall back to when the plain MPLE fails.
pub const RIDGE_FALLBACK: f64 = 1e-4;

const MPLE_TOLERANCE: f64 = 1e-8;
const MPLE_MAX_ITER: usize = 50;
/// Coefficients beyond this magnitude are treated as a diverging fit.
const DIVERGENCE_BOUND: f64 = 30.0;

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Change-statistic design of one graph: distinct rows with the number of
/// dyads carrying each row that are present (`ones`) and absent (`zeros`).
#[derive(Debug, Clone, PartialEq)]
pub struct PlDesign {
    p: usize,
    n: usize,
    rows: Vec<f64>,
    ones: Vec<f64>,
    zeros: Vec<f64>,
    offset: Vec<f64>,
}

impl PlDesign {
    pub fn new(spec: &ModelSpec, g: &Graph, x: &NodeCovariates) -> Result<Self> {
        let model = spec.bind(x)?;
        if g.node_count() != x.node_count() {
            return Err(Error::invalid(format!(
                "graph has {} nodes, covariates cover {}",
                g.node_count(),
                x.node_count()
            )));
        }
        let p = spec.dim();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut design = PlDesign {
            p,
            n: g.node_count(),
            rows: Vec::new(),
            ones: Vec::new(),
            zeros: Vec::new(),
            offset: spec.eta_offset(g.node_count()),
        };
        let mut buf = vec![0.0; p];
        for (i, j) in g.dyads() {
            model.change_into(g, i, j, &mut buf);
            let key: Vec<u64> = buf.iter().map(|v| v.to_bits()).collect();
            let r = *index.entry(key).or_insert_with(|| {
                design.rows.extend_from_slice(&buf);
                design.ones.push(0.0);
                design.zeros.push(0.0);
                design.ones.len() - 1
            });
            if g.has_edge(i, j) {
                design.ones[r] += 1.0;
            } else {
                design.zeros[r] += 1.0;
            }
        }
        Ok(design)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of distinct change-statistic rows.
    pub fn distinct_rows(&self) -> usize {
        self.ones.len()
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.p..(r + 1) * self.p]
    }

    fn eta(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.offset).map(|(t, o)| t + o).collect()
    }

    /// Log pseudo-likelihood at `theta`. No validation; `theta.len()` must be `p`.
    #[inline]
    pub fn log_pl(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.p);
        let mut eta = [0.0f64; 16];
        let eta: &[f64] = if self.p <= 16 {
            for ((e, t), o) in eta.iter_mut().zip(theta).zip(&self.offset) {
                *e = t + o;
            }
            &eta[..self.p]
        } else {
            return self.log_pl_slow(theta);
        };
        let mut total = 0.0;
        for (r, row) in self.rows.chunks_exact(self.p).enumerate() {
            let s: f64 = row.iter().zip(eta).map(|(a, b)| a * b).sum();
            let (n1, n0) = (self.ones[r], self.zeros[r]);
            if n1 > 0.0 {
                total -= n1 * softplus(-s);
            }
            if n0 > 0.0 {
                total -= n0 * softplus(s);
            }
        }
        total
    }

    fn log_pl_slow(&self, theta: &[f64]) -> f64 {
        let eta = self.eta(theta);
        (0..self.ones.len())
            .map(|r| {
                let s: f64 = self.row(r).iter().zip(&eta).map(|(a, b)| a * b).sum();
                -self.ones[r] * softplus(-s) - self.zeros[r] * softplus(s)
            })
            .sum()
    }

    /// Score vector and observed information of the pseudo-likelihood.
    fn score_and_information(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let eta = self.eta(theta);
        let mut score = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        for r in 0..self.ones.len() {
            let x = self.row(r);
            let s: f64 = x.iter().zip(&eta).map(|(a, b)| a * b).sum();
            let prob = logistic(s);
            let total = self.ones[r] + self.zeros[r];
            let resid = self.ones[r] - total * prob;
            let w = total * prob * (1.0 - prob);
            for a in 0..p {
                score[a] += resid * x[a];
                for b in 0..=a {
                    info[a * p + b] += w * x[a] * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[b * p + a] = info[a * p + b];
            }
        }
        (score, info)
    }

    /// Maximum pseudo-likelihood estimate by Newton (IRLS) iterations with an
    /// optional ridge penalty `ridge/2 * |theta|^2`.
    pub fn mple(&self, ridge: f64) -> Result<Vec<f64>> {
        let p = self.p;
        let estimation = |kind, detail: String| Error::Estimation { kind, detail };
        if ridge == 0.0 {
            let (n1, n0): (f64, f64) = (self.ones.iter().sum(), self.zeros.iter().sum());
            if n1 == 0.0 || n0 == 0.0 {
                return Err(estimation(
                    EstimationFailure::Separation,
                    format!("all {} responses are {}", n1 + n0, if n1 == 0.0 { 0 } else { 1 }),
                ));
            }
        }
        let objective = |t: &[f64]| self.log_pl(t) - 0.5 * ridge * t.iter().map(|v| v * v).sum::<f64>();
        let mut theta = vec![0.0; p];
        let mut current = objective(&theta);
        for iter in 0..MPLE_MAX_ITER {
            let (mut score, mut info) = self.score_and_information(&theta);
            for a in 0..p {
                score[a] -= ridge * theta[a];
                info[a * p + a] += ridge;
            }
            let max_score = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            if max_score < MPLE_TOLERANCE {
                return Ok(theta);
            }
            let step = cholesky_solve(&info, &score, p).ok_or_else(|| {
                estimation(
                    EstimationFailure::RankDeficient,
                    format!("information matrix not positive definite at iteration {iter}"),
                )
            })?;
            // step halving keeps the objective monotone
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
                let value = objective(&cand);
                if value >= current - 1e-12 * current.abs() {
                    theta = cand;
                    current = value;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                return Err(estimation(
                    EstimationFailure::NoConvergence,
                    format!("line search failed at iteration {iter}, max |score| = {max_score:e}"),
                ));
            }
            if let Some(bad) = theta.iter().position(|t| t.abs() > DIVERGENCE_BOUND) {
                return Err(estimation(
                    EstimationFailure::Separation,
                    format!("coefficient {} diverged to {:.3}", bad + 1, theta[bad]),
                ));
            }
        }
        Err(estimation(
            EstimationFailure::NoConvergence,
            format!("no convergence in {MPLE_MAX_ITER} iterations"),
        ))
    }

    /// Logistic score at `theta` (without ridge term).
    pub fn score(&self, theta: &[f64]) -> Vec<f64> {
        self.score_and_information(theta).0
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `p x p`).
fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                let scale = a[i * p + i].abs().max(1.0);
                if sum <= 1e-12 * scale {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    let mut y = vec![0.0; p];
    for i in 0..p {
        let s: f64 = (0..i).map(|k| l[i * p + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| l[k * p + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * p + i];
    }
    Some(x)
}

/// Log pseudo-likelihood of `g` at `theta`.
pub fn log_pseudo_likelihood(spec: &ModelSpec, theta: &[f64], g: &Graph, x: &NodeCovariates) -> Result<f64> {
    spec.check_theta(theta)?;
    Ok(PlDesign::new(spec, g, x)?.log_pl(theta))
}

/// Maximum pseudo-likelihood estimate for one graph.
pub fn mple(spec: &ModelSpec, g: &Graph, x: &NodeCovariates) -> Result<Vec<f64>> {
    PlDesign::new(spec, g, x)?.mple(0.0)
}

/// Ridge-stabilised MPLE for designs that are separated or rank deficient.
pub fn mple_ridge(spec: &ModelSpec, g: &Graph, x: &NodeCovariates, penalty: f64) -> Result<Vec<f64>> {
    if !(penalty > 0.0) {
        return Err(Error::invalid("ridge penalty must be positive"));
    }
    PlDesign::new(spec, g, x)?.mple(penalty)
}

fn graph_from_mask(n: usize, mask: u64) -> Graph {
    let edges: Vec<_> = dyads(n)
        .enumerate()
        .filter(|(b, _)| mask >> b & 1 == 1)
        .map(|(_, d)| d)
        .collect();
    Graph::new(n, &edges).expect("dyads are valid")
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Unnormalised log-probability `eta . g(y)` of every graph on `n` nodes,
/// indexed by the edge bitmask over [`dyads`] order.
pub fn enumerate_log_weights(spec: &ModelSpec, theta: &[f64], n: usize, x: &NodeCovariates) -> Result<Vec<f64>> {
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_ENUMERATION_NODES,
        });
    }
    let eta = spec.natural_params(theta, n)?;
    let model = spec.bind(x)?;
    let d = n * n.saturating_sub(1) / 2;
    (0..1u64 << d)
        .map(|mask| {
            let st = model.stats(&graph_from_mask(n, mask))?;
            Ok(st.iter().zip(&eta).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Exact log normalising constant by enumerating all graphs on `n` nodes.
pub fn exact_log_normalizer(spec: &ModelSpec, theta: &[f64], n: usize, x: &NodeCovariates) -> Result<f64> {
    Ok(log_sum_exp(enumerate_log_weights(spec, theta, n, x)?.into_iter()))
}

/// Exact log-likelihood of `g` (small graphs only).
pub fn exact_log_likelihood(spec: &ModelSpec, theta: &[f64], g: &Graph, x: &NodeCovariates) -> Result<f64> {
    let n = g.node_count();
    let psi = exact_log_normalizer(spec, theta, n, x)?;
    let eta = spec.natural_params(theta, n)?;
    let st = spec.bind(x)?.stats(g)?;
    Ok(st.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>() - psi)
}

/// Index of `g` in the enumeration order of [`enumerate_log_weights`].
pub fn graph_mask(g: &Graph) -> u64 {
    g.dyads()
        .enumerate()
        .filter(|(_, (i, j))| g.has_edge(*i, *j))
        .fold(0, |m, (b, _)| m | 1 << b)
}

/// How the graph sampler picks the dyad to toggle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    /// Every dyad equally likely, plus a null move with the same weight so
    /// the chain stays aperiodic when every toggle would be accepted.
    UniformDyad,
    /// An existing edge or a non-edge with probability 1/2 each.
    TieNoTie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Proposals discarded before the first draw.
    pub burn_in: usize,
    /// Proposals between retained draws.
    pub interval: usize,
    pub proposal: Proposal,
}

impl SamplerConfig {
    /// Defaults for a graph on `n` nodes: burn-in `20 n^2`, interval `2 n^2`,
    /// tie/no-tie proposals.
    pub fn for_nodes(n: usize) -> Self {
        SamplerConfig {
            burn_in: 20 * n * n,
            interval: (2 * n * n).max(1),
            proposal: Proposal::TieNoTie,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::invalid("sampler interval must be at least 1"));
        }
        Ok(())
    }
}

/// Metropolis chain over graphs on a fixed node set whose stationary law is
/// the ERGM at `theta`.
pub struct GraphSampler<'a> {
    model: BoundModel<'a>,
    eta: Vec<f64>,
    cfg: SamplerConfig,
    graph: Graph,
    /// Edge list for tie/no-tie proposals, with each edge's slot in `slot`.
    edges: Vec<(u32, u32)>,
    slot: Vec<u32>,
    delta: Vec<f64>,
    burnt: bool,
    proposals: u64,
    accepted: u64,
}

impl<'a> GraphSampler<'a> {
    pub fn new(
        spec: &'a ModelSpec,
        theta: &[f64],
        x: &'a NodeCovariates,
        cfg: SamplerConfig,
        start: Graph,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = start.node_count();
        if n != x.node_count() {
            return Err(Error::invalid("start graph and covariates differ in size"));
        }
        if n < 2 {
            return Err(Error::invalid("graph simulation needs at least two nodes"));
        }
        let eta = spec.natural_params(theta, n)?;
        let model = spec.bind(x)?;
        let mut slot = vec![u32::MAX; n * n];
        let edges: Vec<(u32, u32)> = start.edges().map(|(i, j)| (i as u32, j as u32)).collect();
        for (s, &(i, j)) in edges.iter().enumerate() {
            slot[i as usize * n + j as usize] = s as u32;
        }
        Ok(GraphSampler {
            delta: vec![0.0; model.dim()],
            model,
            eta,
            cfg,
            graph: start,
            edges,
            slot,
            burnt: false,
            proposals: 0,
            accepted: 0,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    fn apply(&mut self, i: usize, j: usize) {
        let n = self.graph.node_count();
        if self.graph.flip(i, j) {
            self.slot[i * n + j] = self.edges.len() as u32;
            self.edges.push((i as u32, j as u32));
        } else {
            let s = std::mem::replace(&mut self.slot[i * n + j], u32::MAX) as usize;
            self.edges.swap_remove(s);
            if let Some(&(a, b)) = self.edges.get(s) {
                self.slot[a as usize * n + b as usize] = s as u32;
            }
        }
    }

    fn uniform_dyad<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let n = self.graph.node_count();
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        (a.min(b), a.max(b))
    }

    /// Probability that a tie/no-tie proposal picks the edge set, given the
    /// edge count.
    fn tie_probability(&self, edges: usize) -> f64 {
        if edges == 0 {
            0.0
        } else if edges == self.graph.dyad_count() {
            1.0
        } else {
            0.5
        }
    }

    /// One Metropolis-Hastings proposal. Returns whether it was accepted.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let ((i, j), log_q_ratio) = match self.cfg.proposal {
            Proposal::UniformDyad => {
                if rng.random_range(0..=self.graph.dyad_count()) == 0 {
                    self.proposals += 1;
                    return false;
                }
                (self.uniform_dyad(rng), 0.0)
            }
            Proposal::TieNoTie => {
                let e = self.edges.len();
                let nonedges = self.graph.dyad_count() - e;
                let p_tie = self.tie_probability(e);
                if rng.random::<f64>() < p_tie {
                    let (a, b) = self.edges[rng.random_range(0..e)];
                    // reverse move re-adds this dyad from nonedges + 1 candidates
                    let forward = p_tie / e as f64;
                    let reverse = (1.0 - self.tie_probability(e - 1)) / (nonedges + 1) as f64;
                    ((a as usize, b as usize), (reverse / forward).ln())
                } else {
                    let d = loop {
                        let d = self.uniform_dyad(rng);
                        if !self.graph.has_edge(d.0, d.1) {
                            break d;
                        }
                    };
                    let forward = (1.0 - p_tie) / nonedges as f64;
                    let reverse = self.tie_probability(e + 1) / (e + 1) as f64;
                    (d, (reverse / forward).ln())
                }
            }
        };
        self.model.change_into(&self.graph, i, j, &mut self.delta);
        let s: f64 = self.delta.iter().zip(&self.eta).map(|(a, b)| a * b).sum();
        let log_ratio = if self.graph.has_edge(i, j) { -s } else { s } + log_q_ratio;
        self.proposals += 1;
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            self.accepted += 1;
            self.apply(i, j);
        }
        accept
    }

    /// Advances past burn-in (once) and then one interval; returns the state.
    pub fn next_draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &Graph {
        if !self.burnt {
            for _ in 0..self.cfg.burn_in {
                self.step(rng);
            }
            self.burnt = true;
        }
        for _ in 0..self.cfg.interval {
            self.step(rng);
        }
        &self.graph
    }
}

/// One graph drawn from the ERGM at `theta` on `n` nodes, starting from the
/// empty graph.
pub fn simulate_graph<R: Rng + ?Sized>(
    spec: &ModelSpec,
    theta: &[f64],
    n: usize,
    x: &NodeCovariates,
    cfg: SamplerConfig,
    rng: &mut R,
) -> Result<Graph> {
    if n < 2 {
        // a single node has no dyads
        spec.check_theta(theta)?;
        return Ok(Graph::empty(n));
    }
    let mut sampler = GraphSampler::new(spec, theta, x, cfg, Graph::empty(n))?;
    Ok(sampler.next_draw(rng).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::Term;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edges_only() -> ModelSpec {
        ModelSpec::new(vec![Term::Edges], false).unwrap()
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pseudo_likelihood_closed_forms() {
        let s = edges_only();
        for n in [2, 5, 9] {
            let g = Graph::new(n, &[(0, 1)]).unwrap();
            let lpl = log_pseudo_likelihood(&s, &[0.0], &g, &NodeCovariates::empty(n)).unwrap();
            let d = (n * (n - 1) / 2) as f64;
            assert!((lpl + d * 2f64.ln()).abs() < 1e-12);
        }
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        for theta in [-3.0, 0.4, 7.0] {
            let lpl = log_pseudo_likelihood(&s, &[theta], &g, &NodeCovariates::empty(2)).unwrap();
            assert!((lpl - (theta - (1.0 + f64::exp(theta)).ln())).abs() < 1e-12);
        }
        assert!(log_pseudo_likelihood(&s, &[f64::NAN], &g, &NodeCovariates::empty(2)).is_err());
    }

    #[test]
    fn design_groups_rows() {
        let s = edges_only();
        let g = Graph::new(6, &[(0, 1), (2, 3)]).unwrap();
        let d = PlDesign::new(&s, &g, &NodeCovariates::empty(6)).unwrap();
        assert_eq!(d.distinct_rows(), 1);
    }

    #[test]
    fn mple_intercept_only() {
        let s = edges_only();
        let x = NodeCovariates::empty(5);
        let g = Graph::new(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let theta = mple(&s, &g, &x).unwrap()[0];
        assert!((theta - (0.3f64 / 0.7).ln()).abs() < 1e-9);

        let half = Graph::new(5, &[(0, 1), (1, 2), (3, 4), (0, 4), (2, 4)]).unwrap();
        assert!(mple(&s, &half, &x).unwrap()[0].abs() < 1e-9);
    }

    #[test]
    fn mple_with_size_offset_absorbs_log_n() {
        let s = ModelSpec::new(vec![Term::Edges], true).unwrap();
        let x = NodeCovariates::empty(5);
        let g = Graph::new(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let theta = mple(&s, &g, &x).unwrap()[0];
        assert!((theta - 5f64.ln() - (0.3f64 / 0.7).ln()).abs() < 1e-9);
    }

    #[test]
    fn mple_failures() {
        let s = edges_only();
        let x = NodeCovariates::empty(4);
        let err = mple(&s, &Graph::empty(4), &x).unwrap_err();
        assert!(matches!(
            err,
            Error::Estimation {
                kind: EstimationFailure::Separation,
                ..
            }
        ));
        // ridge fallback stays finite
        let t = mple_ridge(&s, &Graph::empty(4), &x, RIDGE_FALLBACK).unwrap();
        assert!(t[0].is_finite() && t[0] < -5.0);

        // nodematch with a constant attribute duplicates the edges column
        let s = ModelSpec::new(vec![Term::Edges, Term::NodeMatch { attr: "c".into() }], false).unwrap();
        let x = NodeCovariates::empty(4).with_attribute("c", ["a"; 4]).unwrap();
        let g = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        let err = mple(&s, &g, &x).unwrap_err();
        assert!(matches!(
            err,
            Error::Estimation {
                kind: EstimationFailure::RankDeficient,
                ..
            }
        ));
    }

    #[test]
    fn mple_is_a_local_maximum() {
        let s = ModelSpec::new(
            vec![
                Term::Edges,
                Term::Gwesp { decay: 0.25 },
                Term::NodeMatch { attr: "X".into() },
            ],
            false,
        )
        .unwrap();
        let n = 30;
        let x = NodeCovariates::empty(n)
            .with_attribute("X", (0..n).map(|i| (i % 2).to_string()))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = simulate_graph(&s, &[-2.0, 0.3, 1.0], n, &x, SamplerConfig::for_nodes(n), &mut rng).unwrap();
        let d = PlDesign::new(&s, &g, &x).unwrap();
        let hat = d.mple(0.0).unwrap();
        assert!(d.score(&hat).iter().all(|v| v.abs() < 1e-6));
        let best = d.log_pl(&hat);
        for k in 0..3 {
            for h in [-0.1, 0.1] {
                let mut t = hat.clone();
                t[k] += h;
                assert!(d.log_pl(&t) < best);
            }
        }
    }

    #[test]
    fn exact_normalizer_closed_forms() {
        let s = edges_only();
        let x = NodeCovariates::empty(3);
        assert!((exact_log_normalizer(&s, &[0.0], 3, &x).unwrap() - 8f64.ln()).abs() < 1e-12);
        for theta in [-1.3, 0.7] {
            let z = exact_log_normalizer(&s, &[theta], 3, &x).unwrap();
            assert!((z - 3.0 * (1.0 + f64::exp(theta)).ln()).abs() < 1e-12);
        }
        let g = Graph::new(3, &[(0, 2)]).unwrap();
        assert!((exact_log_likelihood(&s, &[0.0], &g, &x).unwrap() + 8f64.ln()).abs() < 1e-12);
        assert!(matches!(
            exact_log_normalizer(&s, &[0.0], 7, &NodeCovariates::empty(7)),
            Err(Error::EnumerationTooLarge { n: 7, .. })
        ));
    }

    #[test]
    fn exact_probabilities_sum_to_one() {
        let s = ModelSpec::new(vec![Term::Edges, Term::Gwesp { decay: 0.25 }], false).unwrap();
        let x = NodeCovariates::empty(4);
        let total: f64 = (0..64u64)
            .map(|m| {
                exact_log_likelihood(&s, &[-1.0, 0.5], &graph_from_mask(4, m), &x)
                    .unwrap()
                    .exp()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mask_round_trip() {
        for m in [0u64, 1, 37, 63] {
            assert_eq!(graph_mask(&graph_from_mask(4, m)), m);
        }
    }

    #[test]
    fn sampler_edge_density() {
        let s = edges_only();
        let n = 12;
        let x = NodeCovariates::empty(n);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for proposal in [Proposal::UniformDyad, Proposal::TieNoTie] {
            let cfg = SamplerConfig {
                burn_in: 2000,
                interval: 20,
                proposal,
            };
            let mut sampler = GraphSampler::new(&s, &[-1.0], &x, cfg, Graph::empty(n)).unwrap();
            let draws = 20_000;
            let mut total = 0usize;
            for _ in 0..draws {
                total += sampler.next_draw(&mut rng).edge_count();
            }
            let density = total as f64 / (draws * 66) as f64;
            assert!((density - logistic(-1.0)).abs() < 0.01, "{proposal:?}: {density}");
        }
    }

    #[test]
    fn strongly_negative_edges_give_empty_graph() {
        let s = edges_only();
        let x = NodeCovariates::empty(10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = simulate_graph(&s, &[-50.0], 10, &x, SamplerConfig::for_nodes(10), &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn sampler_keeps_edge_index_consistent() {
        let s = ModelSpec::new(vec![Term::Edges, Term::Gwesp { decay: 0.25 }], false).unwrap();
        let x = NodeCovariates::empty(15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sampler =
            GraphSampler::new(&s, &[-1.0, 0.4], &x, SamplerConfig::for_nodes(15), Graph::empty(15)).unwrap();
        for _ in 0..50 {
            sampler.next_draw(&mut rng);
            let mut listed: Vec<_> = sampler.edges.iter().map(|&(a, b)| (a as usize, b as usize)).collect();
            listed.sort();
            assert_eq!(listed, sampler.graph().edges().collect::<Vec<_>>());
        }
        assert!(sampler.acceptance_rate() > 0.0);
    }
}
