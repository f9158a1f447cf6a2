//! Choosing the number of clusters and using a fitted mixture: observed DIC,
//! the relative-difference rule, membership probabilities and
//! posterior-predictive ensembles.

use rand::Rng;
use rayon::prelude::*;

use crate::engine::{simulate_graph, SamplerConfig};
use crate::error::{Error, Result};
use crate::graph::{Ensemble, NodeCovariates};
use crate::mixture::{log_sum_exp, softmax, MixtureModel, PosteriorSample};
use crate::rng::{self, domain};
use crate::terms::ModelSpec;

pub const DEFAULT_EPSILON: f64 = -0.005;

/// `a[l][i] = log sum_k tau_k^l PL(y_i | theta_k^l)`, one row per draw.
fn mixture_log_densities(post: &PosteriorSample, model: &MixtureModel) -> Result<Vec<Vec<f64>>> {
    if post.is_empty() {
        return Err(Error::invalid("posterior sample has no draws"));
    }
    Ok(post
        .draws
        .par_iter()
        .map(|d| {
            let log_tau: Vec<f64> = d.tau.iter().map(|t| t.ln()).collect();
            model
                .designs()
                .iter()
                .map(|design| {
                    let terms: Vec<f64> = d
                        .theta
                        .iter()
                        .zip(&log_tau)
                        .map(|(t, lt)| lt + design.log_pl(t))
                        .collect();
                    log_sum_exp(&terms)
                })
                .collect()
        })
        .collect())
}

/// Observed DIC, `-4 E + 2 log P`, where `E` averages the mixture
/// log pseudo-likelihood of the ensemble over draws and `log P` is the log of
/// the draw-averaged mixture pseudo-likelihood, network by network.
pub fn observed_dic(post: &PosteriorSample, model: &MixtureModel) -> Result<f64> {
    let a = mixture_log_densities(post, model)?;
    let l = a.len() as f64;
    let mean_ll: f64 = a.iter().map(|row| row.iter().sum::<f64>()).sum::<f64>() / l;
    let log_p: f64 = (0..model.len())
        .map(|i| {
            let col: Vec<f64> = a.iter().map(|row| row[i]).collect();
            log_sum_exp(&col) - l.ln()
        })
        .sum();
    Ok(-4.0 * mean_ll + 2.0 * log_p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicRow {
    pub k: usize,
    pub dic: f64,
    /// Relative difference to the previous K; absent for K = 1 or when the
    /// previous DIC is zero.
    pub rd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicReport {
    pub rows: Vec<DicRow>,
    pub selected: usize,
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

/// Applies the relative-difference rule to DIC values for `K = 1, 2, ...`
/// (`dics[0]` is K = 1). The selected K is one less than the first K whose
/// relative change is at least `epsilon`, or the largest K if none is.
///
/// When a previous DIC is not positive the relative difference is
/// meaningless, so that step compares `DIC_k - DIC_{k-1}` with
/// `epsilon * |DIC_{k-1}|` instead and a warning is recorded.
pub fn select_k(dics: &[f64], epsilon: f64) -> Result<DicReport> {
    if dics.is_empty() {
        return Err(Error::invalid("no DIC values to select from"));
    }
    if let Some(d) = dics.iter().find(|d| !d.is_finite()) {
        return Err(Error::invalid(format!("DIC value {d} is not finite")));
    }
    if epsilon.is_nan() {
        return Err(Error::invalid("epsilon is NaN"));
    }
    let mut rows = vec![DicRow {
        k: 1,
        dic: dics[0],
        rd: None,
    }];
    let mut warnings = Vec::new();
    let mut selected = None;
    for (idx, pair) in dics.windows(2).enumerate() {
        let k = idx + 2;
        let (prev, cur) = (pair[0], pair[1]);
        let rd = (prev != 0.0).then(|| (cur - prev) / prev);
        let qualifies = if prev > 0.0 {
            rd.is_some_and(|r| r >= epsilon)
        } else {
            warnings.push(format!(
                "DIC for K = {} is not positive ({prev}); using the absolute-difference rule at K = {k}",
                k - 1
            ));
            cur - prev >= epsilon * prev.abs()
        };
        if qualifies && selected.is_none() {
            selected = Some(k - 1);
        }
        rows.push(DicRow { k, dic: cur, rd });
    }
    Ok(DicReport {
        selected: selected.unwrap_or(dics.len()),
        rows,
        epsilon,
        warnings,
    })
}

/// Posterior membership probabilities with hard labels (row argmax, lowest
/// index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    pub probs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Averages each draw's conditional label probabilities over the draws.
pub fn membership_probs(post: &PosteriorSample, model: &MixtureModel) -> Result<MembershipMatrix> {
    if post.is_empty() {
        return Err(Error::invalid("posterior sample has no draws"));
    }
    let l = post.len() as f64;
    let per_draw: Vec<Vec<Vec<f64>>> = post
        .draws
        .par_iter()
        .map(|d| {
            let log_tau: Vec<f64> = d.tau.iter().map(|t| t.ln()).collect();
            model
                .designs()
                .iter()
                .map(|design| {
                    let logw: Vec<f64> = d
                        .theta
                        .iter()
                        .zip(&log_tau)
                        .map(|(t, lt)| lt + design.log_pl(t))
                        .collect();
                    softmax(&logw)
                })
                .collect()
        })
        .collect();
    let mut probs = vec![vec![0.0; post.k]; model.len()];
    for draw in &per_draw {
        for (row, p) in probs.iter_mut().zip(draw) {
            for (a, b) in row.iter_mut().zip(p) {
                *a += b / l;
            }
        }
    }
    for row in &mut probs {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    let labels = probs
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (k, &p)| if p > best.1 { (k, p) } else { best },
                )
                .0
        })
        .collect();
    Ok(MembershipMatrix { probs, labels })
}

/// Simulates `count` replicates of every frame. For each graph a stored draw
/// is picked uniformly, a cluster is drawn from its weights, and a network is
/// simulated from that cluster's parameters. Output is replicate-major:
/// replicate 0 frame 0, replicate 0 frame 1, ... Each replicate has its own
/// random stream, so results do not depend on the thread count. `sampler`
/// gives the graph-sampler settings for a frame of `n` nodes.
pub fn posterior_predictive<F>(
    post: &PosteriorSample,
    spec: &ModelSpec,
    frames: &[NodeCovariates],
    count: usize,
    sampler: F,
    seed: u64,
) -> Result<Ensemble>
where
    F: Fn(usize) -> SamplerConfig + Sync,
{
    if post.is_empty() {
        return Err(Error::invalid("posterior sample has no draws"));
    }
    if frames.is_empty() {
        return Err(Error::invalid("no frames to simulate on"));
    }
    if count == 0 {
        return Err(Error::invalid("replicate count must be at least 1"));
    }
    for frame in frames {
        spec.bind(frame)?;
    }
    let replicates: Vec<Vec<_>> = (0..count)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, domain::PREDICTIVE, r as u64);
            frames
                .iter()
                .map(|x| {
                    let draw = &post.draws[rng.random_range(0..post.len())];
                    let k = pick(&draw.tau, &mut rng);
                    let n = x.node_count();
                    let cfg = sampler(n);
                    let g = simulate_graph(spec, &draw.theta[k], n, x, cfg, &mut rng)?;
                    Ok((g, x.clone()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(replicates.into_iter().flatten().collect())
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
