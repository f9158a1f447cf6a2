//! Graph-level descriptive metrics and comparison scores for
//! posterior-predictive checks and cluster recovery.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::Graph;

const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;
pub const DEFAULT_HELLINGER_BINS: usize = 20;

/// A named vector of per-graph metric values.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    name: String,
    values: Vec<f64>,
}

impl MetricSample {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("metric {name} has a non-finite value {v}")));
        }
        Ok(MetricSample { name, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Metrics that depend on the graph alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphMetric {
    EigenvectorCentrality,
    Transitivity,
    DegreeSd,
    InverseGeodesic,
}

impl GraphMetric {
    pub const ALL: [GraphMetric; 4] = [
        GraphMetric::EigenvectorCentrality,
        GraphMetric::Transitivity,
        GraphMetric::DegreeSd,
        GraphMetric::InverseGeodesic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphMetric::EigenvectorCentrality => "eigenvector_centrality",
            GraphMetric::Transitivity => "transitivity",
            GraphMetric::DegreeSd => "degree_sd",
            GraphMetric::InverseGeodesic => "inverse_geodesic",
        }
    }

    pub fn compute(self, g: &Graph) -> Result<f64> {
        match self {
            GraphMetric::EigenvectorCentrality => mean_eigenvector_centrality(g),
            GraphMetric::Transitivity => Ok(transitivity(g)),
            GraphMetric::DegreeSd => Ok(degree_sd(g)),
            GraphMetric::InverseGeodesic => Ok(mean_inverse_geodesic(g)),
        }
    }
}

impl fmt::Display for GraphMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GraphMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown metric '{s}'")))
    }
}

/// Mean entry of the principal eigenvector of the adjacency matrix, scaled so
/// its largest entry is 1. Power iteration runs on `A + I` from the uniform
/// vector. The empty graph scores 0.
pub fn mean_eigenvector_centrality(g: &Graph) -> Result<f64> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Ok(0.0);
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|i| g.neighbors(i).collect()).collect();
    let mut x = vec![1.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..EIGEN_MAX_ITER {
        for (i, out) in next.iter_mut().enumerate() {
            *out = x[i] + adj[i].iter().map(|&j| x[j]).sum::<f64>();
        }
        let max = next.iter().copied().fold(0.0, f64::max);
        let mut delta: f64 = 0.0;
        for (a, b) in x.iter_mut().zip(&next) {
            let v = b / max;
            delta = delta.max((v - *a).abs());
            *a = v;
        }
        if delta < EIGEN_TOL {
            return Ok(x.iter().sum::<f64>() / n as f64);
        }
    }
    Err(Error::NoConvergence {
        what: "eigenvector centrality power iteration",
        iterations: EIGEN_MAX_ITER,
    })
}

/// `3 * triangles` and the number of 2-paths.
fn closed_and_open(g: &Graph) -> (usize, usize) {
    let closed: usize = g.edges().map(|(i, j)| g.shared_partners(i, j)).sum();
    let paths: usize = g.degrees().iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    (closed, paths)
}

/// Fraction of 2-paths that are closed; 0 when there are none.
pub fn transitivity(g: &Graph) -> f64 {
    let (closed, paths) = closed_and_open(g);
    if paths == 0 {
        0.0
    } else {
        closed as f64 / paths as f64
    }
}

/// Population standard deviation of the degree sequence.
pub fn degree_sd(g: &Graph) -> f64 {
    let d = g.degrees();
    if d.is_empty() {
        return 0.0;
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<usize>() as f64 / n;
    (d.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Mean of `1 / d(i, j)` over unordered pairs, counting unreachable pairs as 0.
pub fn mean_inverse_geodesic(g: &Graph) -> f64 {
    let n = g.node_count();
    if n < 2 {
        return 0.0;
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|i| g.neighbors(i).collect()).collect();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut total = 0.0;
    for s in 0..n {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        total += dist[s + 1..]
            .iter()
            .filter(|&&d| d != usize::MAX)
            .map(|&d| 1.0 / d as f64)
            .sum::<f64>();
    }
    total / (n * (n - 1) / 2) as f64
}

/// Newman modularity of a node partition; 0 for an edgeless graph.
pub fn modularity<L: Eq + std::hash::Hash>(g: &Graph, labels: &[L]) -> Result<f64> {
    if labels.len() != g.node_count() {
        return Err(Error::invalid(format!(
            "partition has {} labels for {} nodes",
            labels.len(),
            g.node_count()
        )));
    }
    let m = g.edge_count();
    if m == 0 {
        return Ok(0.0);
    }
    let mut index = HashMap::new();
    let codes: Vec<usize> = labels
        .iter()
        .map(|l| {
            let next = index.len();
            *index.entry(l).or_insert(next)
        })
        .collect();
    let mut within = vec![0usize; index.len()];
    let mut ends = vec![0usize; index.len()];
    for (i, j) in g.edges() {
        ends[codes[i]] += 1;
        ends[codes[j]] += 1;
        if codes[i] == codes[j] {
            within[codes[i]] += 1;
        }
    }
    let m = m as f64;
    Ok(within
        .iter()
        .zip(&ends)
        .map(|(&e, &a)| e as f64 / m - (a as f64 / (2.0 * m)).powi(2))
        .sum())
}

/// Hellinger distance between the histograms of two samples on `bins`
/// shared equal-width bins over the pooled range.
pub fn hellinger(a: &MetricSample, b: &MetricSample, bins: usize) -> Result<f64> {
    hellinger_values(a.values(), b.values(), bins)
}

pub fn hellinger_values(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Hellinger distance needs two nonempty samples"));
    }
    if bins < 2 {
        return Err(Error::invalid("Hellinger distance needs at least 2 bins"));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("Hellinger distance needs finite values"));
    }
    if hi == lo {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let histogram = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in xs {
            let bin = (((x - lo) / width) as usize).min(bins - 1);
            h[bin] += 1.0 / xs.len() as f64;
        }
        h
    };
    let (p, q) = (histogram(a), histogram(b));
    let bc: f64 = p.iter().zip(&q).map(|(x, y)| (x * y).sqrt()).sum();
    Ok((1.0 - bc).clamp(0.0, 1.0).sqrt())
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Hubert–Arabie adjusted Rand index between two labelings.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "label vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::invalid("ARI needs at least two items"));
    }
    let mut table: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let row_sum: f64 = rows.values().map(|&c| pairs(c)).sum();
    let col_sum: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = row_sum * col_sum / pairs(a.len());
    let max = 0.5 * (row_sum + col_sum);
    if max == expected {
        let identical = table.len() == rows.len() && table.len() == cols.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn star() -> Graph {
        Graph::new(4, &[(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn eigenvector_centrality_values() {
        assert_eq!(mean_eigenvector_centrality(&Graph::empty(5)).unwrap(), 0.0);
        assert!(close(
            mean_eigenvector_centrality(&Graph::complete(6)).unwrap(),
            1.0,
            1e-12
        ));
        let expected = (1.0 + 3.0 / 3f64.sqrt()) / 4.0;
        assert!(close(mean_eigenvector_centrality(&star()).unwrap(), expected, 1e-8));
        assert!(close(expected, 0.6830, 1e-4));
        // bipartite square converges thanks to the shift
        let c4 = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(close(mean_eigenvector_centrality(&c4).unwrap(), 1.0, 1e-12));
        // an isolated node contributes nothing
        let tri_plus = Graph::new(4, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(close(mean_eigenvector_centrality(&tri_plus).unwrap(), 0.75, 1e-8));
    }

    #[test]
    fn transitivity_values() {
        let tri = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(transitivity(&tri), 1.0);
        assert_eq!(transitivity(&Graph::new(3, &[(0, 1), (1, 2)]).unwrap()), 0.0);
        assert_eq!(transitivity(&Graph::complete(4)), 1.0);
        assert_eq!(transitivity(&Graph::empty(4)), 0.0);
    }

    #[test]
    fn degree_sd_values() {
        assert!(close(degree_sd(&star()), 0.75f64.sqrt(), 1e-15));
        assert!(close(degree_sd(&star()), 0.8660, 1e-4));
        assert_eq!(degree_sd(&Graph::complete(5)), 0.0);
        assert_eq!(degree_sd(&Graph::empty(5)), 0.0);
    }

    #[test]
    fn inverse_geodesic_values() {
        assert_eq!(mean_inverse_geodesic(&Graph::complete(5)), 1.0);
        assert_eq!(mean_inverse_geodesic(&Graph::empty(5)), 0.0);
        let path = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(close(mean_inverse_geodesic(&path), 5.0 / 6.0, 1e-15));
    }

    #[test]
    fn modularity_values() {
        let two_triangles = Graph::new(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert!(close(
            modularity(&two_triangles, &[0, 0, 0, 1, 1, 1]).unwrap(),
            0.5,
            1e-15
        ));
        assert!(close(modularity(&two_triangles, &[7; 6]).unwrap(), 0.0, 1e-15));
        let k22 = Graph::new(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert!(close(modularity(&k22, &["a", "a", "b", "b"]).unwrap(), -0.5, 1e-15));
        assert_eq!(modularity(&Graph::empty(3), &[0, 1, 2]).unwrap(), 0.0);
        assert!(modularity(&k22, &[0, 1]).is_err());
    }

    #[test]
    fn hellinger_values_known() {
        let a = MetricSample::new("x", vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(hellinger(&a, &a, 20).unwrap(), 0.0);
        let b = MetricSample::new("x", vec![5.0, 6.0]).unwrap();
        assert_eq!(hellinger(&a, &b, 20).unwrap(), 1.0);
        let flat = MetricSample::new("x", vec![2.0; 4]).unwrap();
        assert_eq!(hellinger(&flat, &flat, 20).unwrap(), 0.0);
        assert!(hellinger(&a, &b, 1).is_err());
        assert!(MetricSample::new("x", vec![f64::NAN]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + 10.0).collect();
        let d = hellinger_values(&xs, &ys, 20).unwrap();
        assert!(close(d, 1.0, 0.01), "{d}");
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &["b", "b", "a", "a"]).unwrap(), 1.0);
        assert!(close(
            adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap(),
            -0.5,
            1e-15
        ));
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert!(adjusted_rand_index(&[0], &[0]).is_err());
        assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
    }

    /// Exhaustive pair-counting Rand index, adjusted with the same chance
    /// model, as an independent check of the contingency-table formula.
    fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut in_a, mut in_b) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                in_a += sa as u8 as f64;
                in_b += sb as u8 as f64;
                both += (sa && sb) as u8 as f64;
            }
        }
        let total = (n * (n - 1) / 2) as f64;
        let expected = in_a * in_b / total;
        (both - expected) / (0.5 * (in_a + in_b) - expected)
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (2..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
                let edges: Vec<_> = crate::graph::dyads(n)
                    .zip(bits)
                    .filter(|(_, b)| *b)
                    .map(|(d, _)| d)
                    .collect();
                Graph::new(n, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn triangle_and_path_counts_match_enumeration(g in arb_graph(6)) {
            let n = g.node_count();
            let (mut triangles, mut paths) = (0usize, 0usize);
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        let e = [g.has_edge(a, b), g.has_edge(b, c), g.has_edge(a, c)];
                        let k = e.iter().filter(|&&x| x).count();
                        if k == 3 {
                            triangles += 1;
                            paths += 3;
                        } else if k == 2 {
                            paths += 1;
                        }
                    }
                }
            }
            let (closed, open) = closed_and_open(&g);
            prop_assert_eq!(closed, 3 * triangles);
            prop_assert_eq!(open, paths);
        }

        #[test]
        fn metrics_in_range_and_relabel_invariant(g in arb_graph(12), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let n = g.node_count();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let h = g.permuted(&perm).unwrap();
            for m in GraphMetric::ALL {
                let a = m.compute(&g).unwrap();
                let b = m.compute(&h).unwrap();
                prop_assert!((a - b).abs() < 1e-9, "{} {} {}", m, a, b);
                if m != GraphMetric::DegreeSd {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&a));
                }
            }
            let labels: Vec<usize> = (0..n).map(|v| v % 3).collect();
            let permuted_labels: Vec<usize> = {
                let mut l = vec![0; n];
                for v in 0..n { l[perm[v]] = labels[v]; }
                l
            };
            let q = modularity(&g, &labels).unwrap();
            prop_assert!((q - modularity(&h, &permuted_labels).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&q));
        }

        #[test]
        fn ari_matches_pair_counting(a in proptest::collection::vec(0usize..4, 2..30), seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..3)).collect();
            let fast = adjusted_rand_index(&a, &b).unwrap();
            let slow = ari_by_pairs(&a, &b);
            if slow.is_finite() {
                prop_assert!((fast - slow).abs() < 1e-12);
            }
            let relabeled: Vec<usize> = b.iter().map(|x| 10 - x).collect();
            prop_assert!((adjusted_rand_index(&a, &relabeled).unwrap() - fast).abs() < 1e-12);
        }

        #[test]
        fn hellinger_symmetric_and_bounded(
            a in proptest::collection::vec(-5.0f64..5.0, 1..40),
            b in proptest::collection::vec(-5.0f64..5.0, 1..40),
            bins in 2usize..30,
        ) {
            let d1 = hellinger_values(&a, &b, bins).unwrap();
            let d2 = hellinger_values(&b, &a, bins).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d1));
        }
    }
}
