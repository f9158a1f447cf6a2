//! Graph, covariate and ensemble containers.
//!
//! Nodes are dense indices `0..n`. Adjacency is stored as one bit row per node
//! so that shared-partner counts reduce to a popcount over `row_i & row_j`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// An undirected simple graph on `n` labelled nodes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
    edge_count: usize,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

impl Graph {
    /// The graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            words,
            bits: vec![0; words * n],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge list. Duplicate pairs collapse to one edge.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(i, j) in edges {
            g.check_dyad(i, j)?;
            if !g.has_edge(i, j) {
                g.flip(i, j);
            }
        }
        Ok(g)
    }

    /// The complete graph `K_n`.
    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for (i, j) in dyads(n) {
            g.flip(i, j);
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of unordered node pairs, `n(n-1)/2`.
    pub fn dyad_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub(crate) fn check_dyad(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::invalid(format!(
                "dyad ({i}, {j}) out of range for n = {}",
                self.n
            )));
        }
        if i == j {
            return Err(Error::invalid(format!("self-loop at node {i}")));
        }
        Ok(())
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && (self.bits[i * self.words + j / 64] >> (j % 64)) & 1 == 1
    }

    /// Flips the dyad in place without validation. Returns the new state.
    #[inline]
    pub(crate) fn flip(&mut self, i: usize, j: usize) -> bool {
        debug_assert!(i != j && i < self.n && j < self.n);
        self.bits[i * self.words + j / 64] ^= 1 << (j % 64);
        self.bits[j * self.words + i / 64] ^= 1 << (i % 64);
        let now = self.has_edge(i, j);
        if now {
            self.edge_count += 1;
        } else {
            self.edge_count -= 1;
        }
        now
    }

    /// Flips the dyad in place. Returns whether the edge is present afterwards.
    pub fn toggle(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_dyad(i, j)?;
        Ok(self.flip(i, j))
    }

    /// Returns a copy of the graph with the dyad flipped.
    pub fn toggle_edge(&self, i: usize, j: usize) -> Result<Graph> {
        let mut g = self.clone();
        g.toggle(i, j)?;
        Ok(g)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Number of common neighbours of `i` and `j`.
    #[inline]
    pub fn shared_partners(&self, i: usize, j: usize) -> usize {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        bit_indices(self.row(i).iter().copied())
    }

    pub fn common_neighbors(&self, i: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        bit_indices(self.row(i).iter().zip(self.row(j)).map(|(a, b)| a & b))
    }

    /// Edges as `(i, j)` pairs with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// All unordered pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn dyads(&self) -> impl Iterator<Item = (usize, usize)> {
        dyads(self.n)
    }

    /// Applies a node relabelling: node `v` of `self` becomes node `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        check_permutation(perm, self.n)?;
        let mut g = Graph::empty(self.n);
        for (i, j) in self.edges() {
            g.flip(perm[i], perm[j]);
        }
        Ok(g)
    }
}

fn bit_indices(words: impl Iterator<Item = u64>) -> impl Iterator<Item = usize> {
    words.enumerate().flat_map(|(w, mut bits)| {
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let t = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(w * 64 + t)
        })
    })
}

/// All unordered pairs on `n` nodes in lexicographic `i < j` order.
pub fn dyads(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::invalid(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("not a permutation"));
        }
    }
    Ok(())
}

/// A categorical node attribute, stored as level codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    levels: Vec<String>,
    codes: Vec<u32>,
}

impl Attribute {
    /// Levels in first-appearance order.
    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn code_of(&self, level: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == level).map(|p| p as u32)
    }

    pub fn value(&self, node: usize) -> &str {
        &self.levels[self.codes[node] as usize]
    }
}

/// Named categorical attributes measured on the nodes of one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeCovariates {
    n: usize,
    attrs: BTreeMap<String, Attribute>,
}

impl NodeCovariates {
    pub fn empty(n: usize) -> Self {
        NodeCovariates {
            n,
            attrs: BTreeMap::new(),
        }
    }

    /// Adds (or replaces) an attribute. Every node must receive a value.
    pub fn with_attribute<S: AsRef<str>>(mut self, name: &str, values: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut levels: Vec<String> = Vec::new();
        let mut codes = Vec::with_capacity(self.n);
        for v in values {
            let v = v.as_ref();
            let code = match levels.iter().position(|l| l == v) {
                Some(c) => c,
                None => {
                    levels.push(v.to_string());
                    levels.len() - 1
                }
            };
            codes.push(code as u32);
        }
        if codes.len() != self.n {
            return Err(Error::invalid(format!(
                "attribute '{name}' has {} values for {} nodes",
                codes.len(),
                self.n
            )));
        }
        self.attrs.insert(name.to_string(), Attribute { levels, codes });
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attrs.get(name)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attrs.keys().map(String::as_str)
    }

    /// Applies the same node relabelling as [`Graph::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut out = NodeCovariates::empty(self.n);
        for (name, attr) in &self.attrs {
            let mut values = vec![""; self.n];
            for (v, &p) in perm.iter().enumerate() {
                values[p] = attr.value(v);
            }
            out = out.with_attribute(name, values)?;
        }
        Ok(out)
    }
}

/// One observed network together with its node covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub graph: Graph,
    pub covariates: NodeCovariates,
}

/// An ordered, non-empty collection of networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ensemble {
    members: Vec<Network>,
}

impl Ensemble {
    pub fn new(members: Vec<(Graph, NodeCovariates)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("an ensemble needs at least one network"));
        }
        let members = members
            .into_iter()
            .enumerate()
            .map(|(idx, (graph, covariates))| {
                if graph.node_count() != covariates.node_count() {
                    return Err(Error::invalid(format!(
                        "network {idx}: graph has {} nodes but covariates cover {}",
                        graph.node_count(),
                        covariates.node_count()
                    )));
                }
                Ok(Network { graph, covariates })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn networks(&self) -> &[Network] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = &Network> {
        self.members.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction() {
        assert_eq!(Graph::new(3, &[]).unwrap().edge_count(), 0);
        let tri = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(tri.edge_count(), 3);
        assert_eq!(Graph::new(4, &[(0, 1), (0, 1)]).unwrap().edge_count(), 1);
        assert_eq!(Graph::new(4, &[(1, 0), (0, 1)]).unwrap().edge_count(), 1);
    }

    #[test]
    fn rejects_bad_dyads() {
        assert!(matches!(Graph::new(3, &[(0, 3)]), Err(Error::InvalidInput(_))));
        assert!(matches!(Graph::new(3, &[(1, 1)]), Err(Error::InvalidInput(_))));
        assert!(Graph::empty(3).toggle_edge(2, 2).is_err());
    }

    #[test]
    fn toggling() {
        let g = Graph::empty(3).toggle_edge(0, 1).unwrap();
        assert_eq!(g.edge_count(), 1);
        let tri = Graph::complete(3);
        let path = tri.toggle_edge(0, 1).unwrap();
        assert_eq!(path.edge_count(), 2);
        assert!(!path.has_edge(1, 0));
        assert_eq!(path.toggle_edge(1, 0).unwrap(), tri);
    }

    #[test]
    fn dyad_order() {
        assert_eq!(dyads(3).collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(dyads(1).count(), 0);
        assert_eq!(dyads(5).count(), 10);
    }

    #[test]
    fn wide_graphs_cross_word_boundaries() {
        let g = Graph::new(130, &[(0, 129), (64, 129), (63, 64)]).unwrap();
        assert_eq!(g.neighbors(129).collect::<Vec<_>>(), vec![0, 64]);
        assert_eq!(g.shared_partners(0, 64), 1);
        assert_eq!(g.common_neighbors(0, 64).collect::<Vec<_>>(), vec![129]);
        assert_eq!(g.edges().count(), 3);
    }

    #[test]
    fn covariates_require_full_coverage() {
        assert!(NodeCovariates::empty(3).with_attribute("x", ["a", "b"]).is_err());
        let x = NodeCovariates::empty(3).with_attribute("x", ["b", "a", "b"]).unwrap();
        let a = x.attribute("x").unwrap();
        assert_eq!(a.levels(), ["b", "a"]);
        assert_eq!(a.value(2), "b");
    }

    #[test]
    fn empty_ensemble_rejected() {
        assert!(Ensemble::new(vec![]).is_err());
        assert!(Ensemble::new(vec![(Graph::empty(3), NodeCovariates::empty(4))]).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..25).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
                let edges: Vec<_> = dyads(n).zip(bits).filter(|(_, b)| *b).map(|(d, _)| d).collect();
                Graph::new(n, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn toggle_is_involution(g in arb_graph(), a in 0usize..1000, b in 0usize..1000) {
            let n = g.node_count();
            let (i, j) = (a % n, b % n);
            prop_assume!(i != j);
            let once = g.toggle_edge(i, j).unwrap();
            prop_assert_ne!(&once, &g);
            prop_assert_eq!(once.toggle_edge(i, j).unwrap(), g);
        }

        #[test]
        fn degree_sum_and_dyads(g in arb_graph()) {
            let n = g.node_count();
            prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.edge_count());
            prop_assert_eq!(g.edges().count(), g.edge_count());
            let d: Vec<_> = g.dyads().collect();
            prop_assert_eq!(d.len(), n * (n - 1) / 2);
            let set: std::collections::BTreeSet<_> = d.iter().copied().collect();
            prop_assert_eq!(set.len(), d.len());
            prop_assert!(d.iter().all(|&(i, j)| i < j && j < n));
        }
    }
}
