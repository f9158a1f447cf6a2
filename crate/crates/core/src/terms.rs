//! ERGM terms: sufficient statistics, change statistics and the map from
//! parameters to natural parameters.
//!
//! Only linear natural parameters are supported. The one exception is the
//! optional size offset, which adds `-ln n` to the edges coefficient
//! (equivalent to the reference measure `h(y) = n^(-edges)`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeCovariates};

/// One sufficient statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// Number of edges.
    Edges,
    /// Geometrically weighted edgewise shared partners with a fixed decay.
    Gwesp { decay: f64 },
    /// Edges whose endpoints share the same value of `attr`.
    NodeMatch { attr: String },
    /// Edges with both endpoints at `level` of `attr`.
    EdgesWithinLevel { attr: String, level: String },
    /// Edges joining `level_a` to `level_b` of `attr` (either orientation).
    EdgesBetweenLevels {
        attr: String,
        level_a: String,
        level_b: String,
    },
}

impl Term {
    fn attribute(&self) -> Option<&str> {
        match self {
            Term::Edges | Term::Gwesp { .. } => None,
            Term::NodeMatch { attr } | Term::EdgesWithinLevel { attr, .. } | Term::EdgesBetweenLevels { attr, .. } => {
                Some(attr)
            }
        }
    }

    /// Short column label, e.g. `gwesp.0.25` or `mix.party.D.R`.
    pub fn label(&self) -> String {
        match self {
            Term::Edges => "edges".into(),
            Term::Gwesp { decay } => format!("gwesp.{decay}"),
            Term::NodeMatch { attr } => format!("nodematch.{attr}"),
            Term::EdgesWithinLevel { attr, level } => format!("mix.{attr}.{level}.{level}"),
            Term::EdgesBetweenLevels { attr, level_a, level_b } => format!("mix.{attr}.{level_a}.{level_b}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Edges => write!(f, "edges"),
            Term::Gwesp { decay } => write!(f, "gwesp decay={decay}"),
            Term::NodeMatch { attr } => write!(f, "nodematch attr={attr}"),
            Term::EdgesWithinLevel { attr, level } => {
                write!(f, "mix attr={attr} levels={level},{level}")
            }
            Term::EdgesBetweenLevels { attr, level_a, level_b } => {
                write!(f, "mix attr={attr} levels={level_a},{level_b}")
            }
        }
    }
}

/// Parses term entries such as `edges`, `gwesp decay=0.25`,
/// `nodematch attr=X` or `mix attr=party levels=D,R`.
impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let kind = words.next().ok_or_else(|| Error::config("empty term entry"))?;
        let mut args = std::collections::BTreeMap::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| Error::config(format!("term '{s}': expected key=value, got '{w}'")))?;
            if args.insert(k, v).is_some() {
                return Err(Error::config(format!("term '{s}': repeated key '{k}'")));
            }
        }
        let mut take = |key: &str| {
            args.remove(key)
                .ok_or_else(|| Error::config(format!("term '{s}': missing '{key}'")))
        };
        let term = match kind {
            "edges" => Term::Edges,
            "gwesp" => {
                let raw = take("decay")?;
                let decay = raw
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("term '{s}': bad decay '{raw}'")))?;
                Term::Gwesp { decay }
            }
            "nodematch" => Term::NodeMatch {
                attr: take("attr")?.to_string(),
            },
            "mix" => {
                let attr = take("attr")?.to_string();
                let levels = take("levels")?;
                let (a, b) = levels
                    .split_once(',')
                    .ok_or_else(|| Error::config(format!("term '{s}': levels must be 'a,b'")))?;
                if a == b {
                    Term::EdgesWithinLevel {
                        attr,
                        level: a.to_string(),
                    }
                } else {
                    Term::EdgesBetweenLevels {
                        attr,
                        level_a: a.to_string(),
                        level_b: b.to_string(),
                    }
                }
            }
            other => return Err(Error::config(format!("unknown term '{other}'"))),
        };
        if let Some(k) = args.keys().next() {
            return Err(Error::config(format!("term '{s}': unexpected key '{k}'")));
        }
        Ok(term)
    }
}

/// An ordered list of terms plus the size-offset flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    terms: Vec<Term>,
    size_offset: bool,
}

impl ModelSpec {
    /// The first term must be `Edges`; cluster labels are ordered on its
    /// coefficient.
    pub fn new(terms: Vec<Term>, size_offset: bool) -> Result<Self> {
        match terms.first() {
            Some(Term::Edges) => {}
            Some(t) => return Err(Error::config(format!("first term must be edges, got '{t}'"))),
            None => return Err(Error::config("model has no terms")),
        }
        for t in &terms {
            if let Term::Gwesp { decay } = t {
                if !(decay.is_finite() && *decay >= 0.0) {
                    return Err(Error::config(format!(
                        "gwesp decay must be finite and >= 0, got {decay}"
                    )));
                }
            }
        }
        Ok(ModelSpec { terms, size_offset })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn size_offset(&self) -> bool {
        self.size_offset
    }

    /// Statistic dimension `p`.
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    /// True when no term depends on other dyads, so the pseudo-likelihood is
    /// the exact likelihood.
    pub fn is_dyad_independent(&self) -> bool {
        !self.terms.iter().any(|t| matches!(t, Term::Gwesp { .. }))
    }

    /// Additive offset on the natural parameters for a graph on `n` nodes.
    pub(crate) fn eta_offset(&self, n: usize) -> Vec<f64> {
        let mut off = vec![0.0; self.dim()];
        if self.size_offset && n > 0 {
            off[0] = -(n as f64).ln();
        }
        off
    }

    /// Maps `theta` to the natural parameters `eta` for a graph on `n` nodes.
    pub fn natural_params(&self, theta: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        if n == 0 {
            return Err(Error::invalid("node count must be positive"));
        }
        Ok(theta.iter().zip(self.eta_offset(n)).map(|(t, o)| t + o).collect())
    }

    pub(crate) fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::config(format!(
                "parameter vector has length {}, model has {} terms",
                theta.len(),
                self.dim()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("parameter vector contains non-finite values"));
        }
        Ok(())
    }

    /// Resolves attribute references against a covariate set.
    pub fn bind<'a>(&'a self, x: &'a NodeCovariates) -> Result<BoundModel<'a>> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let codes = match t.attribute() {
                    None => &[][..],
                    Some(name) => x
                        .attribute(name)
                        .ok_or_else(|| Error::config(format!("term '{t}' references missing attribute '{name}'")))?
                        .codes(),
                };
                let level = |l: &str| x.attribute(t.attribute().unwrap()).and_then(|a| a.code_of(l));
                Ok(match t {
                    Term::Edges => BoundTerm::Edges,
                    Term::Gwesp { decay } => BoundTerm::Gwesp {
                        scale: decay.exp(),
                        base: 1.0 - (-decay).exp(),
                    },
                    Term::NodeMatch { .. } => BoundTerm::Match(codes),
                    Term::EdgesWithinLevel { level: l, .. } => BoundTerm::Within(codes, level(l)),
                    Term::EdgesBetweenLevels { level_a, level_b, .. } => {
                        BoundTerm::Between(codes, level(level_a), level(level_b))
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundModel {
            terms,
            n: x.node_count(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum BoundTerm<'a> {
    Edges,
    /// `scale = e^phi`, `base = 1 - e^-phi`.
    Gwesp {
        scale: f64,
        base: f64,
    },
    Match(&'a [u32]),
    Within(&'a [u32], Option<u32>),
    Between(&'a [u32], Option<u32>, Option<u32>),
}

impl BoundTerm<'_> {
    /// Indicator part of the dyad-independent terms for the pair `(i, j)`.
    #[inline]
    fn dyadic(&self, i: usize, j: usize) -> f64 {
        let hit = match *self {
            BoundTerm::Edges => true,
            BoundTerm::Match(c) => c[i] == c[j],
            BoundTerm::Within(c, l) => l.is_some_and(|l| c[i] == l && c[j] == l),
            BoundTerm::Between(c, a, b) => match (a, b) {
                (Some(a), Some(b)) => (c[i] == a && c[j] == b) || (c[i] == b && c[j] == a),
                _ => false,
            },
            BoundTerm::Gwesp { .. } => unreachable!("gwesp is not dyadic"),
        };
        if hit {
            1.0
        } else {
            0.0
        }
    }
}

/// `e^phi * (1 - (1 - e^-phi)^k)`, the weight of an edge with `k` shared partners.
#[inline]
fn gwesp_weight(scale: f64, base: f64, k: usize) -> f64 {
    scale * (1.0 - base.powi(k as i32))
}

/// A model whose attribute references have been resolved for one covariate set.
#[derive(Debug, Clone)]
pub struct BoundModel<'a> {
    terms: Vec<BoundTerm<'a>>,
    n: usize,
}

impl BoundModel<'_> {
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.node_count() != self.n {
            return Err(Error::invalid(format!(
                "graph has {} nodes, covariates cover {}",
                g.node_count(),
                self.n
            )));
        }
        Ok(())
    }

    /// Full evaluation of `g(y; X)`.
    pub fn stats(&self, g: &Graph) -> Result<Vec<f64>> {
        self.check_graph(g)?;
        let mut out = vec![0.0; self.dim()];
        for (i, j) in g.edges() {
            for (o, t) in out.iter_mut().zip(&self.terms) {
                *o += match *t {
                    BoundTerm::Gwesp { scale, base } => gwesp_weight(scale, base, g.shared_partners(i, j)),
                    ref t => t.dyadic(i, j),
                };
            }
        }
        Ok(out)
    }

    /// Writes `g(y + ij) - g(y - ij)` into `out` without touching the graph.
    ///
    /// For GWESP, with `L` the common neighbours of `i` and `j`, adding the edge
    /// contributes its own weight `w(|L|)` and moves each edge `(i,l)` and
    /// `(j,l)`, `l in L`, from `sp` to `sp + 1` shared partners, an increment of
    /// `(1 - e^-phi)^sp`.
    #[inline]
    pub(crate) fn change_into(&self, g: &Graph, i: usize, j: usize, out: &mut [f64]) {
        let present = usize::from(g.has_edge(i, j));
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = match *t {
                BoundTerm::Gwesp { scale, base } => {
                    let mut shared = 0usize;
                    let mut delta = 0.0;
                    for l in g.common_neighbors(i, j) {
                        shared += 1;
                        // shared-partner counts in the graph without (i, j)
                        let sp_il = g.shared_partners(i, l) - present;
                        let sp_jl = g.shared_partners(j, l) - present;
                        delta += base.powi(sp_il as i32) + base.powi(sp_jl as i32);
                    }
                    delta + gwesp_weight(scale, base, shared)
                }
                ref t => t.dyadic(i, j),
            };
        }
    }

    pub fn change_stats(&self, g: &Graph, i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_graph(g)?;
        g.check_dyad(i, j)?;
        let mut out = vec![0.0; self.dim()];
        self.change_into(g, i, j, &mut out);
        Ok(out)
    }
}

/// Sufficient statistics `g(y; X)`.
pub fn sufficient_stats(spec: &ModelSpec, g: &Graph, x: &NodeCovariates) -> Result<Vec<f64>> {
    spec.bind(x)?.stats(g)
}

/// Change statistics for toggling `dyad` from absent to present, all else fixed.
pub fn change_stats(spec: &ModelSpec, g: &Graph, x: &NodeCovariates, dyad: (usize, usize)) -> Result<Vec<f64>> {
    spec.bind(x)?.change_stats(g, dyad.0, dyad.1)
}
