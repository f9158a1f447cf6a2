//! Co-voting networks from roll-call tables.
//!
//! Two senators are tied when, among the bills on which both cast a yay or a
//! nay, the share of identical votes reaches the threshold. Pairs with no
//! such bill stay unconnected.

use std::collections::HashMap;
use std::path::Path;

use mixergm::{Graph, NodeCovariates};

use crate::error::{CliError, IoContext, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vote {
    Yay,
    Nay,
    Abstain,
    Absent,
}

impl std::str::FromStr for Vote {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yay" | "yea" | "yes" | "y" | "1" => Ok(Vote::Yay),
            "nay" | "no" | "n" | "0" => Ok(Vote::Nay),
            "abstain" | "a" => Ok(Vote::Abstain),
            "absent" | "" | "na" => Ok(Vote::Absent),
            other => Err(format!("unknown vote '{other}'")),
        }
    }
}

/// Senators in row order with one vote per bill.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    pub senators: Vec<String>,
    pub votes: Vec<Vec<Vote>>,
}

/// A built co-voting network with its node covariates (`name`, `party`).
#[derive(Debug, Clone)]
pub struct CoVoting {
    pub graph: Graph,
    pub covariates: NodeCovariates,
    pub warnings: Vec<String>,
}

/// Builds the network. `party` must cover every senator in the table.
pub fn ingest(table: &VoteTable, party: &HashMap<String, String>, threshold: f64) -> Result<CoVoting> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CliError::config(format!("threshold {threshold} is outside (0, 1]")));
    }
    let n = table.senators.len();
    let mut warnings = Vec::new();
    for (s, row) in table.senators.iter().zip(&table.votes) {
        if !row.iter().any(|v| matches!(v, Vote::Yay | Vote::Nay)) {
            warnings.push(format!("senator {s} has no yay or nay votes; kept as an isolated node"));
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (mut shared, mut agree) = (0usize, 0usize);
            for (a, b) in table.votes[i].iter().zip(&table.votes[j]) {
                if matches!(a, Vote::Yay | Vote::Nay) && matches!(b, Vote::Yay | Vote::Nay) {
                    shared += 1;
                    agree += (a == b) as usize;
                }
            }
            if shared > 0 && agree as f64 >= threshold * shared as f64 {
                edges.push((i, j));
            }
        }
    }
    let parties = table
        .senators
        .iter()
        .map(|s| {
            party
                .get(s)
                .cloned()
                .ok_or_else(|| CliError::config(format!("senator {s} has no party")))
        })
        .collect::<Result<Vec<_>>>()?;
    let covariates = NodeCovariates::empty(n)
        .with_attribute("name", &table.senators)?
        .with_attribute("party", &parties)?;
    Ok(CoVoting {
        graph: Graph::new(n, &edges)?,
        covariates,
        warnings,
    })
}

/// Reads a `senator,<bill>...` table of votes.
pub fn read_votes(path: &Path) -> Result<VoteTable> {
    let file = std::fs::File::open(path).at(path)?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let bills = r
        .headers()
        .map_err(|e| CliError::format(path, e.to_string()))?
        .len()
        .saturating_sub(1);
    let mut table = VoteTable {
        senators: Vec::new(),
        votes: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, e.to_string()))?;
        table.senators.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<Vote>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::format(path, format!("row {}: {e}", line + 1)))?;
        debug_assert_eq!(row.len(), bills);
        table.votes.push(row);
    }
    Ok(table)
}

/// Reads a `senator,party` table.
pub fn read_parties(path: &Path) -> Result<HashMap<String, String>> {
    let file = std::fs::File::open(path).at(path)?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::format(path, e.to_string()))?;
        if rec.len() < 2 {
            return Err(CliError::format(path, "expected senator,party"));
        }
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Vote::*;

    fn table(rows: Vec<Vec<Vote>>) -> (VoteTable, HashMap<String, String>) {
        let senators: Vec<String> = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let party = senators.iter().map(|s| (s.clone(), "D".to_string())).collect();
        (VoteTable { senators, votes: rows }, party)
    }

    #[test]
    fn threshold_arithmetic() {
        let (t, p) = table(vec![vec![Yay; 10], vec![Yay; 10]]);
        assert!(ingest(&t, &p, 0.75).unwrap().graph.has_edge(0, 1));

        let mut seven = vec![Yay; 7];
        seven.extend([Nay; 3]);
        let (t, p) = table(vec![vec![Yay; 10], seven]);
        assert!(!ingest(&t, &p, 0.75).unwrap().graph.has_edge(0, 1));
        assert!(ingest(&t, &p, 0.7).unwrap().graph.has_edge(0, 1));
    }

    #[test]
    fn abstentions_and_absences_are_excluded() {
        let (t, p) = table(vec![
            vec![Yay, Nay, Abstain, Yay],
            vec![Yay, Nay, Yay, Absent],
            vec![Absent, Abstain, Absent, Absent],
        ]);
        let net = ingest(&t, &p, 1.0).unwrap();
        assert!(net.graph.has_edge(0, 1));
        assert_eq!(net.graph.degree(2), 0);
        assert_eq!(net.warnings.len(), 1);
    }

    #[test]
    fn zero_shared_bills_means_no_edge() {
        let (t, p) = table(vec![vec![Yay, Absent], vec![Absent, Yay]]);
        assert_eq!(ingest(&t, &p, 0.5).unwrap().graph.edge_count(), 0);
    }

    #[test]
    fn symmetric_and_column_order_invariant() {
        let rows = vec![
            vec![Yay, Nay, Yay, Nay, Yay],
            vec![Yay, Nay, Nay, Nay, Yay],
            vec![Nay, Nay, Yay, Abstain, Yay],
            vec![Yay, Yay, Yay, Nay, Absent],
        ];
        let (t, p) = table(rows.clone());
        let base = ingest(&t, &p, 0.75).unwrap().graph;

        let order = [4, 2, 0, 3, 1];
        let shuffled: Vec<Vec<Vote>> = rows.iter().map(|r| order.iter().map(|&c| r[c]).collect()).collect();
        let (t2, p2) = table(shuffled);
        assert_eq!(ingest(&t2, &p2, 0.75).unwrap().graph, base);

        let reversed: Vec<Vec<Vote>> = rows.iter().rev().cloned().collect();
        let (t3, p3) = table(reversed);
        let g3 = ingest(&t3, &p3, 0.75).unwrap().graph;
        assert_eq!(g3.permuted(&[3, 2, 1, 0]).unwrap(), base);
    }

    #[test]
    fn bad_inputs() {
        let (t, mut p) = table(vec![vec![Yay], vec![Yay]]);
        assert_eq!(ingest(&t, &p, 0.0).unwrap_err().exit_code(), 1);
        p.remove("s1");
        assert!(ingest(&t, &p, 0.75).is_err());
        assert!("maybe".parse::<Vote>().is_err());
    }
}
