//! Reading and writing the on-disk formats.
//!
//! * Ensemble manifest `index,edges_file,nodes_file`, file names relative to
//!   the manifest's directory.
//! * Edge list `i,j` with 0-based node indices.
//! * Node table `node_id,<attr>...`, one row per node.
//! * Truth table `network_index,z`.
//! * Fit directory per K: `draws.csv` (`iteration,k,tau,theta_1..theta_p`),
//!   `z.csv` (`iteration,network_index,z`), `trace.csv`, `acceptance.csv`,
//!   `chain.toml`, and a `COMPLETE` marker written last.
//!
//! Network indices and cluster labels are 1-based in every file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mixergm::metrics::GraphMetric;
use mixergm::mixture::{AcceptanceCount, Draw};
use mixergm::selection::{DicReport, MembershipMatrix};
use mixergm::{Ensemble, Graph, InitStrategy, NodeCovariates, PosteriorSample};
use serde::Serialize;

use crate::error::{CliError, IoContext, Result};
use crate::format::num;

pub const COMPLETE_MARKER: &str = "COMPLETE";

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).at(path)?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    Ok(csv::Writer::from_writer(fs::File::create(path).at(path)?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::format(path, e.to_string())
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().at(path)
}

/// Header plus rows as strings.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = reader(path)?;
    let header = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(csv_err(path))?;
    Ok((header, rows))
}

fn expect_header(path: &Path, header: &[String], expected: &[&str]) -> Result<()> {
    if header.len() < expected.len() || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(CliError::format(
            path,
            format!("expected columns {} but found {}", expected.join(","), header.join(",")),
        ));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| CliError::format(path, format!("row {line}: cannot parse {what} from '{field}'")))
}

pub fn read_graph(edges: &Path, n: usize) -> Result<Graph> {
    let (header, rows) = read_table(edges)?;
    expect_header(edges, &header, &["i", "j"])?;
    let pairs = rows
        .iter()
        .enumerate()
        .map(|(line, r)| Ok((parse(edges, line + 1, &r[0], "i")?, parse(edges, line + 1, &r[1], "j")?)))
        .collect::<Result<Vec<(usize, usize)>>>()?;
    Graph::new(n, &pairs).map_err(|e| CliError::format(edges, e.to_string()))
}

pub fn write_graph(path: &Path, g: &Graph) -> Result<()> {
    write_rows(
        path,
        &["i".into(), "j".into()],
        g.edges().map(|(i, j)| vec![i.to_string(), j.to_string()]),
    )
}

pub fn read_nodes(path: &Path) -> Result<NodeCovariates> {
    let (header, rows) = read_table(path)?;
    expect_header(path, &header, &["node_id"])?;
    let n = rows.len();
    let mut order = vec![usize::MAX; n];
    for (line, r) in rows.iter().enumerate() {
        let id: usize = parse(path, line + 1, &r[0], "node_id")?;
        if id >= n || order[id] != usize::MAX {
            return Err(CliError::format(
                path,
                format!("node ids must be 0..{n} without repeats (row {})", line + 1),
            ));
        }
        order[id] = line;
    }
    let mut x = NodeCovariates::empty(n);
    for (col, name) in header.iter().enumerate().skip(1) {
        let values: Vec<&str> = order.iter().map(|&line| rows[line][col].as_str()).collect();
        x = x
            .with_attribute(name, values)
            .map_err(|e| CliError::format(path, e.to_string()))?;
    }
    Ok(x)
}

pub fn write_nodes(path: &Path, x: &NodeCovariates) -> Result<()> {
    let names: Vec<&str> = x.attribute_names().collect();
    let mut header = vec!["node_id".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    write_rows(
        path,
        &header,
        (0..x.node_count()).map(|v| {
            let mut row = vec![v.to_string()];
            row.extend(
                names
                    .iter()
                    .map(|a| x.attribute(a).expect("listed attribute").value(v).to_string()),
            );
            row
        }),
    )
}

pub fn read_ensemble(manifest: &Path) -> Result<Ensemble> {
    let (header, rows) = read_table(manifest)?;
    expect_header(manifest, &header, &["index", "edges_file", "nodes_file"])?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut members = Vec::with_capacity(rows.len());
    for (line, r) in rows.iter().enumerate() {
        let index: usize = parse(manifest, line + 1, &r[0], "index")?;
        if index != line + 1 {
            return Err(CliError::format(
                manifest,
                format!("row {} has index {index}; indices run 1, 2, ...", line + 1),
            ));
        }
        let x = read_nodes(&base.join(&r[2]))?;
        let g = read_graph(&base.join(&r[1]), x.node_count())?;
        members.push((g, x));
    }
    Ensemble::new(members).map_err(|e| CliError::format(manifest, e.to_string()))
}

/// Writes `manifest.csv` and one edge list and node table per network.
pub fn write_ensemble(dir: &Path, ens: &Ensemble) -> Result<PathBuf> {
    fs::create_dir_all(dir).at(dir)?;
    let width = ens.len().to_string().len().max(3);
    let mut rows = Vec::with_capacity(ens.len());
    for (idx, net) in ens.iter().enumerate() {
        let stem = format!("net_{:0width$}", idx + 1);
        let edges = format!("{stem}_edges.csv");
        let nodes = format!("{stem}_nodes.csv");
        write_graph(&dir.join(&edges), &net.graph)?;
        write_nodes(&dir.join(&nodes), &net.covariates)?;
        rows.push(vec![(idx + 1).to_string(), edges, nodes]);
    }
    let manifest = dir.join("manifest.csv");
    write_rows(
        &manifest,
        &["index".into(), "edges_file".into(), "nodes_file".into()],
        rows,
    )?;
    Ok(manifest)
}

/// 0-based labels from a `network_index,z` table.
pub fn read_truth(path: &Path) -> Result<Vec<usize>> {
    let (header, rows) = read_table(path)?;
    expect_header(path, &header, &["network_index", "z"])?;
    rows.iter()
        .enumerate()
        .map(|(line, r)| {
            let z: usize = parse(path, line + 1, &r[1], "z")?;
            if z == 0 {
                return Err(CliError::format(path, "cluster labels start at 1"));
            }
            Ok(z - 1)
        })
        .collect()
}

pub fn write_truth(path: &Path, labels: &[usize]) -> Result<()> {
    write_rows(
        path,
        &["network_index".into(), "z".into()],
        labels
            .iter()
            .enumerate()
            .map(|(i, z)| vec![(i + 1).to_string(), (z + 1).to_string()]),
    )
}

pub fn fit_dir(fits: &Path, k: usize) -> PathBuf {
    fits.join(format!("K{k}"))
}

#[derive(Serialize)]
struct ChainEcho<'a> {
    k: usize,
    terms: Vec<String>,
    size_offset: bool,
    total_iterations: usize,
    burn_in: usize,
    thin: usize,
    init: &'a str,
    seed: u64,
    warnings: &'a [String],
}

pub fn write_fit(dir: &Path, post: &PosteriorSample, spec: &mixergm::ModelSpec) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    let marker = dir.join(COMPLETE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).at(&marker)?;
    }
    let p = spec.dim();
    let mut header: Vec<String> = ["iteration", "k", "tau"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=p).map(|c| format!("theta_{c}")));
    write_rows(
        &dir.join("draws.csv"),
        &header,
        post.draws.iter().flat_map(|d| {
            (0..post.k).map(move |k| {
                let mut row = vec![d.iteration.to_string(), (k + 1).to_string(), num(d.tau[k])];
                row.extend(d.theta[k].iter().map(|&t| num(t)));
                row
            })
        }),
    )?;
    write_rows(
        &dir.join("z.csv"),
        &["iteration".into(), "network_index".into(), "z".into()],
        post.draws.iter().flat_map(|d| {
            d.z.iter()
                .enumerate()
                .map(move |(i, z)| vec![d.iteration.to_string(), (i + 1).to_string(), (z + 1).to_string()])
        }),
    )?;
    write_rows(
        &dir.join("trace.csv"),
        &["iteration".into(), "log_posterior".into()],
        post.draws
            .iter()
            .map(|d| vec![d.iteration.to_string(), num(d.log_posterior)]),
    )?;
    write_rows(
        &dir.join("acceptance.csv"),
        &["k".into(), "proposed".into(), "accepted".into(), "rate".into()],
        post.acceptance.iter().enumerate().map(|(k, a)| {
            vec![
                (k + 1).to_string(),
                a.proposed.to_string(),
                a.accepted.to_string(),
                num(a.rate()),
            ]
        }),
    )?;
    if let Some(c) = &post.config {
        let echo = ChainEcho {
            k: post.k,
            terms: spec.terms().iter().map(|t| t.to_string()).collect(),
            size_offset: spec.size_offset(),
            total_iterations: c.total_iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            init: match c.init {
                InitStrategy::Random { .. } => "random",
                InitStrategy::MpleKmeans => "mple_kmeans",
            },
            seed: c.seed,
            warnings: &post.warnings,
        };
        let path = dir.join("chain.toml");
        fs::write(&path, toml::to_string(&echo).expect("chain echo serialises")).at(&path)?;
    }
    fs::write(&marker, "").at(&marker)
}

/// Reads a completed fit directory for `k` clusters and `p` parameters.
pub fn read_fit(dir: &Path, k: usize, p: usize) -> Result<PosteriorSample> {
    if !dir.join(COMPLETE_MARKER).exists() {
        return Err(CliError::format(
            dir,
            "fit is missing or incomplete (no COMPLETE marker)",
        ));
    }
    let path = dir.join("draws.csv");
    let (header, rows) = read_table(&path)?;
    let mut expected = vec!["iteration".to_string(), "k".into(), "tau".into()];
    expected.extend((1..=p).map(|c| format!("theta_{c}")));
    if header != expected {
        return Err(CliError::format(
            &path,
            format!("expected columns {}", expected.join(",")),
        ));
    }
    let mut draws: BTreeMap<usize, Draw> = BTreeMap::new();
    for (line, r) in rows.iter().enumerate() {
        let it: usize = parse(&path, line + 1, &r[0], "iteration")?;
        let c: usize = parse(&path, line + 1, &r[1], "k")?;
        if c == 0 || c > k {
            return Err(CliError::format(
                &path,
                format!("row {}: cluster {c} outside 1..{k}", line + 1),
            ));
        }
        let d = draws.entry(it).or_insert_with(|| Draw {
            iteration: it,
            tau: vec![f64::NAN; k],
            theta: vec![Vec::new(); k],
            z: Vec::new(),
            log_posterior: f64::NAN,
        });
        d.tau[c - 1] = parse(&path, line + 1, &r[2], "tau")?;
        d.theta[c - 1] = r[3..]
            .iter()
            .map(|f| parse(&path, line + 1, f, "theta"))
            .collect::<Result<Vec<f64>>>()?;
    }
    if let Some(d) = draws.values().find(|d| d.theta.iter().any(|t| t.len() != p)) {
        return Err(CliError::format(
            &path,
            format!("iteration {} lacks some clusters", d.iteration),
        ));
    }

    let zpath = dir.join("z.csv");
    let (header, rows) = read_table(&zpath)?;
    expect_header(&zpath, &header, &["iteration", "network_index", "z"])?;
    for (line, r) in rows.iter().enumerate() {
        let it: usize = parse(&zpath, line + 1, &r[0], "iteration")?;
        let i: usize = parse(&zpath, line + 1, &r[1], "network_index")?;
        let z: usize = parse(&zpath, line + 1, &r[2], "z")?;
        let d = draws
            .get_mut(&it)
            .ok_or_else(|| CliError::format(&zpath, format!("iteration {it} has no draw")))?;
        if i != d.z.len() + 1 || z == 0 || z > k {
            return Err(CliError::format(
                &zpath,
                format!("row {}: unexpected network index or label", line + 1),
            ));
        }
        d.z.push(z - 1);
    }

    let tpath = dir.join("trace.csv");
    if tpath.exists() {
        let (_, rows) = read_table(&tpath)?;
        for (line, r) in rows.iter().enumerate() {
            let it: usize = parse(&tpath, line + 1, &r[0], "iteration")?;
            if let Some(d) = draws.get_mut(&it) {
                d.log_posterior = parse(&tpath, line + 1, &r[1], "log_posterior")?;
            }
        }
    }

    let mut post = PosteriorSample::from_draws(k, draws.into_values().collect())?;
    let apath = dir.join("acceptance.csv");
    if apath.exists() {
        let (_, rows) = read_table(&apath)?;
        for (line, r) in rows.iter().enumerate() {
            let c: usize = parse(&apath, line + 1, &r[0], "k")?;
            if (1..=k).contains(&c) {
                post.acceptance[c - 1] = AcceptanceCount {
                    proposed: parse(&apath, line + 1, &r[1], "proposed")?,
                    accepted: parse(&apath, line + 1, &r[2], "accepted")?,
                };
            }
        }
    }
    Ok(post)
}

pub fn write_dic_report(path: &Path, report: &DicReport) -> Result<()> {
    write_rows(
        path,
        &["K".into(), "DIC".into(), "RD".into(), "selected".into()],
        report.rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                num(r.dic),
                r.rd.map(num).unwrap_or_default(),
                (r.k == report.selected).to_string(),
            ]
        }),
    )
}

/// DIC values by K and the selected K from a report file.
pub fn read_dic_report(path: &Path) -> Result<(Vec<(usize, f64)>, usize)> {
    let (header, rows) = read_table(path)?;
    expect_header(path, &header, &["K", "DIC", "RD", "selected"])?;
    let mut out = Vec::new();
    let mut selected = None;
    for (line, r) in rows.iter().enumerate() {
        let k: usize = parse(path, line + 1, &r[0], "K")?;
        out.push((k, parse(path, line + 1, &r[1], "DIC")?));
        if r[3] == "true" {
            selected = Some(k);
        }
    }
    let selected = selected.ok_or_else(|| CliError::format(path, "no row is marked selected"))?;
    Ok((out, selected))
}

pub fn write_membership(path: &Path, m: &MembershipMatrix) -> Result<()> {
    let k = m.probs.first().map_or(0, Vec::len);
    let mut header = vec!["network_index".to_string()];
    header.extend((1..=k).map(|c| format!("p_{c}")));
    header.push("label".into());
    write_rows(
        path,
        &header,
        m.probs.iter().zip(&m.labels).enumerate().map(|(i, (row, l))| {
            let mut out = vec![(i + 1).to_string()];
            out.extend(row.iter().map(|&p| num(p)));
            out.push((l + 1).to_string());
            out
        }),
    )
}

/// Per-graph metric values in long form.
pub fn write_metric_table(path: &Path, columns: &[(String, Vec<f64>)]) -> Result<()> {
    let rows = columns.iter().flat_map(|(name, values)| {
        values
            .iter()
            .enumerate()
            .map(move |(g, &v)| vec![(g + 1).to_string(), name.clone(), num(v)])
    });
    let mut rows: Vec<Vec<String>> = rows.collect();
    rows.sort_by_key(|r| r[0].parse::<usize>().unwrap_or(0));
    write_rows(path, &["graph_index".into(), "metric".into(), "value".into()], rows)
}

pub fn write_hellinger(path: &Path, rows: &[(String, f64)], bins: usize) -> Result<()> {
    write_rows(
        path,
        &["metric".into(), "hellinger".into(), "bins".into()],
        rows.iter().map(|(m, h)| vec![m.clone(), num(*h), bins.to_string()]),
    )
}

pub fn metric_names(metrics: &[GraphMetric]) -> Vec<String> {
    metrics.iter().map(|m| m.name().to_string()).collect()
}
