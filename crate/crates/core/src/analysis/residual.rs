use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{top_k_edges, WeightedEdge};
use crate::model::Checkpoint;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerResidualReport {
    /// GCN layer, 1-based.
    pub layer: usize,
    pub edges: Vec<WeightedEdge>,
    pub asymmetry: f64,
    /// Share of negative values among `edges`.
    pub negative_fraction: f64,
    /// Diagonal entries among `edges`.
    pub self_loops: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub layers: Vec<LayerResidualReport>,
}

/// `‖R − Rᵀ‖_F / ‖R‖_F`, in `[0, 2]`; zero for the zero matrix.
pub fn asymmetry(r: &Tensor) -> Result<f64> {
    let (n, m) = r.as_matrix("asymmetry")?;
    if n != m {
        return Err(Error::dim("asymmetry", format!("{}x{} is not square", n, m)));
    }
    let d = r.data();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..n {
        for j in 0..n {
            let delta = d[i * n + j] - d[j * n + i];
            diff += delta * delta;
            norm += d[i * n + j] * d[i * n + j];
        }
    }
    Ok(if norm == 0.0 { 0.0 } else { (diff / norm).sqrt() })
}

/// Summarizes every learned residual in `checkpoint`. `k` defaults to the
/// directed edge count of the checkpoint's topology.
pub fn residual_report(checkpoint: &Checkpoint, k: Option<usize>) -> Result<ResidualReport> {
    let k = k.unwrap_or_else(|| checkpoint.topology.directed_edge_count());
    let mut layers = Vec::new();
    for layer in 1..=3 {
        let Some(r) = checkpoint.residual(layer) else { continue };
        let edges = top_k_edges(r, k)?;
        let negatives = edges.iter().filter(|e| e.value < 0.0).count();
        layers.push(LayerResidualReport {
            layer,
            asymmetry: asymmetry(r)?,
            negative_fraction: if edges.is_empty() {
                0.0
            } else {
                negatives as f64 / edges.len() as f64
            },
            self_loops: edges.iter().filter(|e| e.row == e.col).count(),
            edges,
        });
    }
    if layers.is_empty() {
        return Err(Error::contract(format!(
            "checkpoint has no learned residual (adjacency {} {} {})",
            checkpoint.config.adjacency[0], checkpoint.config.adjacency[1], checkpoint.config.adjacency[2]
        )));
    }
    Ok(ResidualReport { layers })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeFormat {
    Csv,
    Dot,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    layer: usize,
    row: usize,
    col: usize,
    value: f64,
    sign: String,
}

fn sign_of(v: f64) -> &'static str {
    if v < 0.0 {
        "negative"
    } else {
        "positive"
    }
}

/// Writes the top-k edges of every layer as CSV (`layer,row,col,value,sign`)
/// or as a DOT digraph coloring positive edges gold and negative purple.
pub fn export_edges(report: &ResidualReport, path: impl AsRef<Path>, format: EdgeFormat) -> Result<()> {
    if report.layers.is_empty() {
        return Err(Error::contract("residual report has no layers"));
    }
    match format {
        EdgeFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["layer", "row", "col", "value", "sign"])?;
            for l in &report.layers {
                for e in &l.edges {
                    w.write_record([
                        l.layer.to_string(),
                        e.row.to_string(),
                        e.col.to_string(),
                        format!("{:?}", e.value),
                        sign_of(e.value).to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        EdgeFormat::Dot => std::fs::write(path, to_dot(report))?,
    }
    Ok(())
}

/// DOT text with one cluster per layer; nodes are `l<layer>_j<joint>`.
pub fn to_dot(report: &ResidualReport) -> String {
    let mut out = String::from("digraph residual {\n");
    for l in &report.layers {
        writeln!(out, "  subgraph cluster_gcn{} {{", l.layer).unwrap();
        writeln!(out, "    label=\"gcn{}\";", l.layer).unwrap();
        for e in &l.edges {
            let sign = sign_of(e.value);
            let color = if sign == "negative" { "purple" } else { "gold" };
            writeln!(
                out,
                "    l{}_j{} -> l{}_j{} [weight=\"{:?}\", sign=\"{}\", color=\"{}\"];",
                l.layer, e.row, l.layer, e.col, e.value, sign, color
            )
            .unwrap();
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

/// Reads a CSV written by [`export_edges`] back into `(layer, edge)` pairs.
pub fn read_edges_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, WeightedEdge)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<EdgeRow>().enumerate() {
        let row = row?;
        if row.sign != sign_of(row.value) {
            return Err(Error::parse(i + 2, format!("sign `{}` disagrees with value {}", row.sign, row.value)));
        }
        out.push((
            row.layer,
            WeightedEdge {
                row: row.row,
                col: row.col,
                value: row.value,
            },
        ));
    }
    Ok(out)
}
