use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSpec};

/// Undirected joint graph: `n_joints` nodes and a list of bone links.
///
/// Edges are stored as given (unordered pairs, each at most once, never a
/// self-pair). Self-loops belong to the adjacency variant, not the topology.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointGraphTopology {
    name: String,
    n_joints: usize,
    edges: Vec<(usize, usize)>,
}

impl JointGraphTopology {
    pub fn new(name: impl Into<String>, n_joints: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let name = name.into();
        if n_joints == 0 {
            return Err(Error::contract("a topology needs at least one joint"));
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::contract(format!("invalid topology name `{}`", name)));
        }
        let mut seen = HashSet::new();
        for &(i, j) in &edges {
            if i >= n_joints || j >= n_joints {
                return Err(Error::contract(format!(
                    "edge ({}, {}) out of range for {} joints",
                    i, j, n_joints
                )));
            }
            if i == j {
                return Err(Error::contract(format!("self-pair ({}, {}) in topology", i, j)));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::contract(format!("duplicate edge ({}, {})", i, j)));
            }
        }
        Ok(JointGraphTopology { name, n_joints, edges })
    }

    /// A graph with no links; all a topology-free variant needs.
    pub fn edgeless(n_joints: usize) -> Result<Self> {
        Self::new(format!("edgeless{}", n_joints), n_joints, Vec::new())
    }

    /// Twelve joints: head, neck, arms, spine, pelvis and legs.
    pub fn body12() -> Self {
        // 0 head, 1 neck, 2 l-elbow, 3 l-hand, 4 r-elbow, 5 r-hand,
        // 6 pelvis, 7 l-knee, 8 l-foot, 9 r-knee, 10 r-foot, 11 spine
        let edges = vec![
            (0, 1),
            (1, 2),
            (2, 3),
            (1, 4),
            (4, 5),
            (1, 11),
            (11, 6),
            (6, 7),
            (7, 8),
            (6, 9),
            (9, 10),
        ];
        Self::new("body12", 12, edges).expect("static topology is valid")
    }

    /// The 25-joint Kinect v2 layout (24 bones).
    pub fn kinect25() -> Self {
        const BONES: [(usize, usize); 24] = [
            (1, 2),
            (2, 21),
            (3, 21),
            (4, 3),
            (5, 21),
            (6, 5),
            (7, 6),
            (8, 7),
            (9, 21),
            (10, 9),
            (11, 10),
            (12, 11),
            (13, 1),
            (14, 13),
            (15, 14),
            (16, 15),
            (17, 1),
            (18, 17),
            (19, 18),
            (20, 19),
            (22, 23),
            (23, 8),
            (24, 25),
            (25, 12),
        ];
        let edges = BONES.iter().map(|&(a, b)| (a - 1, b - 1)).collect();
        Self::new("kinect25", 25, edges).expect("static topology is valid")
    }

    /// A tree where joint `i > 0` hangs off joint `(i - 1) / 2`.
    pub fn binary_tree(n_joints: usize) -> Result<Self> {
        let edges = (1..n_joints).map(|i| ((i - 1) / 2, i)).collect();
        Self::new(format!("tree{}", n_joints), n_joints, edges)
    }

    /// `body12` for twelve joints, a binary tree otherwise.
    pub fn default_for(n_joints: usize) -> Result<Self> {
        match n_joints {
            12 => Ok(Self::body12()),
            25 => Ok(Self::kinect25()),
            n => Self::binary_tree(n),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of nonzero off-diagonal entries in the neighbor matrix, i.e.
    /// each bone counted in both directions.
    pub fn directed_edge_count(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i))
    }

    /// Unordered non-self pairs `(i < j)` not linked by an edge, in lexicographic order.
    pub fn absent_pairs(&self) -> Vec<(usize, usize)> {
        let present: HashSet<(usize, usize)> =
            self.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let n = self.n_joints;
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|p| !present.contains(p))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "joints {}", self.n_joints).unwrap();
        writeln!(out, "name {}", self.name).unwrap();
        for (i, j) in &self.edges {
            writeln!(out, "edge {} {}", i, j).unwrap();
        }
        out
    }

    /// Parses the line format: `joints <N>` first, an optional `name <label>`,
    /// then `edge <i> <j>` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n_joints = None;
        let mut name = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match (fields[0], n_joints) {
                ("joints", None) if fields.len() == 2 => {
                    n_joints = Some(parse_usize(fields[1], line_no)?);
                }
                (_, None) => return Err(Error::parse(line_no, "expected `joints <N>` first")),
                ("name", Some(_)) if fields.len() == 2 && name.is_none() && edges.is_empty() => {
                    name = Some(fields[1].to_string());
                }
                ("edge", Some(_)) if fields.len() == 3 => {
                    edges.push((parse_usize(fields[1], line_no)?, parse_usize(fields[2], line_no)?));
                }
                _ => return Err(Error::parse(line_no, format!("unexpected line `{}`", line))),
            }
        }
        let n = n_joints.ok_or_else(|| Error::parse(0, "missing `joints <N>` header"))?;
        let name = name.unwrap_or_else(|| format!("graph{}", n));
        Self::new(name, n, edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Adds `spec.count` uniformly sampled absent, non-self pairs to the topology.
pub fn add_wrong_edges(topology: &JointGraphTopology, spec: &NoiseSpec) -> Result<JointGraphTopology> {
    if spec.kind != NoiseKind::WrongEdges {
        return Err(Error::contract(format!("add_wrong_edges given a {} spec", spec.kind)));
    }
    let absent = topology.absent_pairs();
    if spec.count > absent.len() {
        return Err(Error::contract(format!(
            "cannot add {} wrong edges: only {} absent pairs",
            spec.count,
            absent.len()
        )));
    }
    let mut edges = topology.edges.clone();
    let mut rng = spec.rng();
    edges.extend(index::sample(&mut rng, absent.len(), spec.count).iter().map(|i| absent[i]));
    JointGraphTopology::new(topology.name.clone(), topology.n_joints, edges)
}

pub(crate) fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

pub(crate) fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a non-negative integer, got `{}`", field)))
}
