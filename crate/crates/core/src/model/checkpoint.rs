//! Checkpoint text container.
//!
//! ```text
//! skckpt v1
//! epoch 30
//! config.n_joints 12
//! ...                              one `config.<field> <value>` line per field
//! topology.name body12
//! topology.joints 12
//! topology.edge 0 1                one per undirected edge
//! adam.step 210                    only when optimizer state is saved
//! tensor gcn1.weight 2 6 64        name, rank, dims
//! 0.0123 -0.5 ...                  all values on one line, row-major
//! end
//! ```
//!
//! Adam moments are stored as tensors named `adam.m/<param>` and
//! `adam.v/<param>`. Floats are written in shortest round-trip form, so a
//! load followed by a save reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{ModelConfig, Network, Params};
use crate::error::{Error, Result};
use crate::graph::{parse_usize, JointGraphTopology};
use crate::tensor::Tensor;
use crate::train::AdamState;

const MAGIC: &str = "skckpt v1";

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub topology: JointGraphTopology,
    pub params: Params,
    pub optimizer: Option<AdamState>,
    /// Completed training epochs.
    pub epoch: usize,
}

impl Checkpoint {
    /// Freshly initialized parameters, no optimizer state.
    pub fn init(config: &ModelConfig, topology: &JointGraphTopology, seed: u64) -> Result<Checkpoint> {
        Network::new(config, topology)?;
        Ok(Checkpoint {
            config: config.clone(),
            topology: topology.clone(),
            params: Params::init(config, seed)?,
            optimizer: None,
            epoch: 0,
        })
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(&self.config, &self.topology)
    }

    /// Residual matrix of GCN layer `layer` (1-based), when it has one.
    pub fn residual(&self, layer: usize) -> Option<&Tensor> {
        self.params.get(&format!("gcn{}.residual", layer))
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(MAGIC.to_string());
        line(format!("epoch {}", self.epoch));
        line(format!("config.n_joints {}", c.n_joints));
        line(format!("config.in_channels {}", c.in_channels));
        line(format!("config.class_count {}", c.class_count));
        line(format!(
            "config.gcn_channels {} {} {}",
            c.gcn_channels[0], c.gcn_channels[1], c.gcn_channels[2]
        ));
        line(format!(
            "config.adjacency {} {} {}",
            c.adjacency[0], c.adjacency[1], c.adjacency[2]
        ));
        line(format!("config.tau {}", c.tau));
        line(format!("config.temporal_adjacency {}", c.temporal_adjacency));
        line(format!("config.temporal_links {}", c.temporal_links));
        line(format!("config.temporal_kernel {}", c.temporal_kernel));
        line(format!("config.temporal_pool {}", c.temporal_pool));
        line(format!("config.activation {}", c.activation));
        line(format!("config.normalization {}", c.normalization));
        line(format!("config.residual_init_scale {:?}", c.residual_init_scale));
        line(format!("topology.name {}", self.topology.name()));
        line(format!("topology.joints {}", self.topology.n_joints()));
        for &(i, j) in self.topology.edges() {
            line(format!("topology.edge {} {}", i, j));
        }
        if let Some(adam) = &self.optimizer {
            line(format!("adam.step {}", adam.step));
        }
        for (name, t) in self.params.entries() {
            write_tensor(&mut out, name, t);
        }
        if let Some(adam) = &self.optimizer {
            for (name, t) in self.params.names().zip(&adam.m) {
                write_tensor(&mut out, &format!("adam.m/{}", name), t);
            }
            for (name, t) in self.params.names().zip(&adam.v) {
                write_tensor(&mut out, &format!("adam.v/{}", name), t);
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Checkpoint> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(Error::parse(1, format!("expected `{}` header", MAGIC))),
        }
        let mut scalars: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        let mut ended = false;
        while let Some((no, raw)) = lines.next() {
            if raw.is_empty() {
                continue;
            }
            if ended {
                return Err(Error::parse(no, "content after `end`"));
            }
            let (key, rest) = raw.split_once(' ').unwrap_or((raw, ""));
            match key {
                "end" => ended = true,
                "topology.edge" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    if f.len() != 2 {
                        return Err(Error::parse(no, "edge needs two joint indices"));
                    }
                    edges.push((parse_usize(f[0], no)?, parse_usize(f[1], no)?));
                }
                "tensor" => {
                    let (name, t) = read_tensor(rest, no, lines.next())?;
                    tensors.push((name, t));
                }
                _ => {
                    if scalars.insert(key.to_string(), (no, rest.to_string())).is_some() {
                        return Err(Error::parse(no, format!("duplicate key `{}`", key)));
                    }
                }
            }
        }
        if !ended {
            return Err(Error::parse(0, "checkpoint truncated: missing `end`"));
        }

        let mut take = |key: &str| -> Result<(usize, String)> {
            scalars
                .remove(key)
                .ok_or_else(|| Error::parse(0, format!("missing `{}`", key)))
        };
        let usize_of = |(no, v): (usize, String)| parse_usize(&v, no);
        fn parsed<T: std::str::FromStr>((no, v): (usize, String)) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| Error::parse(no, e.to_string()))
        }
        fn triple<T: std::str::FromStr>((no, v): (usize, String)) -> Result<[T; 3]>
        where
            T::Err: std::fmt::Display,
        {
            let items = v
                .split_whitespace()
                .map(|s| s.parse::<T>().map_err(|e| Error::parse(no, e.to_string())))
                .collect::<Result<Vec<T>>>()?;
            items.try_into().map_err(|_| Error::parse(no, "expected three values"))
        }

        let epoch = usize_of(take("epoch")?)?;
        let config = ModelConfig {
            n_joints: usize_of(take("config.n_joints")?)?,
            in_channels: usize_of(take("config.in_channels")?)?,
            class_count: usize_of(take("config.class_count")?)?,
            gcn_channels: triple(take("config.gcn_channels")?)?,
            adjacency: triple(take("config.adjacency")?)?,
            tau: usize_of(take("config.tau")?)?,
            temporal_adjacency: parsed(take("config.temporal_adjacency")?)?,
            temporal_links: parsed(take("config.temporal_links")?)?,
            temporal_kernel: usize_of(take("config.temporal_kernel")?)?,
            temporal_pool: usize_of(take("config.temporal_pool")?)?,
            activation: parsed(take("config.activation")?)?,
            normalization: parsed(take("config.normalization")?)?,
            residual_init_scale: parsed(take("config.residual_init_scale")?)?,
        };
        config.validate()?;
        let topo_name = take("topology.name")?.1;
        let topo_joints = usize_of(take("topology.joints")?)?;
        let topology = JointGraphTopology::new(topo_name, topo_joints, edges)?;
        let adam_step = match scalars.remove("adam.step") {
            Some(v) => Some(parsed::<u64>(v)?),
            None => None,
        };
        if let Some((key, (no, _))) = scalars.into_iter().next() {
            return Err(Error::parse(no, format!("unknown key `{}`", key)));
        }

        let mut params = Vec::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, t) in tensors {
            if let Some(p) = name.strip_prefix("adam.m/") {
                m.push((p.to_string(), t));
            } else if let Some(p) = name.strip_prefix("adam.v/") {
                v.push((p.to_string(), t));
            } else {
                params.push((name, t));
            }
        }
        let params = Params::from_entries(&config, params)?;
        let optimizer = match adam_step {
            None if m.is_empty() && v.is_empty() => None,
            None => return Err(Error::contract("Adam moments present without `adam.step`")),
            Some(step) => {
                let aligned = |moments: &[(String, Tensor)]| {
                    moments.len() == params.len()
                        && moments
                            .iter()
                            .zip(params.entries())
                            .all(|((n, t), (pn, pt))| n == pn && t.shape() == pt.shape())
                };
                if !aligned(&m) || !aligned(&v) {
                    return Err(Error::contract("Adam moments do not match the parameters"));
                }
                Some(AdamState {
                    step,
                    m: m.into_iter().map(|(_, t)| t).collect(),
                    v: v.into_iter().map(|(_, t)| t).collect(),
                })
            }
        };
        let ckpt = Checkpoint {
            config,
            topology,
            params,
            optimizer,
            epoch,
        };
        ckpt.network()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        Checkpoint::parse(&std::fs::read_to_string(path)?)
    }
}

fn write_tensor(out: &mut String, name: &str, t: &Tensor) {
    write!(out, "tensor {} {}", name, t.ndim()).unwrap();
    for d in t.shape() {
        write!(out, " {}", d).unwrap();
    }
    out.push('\n');
    for (i, v) in t.data().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{:?}", v).unwrap();
    }
    out.push('\n');
}

fn read_tensor(header: &str, no: usize, body: Option<(usize, &str)>) -> Result<(String, Tensor)> {
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() < 2 {
        return Err(Error::parse(no, "tensor header needs a name and a rank"));
    }
    let rank = parse_usize(f[1], no)?;
    if f.len() != 2 + rank {
        return Err(Error::parse(no, format!("rank {} but {} dims", rank, f.len() - 2)));
    }
    let shape = f[2..].iter().map(|d| parse_usize(d, no)).collect::<Result<Vec<_>>>()?;
    let (body_no, body) = body.ok_or_else(|| Error::parse(no, "tensor values missing"))?;
    let data = body
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::parse(body_no, format!("bad value `{}`: {}", s, e)))
        })
        .collect::<Result<Vec<_>>>()?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(body_no, "non-finite tensor value"));
    }
    let t = Tensor::new(shape, data).map_err(|e| Error::parse(body_no, e.to_string()))?;
    Ok((f[0].to_string(), t))
}
