use super::{Activation, ModelConfig, Params};
use crate::error::{Error, Result};
use crate::graph::{fixed_part, normalize_values, tile_blocks, JointGraphTopology};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Adjacency source of one GCN layer.
#[derive(Clone, Debug)]
enum LayerAdjacency {
    /// Normalized (block) matrix, computed once.
    Constant(Tensor),
    /// Fixed part plus a learned residual, normalized on every forward pass.
    Learned { fixed: Tensor, temporal: Option<Tensor> },
}

/// The validation network bound to a topology. Holds no trainable state;
/// parameters are passed to every call.
#[derive(Clone, Debug)]
pub struct Network {
    config: ModelConfig,
    layers: Vec<LayerAdjacency>,
    links: Vec<bool>,
}

/// Handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub logits: Var,
    /// One handle per parameter, in [`Params`] order.
    pub params: Vec<Var>,
}

impl Network {
    pub fn new(config: &ModelConfig, topology: &JointGraphTopology) -> Result<Network> {
        config.validate()?;
        if topology.n_joints() != config.n_joints {
            return Err(Error::contract(format!(
                "model expects {} joints, topology `{}` has {}",
                config.n_joints,
                topology.name(),
                topology.n_joints()
            )));
        }
        let n = config.n_joints;
        let tau = config.tau;
        let links = config.temporal_links.mask(tau);
        let temporal = if tau > 1 {
            Some(fixed_part(topology, config.temporal_adjacency)?)
        } else {
            None
        };
        let layers = config
            .adjacency
            .iter()
            .map(|&variant| {
                let fixed = fixed_part(topology, variant)?;
                if variant.has_residual() {
                    return Ok(LayerAdjacency::Learned {
                        fixed,
                        temporal: temporal.clone(),
                    });
                }
                let (values, size) = match &temporal {
                    Some(t) => (tile_blocks(fixed.data(), t.data(), n, tau, &links), n * tau),
                    None => (fixed.into_data(), n),
                };
                let normalized = normalize_values(&values, size, config.normalization);
                Ok(LayerAdjacency::Constant(Tensor::new(vec![size, size], normalized)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Network {
            config: config.clone(),
            layers,
            links,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Records the forward pass of one sample `x: T×N×C` on `tape`.
    /// Parameters become gradient-tracking leaves when `track` is set.
    pub fn forward(&self, tape: &mut Tape, params: &Params, x: &Tensor, track: bool) -> Result<ForwardPass> {
        let cfg = &self.config;
        let xs = x.shape();
        if xs.len() != 3 || xs[1] != cfg.n_joints || xs[2] != cfg.in_channels {
            return Err(Error::dim(
                "input",
                format!(
                    "got {:?}, expected [T, {}, {}]",
                    xs, cfg.n_joints, cfg.in_channels
                ),
            ));
        }
        if params.len() != cfg.parameter_shapes().len() {
            return Err(Error::contract("parameter set does not match the model config"));
        }
        let handles: Vec<Var> = params.tensors().map(|t| tape.leaf(t.clone(), track)).collect();
        let p = |name: &str| -> Var { handles[params.index_of(name).expect("validated parameter name")] };

        let mut h = tape.constant(x.clone());
        for layer in 0..3 {
            let stage = format!("gcn{}", layer + 1);
            let adj = self
                .layer_adjacency(tape, layer, params, &handles)
                .map_err(|e| at_stage(&stage, e))?;
            h = gcn_layer(tape, h, adj, p(&format!("{}.weight", stage)), cfg.activation)
                .map_err(|e| at_stage(&stage, e))?;
            if layer < 2 {
                let stage = format!("tcn{}", layer + 1);
                h = self
                    .temporal_block(tape, h, p(&format!("{}.weight", stage)), p(&format!("{}.bias", stage)))
                    .map_err(|e| at_stage(&stage, e))?;
            }
        }
        let pooled = classify_pool(tape, h).map_err(|e| at_stage("pool", e))?;
        let logits = (|| {
            let c = tape.shape(pooled)[0];
            let row = tape.reshape(pooled, &[1, c])?;
            let z = tape.matmul(row, p("fc.weight"))?;
            let z = tape.reshape(z, &[cfg.class_count])?;
            tape.add_bias(z, p("fc.bias"))
        })()
        .map_err(|e| at_stage("fc", e))?;
        Ok(ForwardPass {
            logits,
            params: handles,
        })
    }

    /// Logits for one sample without recording gradients.
    pub fn logits(&self, params: &Params, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let pass = self.forward(&mut tape, params, x, false)?;
        Ok(tape.value(pass.logits).clone())
    }

    fn layer_adjacency(&self, tape: &mut Tape, layer: usize, params: &Params, handles: &[Var]) -> Result<Var> {
        match &self.layers[layer] {
            LayerAdjacency::Constant(t) => Ok(tape.constant(t.clone())),
            LayerAdjacency::Learned { fixed, temporal } => {
                let name = format!("gcn{}.residual", layer + 1);
                let residual = handles[params
                    .index_of(&name)
                    .ok_or_else(|| Error::contract(format!("missing parameter `{}`", name)))?];
                let fixed = tape.constant(fixed.clone());
                let mut a = tape.add(fixed, residual)?;
                if let Some(t) = temporal {
                    let t = tape.constant(t.clone());
                    a = tape.block_tile(a, t, self.config.tau, &self.links)?;
                }
                tape.normalize_adjacency(a, self.config.normalization)
            }
        }
    }

    fn temporal_block(&self, tape: &mut Tape, h: Var, w: Var, b: Var) -> Result<Var> {
        let h = tape.temporal_conv(h, w)?;
        let h = tape.add_bias(h, b)?;
        let h = activate(tape, h, self.config.activation)?;
        if self.config.temporal_pool > 1 {
            tape.time_pool(h, self.config.temporal_pool)
        } else {
            Ok(h)
        }
    }
}

/// One graph convolution `σ(Ā X_t W)` applied to every frame of `x: T×N×C`.
///
/// When `adj` is `τN×τN` for some `τ > 1`, frames are grouped into
/// consecutive non-overlapping windows of `τ` and each window is mixed as a
/// single graph; trailing frames that do not fill a window are dropped.
pub fn gcn_layer(tape: &mut Tape, x: Var, adj: Var, weight: Var, activation: Activation) -> Result<Var> {
    let xs = tape.shape(x).to_vec();
    let ws = tape.shape(weight).to_vec();
    let m = tape.shape(adj).first().copied().unwrap_or(0);
    if xs.len() != 3 || ws.len() != 2 || ws[0] != xs[2] {
        return Err(Error::dim(
            "gcn_layer",
            format!("features {:?} with weight {:?}", xs, ws),
        ));
    }
    let (t, n, c) = (xs[0], xs[1], xs[2]);
    if n == 0 || m % n != 0 || m == 0 {
        return Err(Error::dim(
            "gcn_layer",
            format!("adjacency of size {} does not tile {} joints", m, n),
        ));
    }
    let tau = m / n;
    let windows = t / tau;
    if windows == 0 {
        return Err(Error::dim(
            "gcn_layer",
            format!("{} frames cannot fill a window of {}", t, tau),
        ));
    }
    let mut h = x;
    if windows * tau != t {
        h = tape.narrow_leading(h, windows * tau)?;
    }
    let t_used = windows * tau;
    if tau > 1 {
        h = tape.reshape(h, &[windows, m, c])?;
    }
    h = tape.graph_mix(adj, h)?;
    h = tape.reshape(h, &[t_used * n, c])?;
    h = tape.matmul(h, weight)?;
    h = tape.reshape(h, &[t_used, n, ws[1]])?;
    activate(tape, h, activation)
}

/// Tensor-level [`gcn_layer`]; `adj` must already be normalized.
pub fn gcn_layer_forward(x: &Tensor, adj: &Tensor, weight: &Tensor, activation: Activation) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (x, adj, weight) = (tape.constant(x.clone()), tape.constant(adj.clone()), tape.constant(weight.clone()));
    let out = gcn_layer(&mut tape, x, adj, weight, activation)?;
    Ok(tape.value(out).clone())
}

/// Mean over the frame and joint axes of `x: T×N×C`.
pub fn classify_pool(tape: &mut Tape, x: Var) -> Result<Var> {
    if tape.shape(x).len() != 3 {
        return Err(Error::dim(
            "classify_pool",
            format!("expected T×N×C, got {:?}", tape.shape(x)),
        ));
    }
    tape.reduce_mean(x, &[0, 1])
}

fn activate(tape: &mut Tape, h: Var, activation: Activation) -> Result<Var> {
    match activation {
        Activation::Relu => tape.relu(h),
        Activation::Identity => Ok(h),
    }
}

fn at_stage(stage: &str, err: Error) -> Error {
    match err {
        Error::Dimension { context, detail } => Error::Dimension {
            context: format!("{} ({})", stage, context),
            detail,
        },
        other => other,
    }
}
