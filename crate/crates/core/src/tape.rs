//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] is an append-only arena of nodes. Every operation pushes its
//! result after its inputs, so node order is already a topological order and
//! backward is a single reverse sweep. Handles ([`Var`]) are plain indices
//! into the tape that produced them.
//!
//! Broadcasting is limited to exact shape matches and single-element
//! operands. Operations with structured broadcasting (bias rows, shared
//! adjacency across frames) are separate ops with their own gradient rules.

use crate::error::{Error, Result};
use crate::graph::{normalize_values, tile_blocks, Normalization};
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Relu { a: Var },
    Scale { a: Var, factor: f64 },
    Reduce { a: Var, axes: Vec<usize>, factor: f64 },
    Reshape { a: Var },
    Narrow { a: Var },
    GraphMix { adj: Var, x: Var },
    TemporalConv { x: Var, w: Var },
    TimePool { x: Var, stride: usize },
    AddBias { x: Var, b: Var },
    BlockTile { spatial: Var, temporal: Var, links: Vec<bool> },
    Normalize { a: Var, mode: Normalization },
    SoftmaxCrossEntropy { logits: Var, target: Vec<f64>, probs: Vec<f64> },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of executed operations.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar loss with respect to every `requires_grad` leaf.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    /// Finite-value checks are on in debug builds and off in release builds.
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn with_finite_checks(mut self, enabled: bool) -> Self {
        self.check_finite = enabled;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, name: &str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if self.check_finite && !value.all_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul { a, b }, &[a, b])
    }

    fn broadcast_shape(&self, name: &str, a: Var, b: Var) -> Result<Vec<usize>> {
        let (sa, sb) = (self.value(a), self.value(b));
        if sa.shape() == sb.shape() || sb.is_scalar_like() {
            Ok(sa.shape().to_vec())
        } else if sa.is_scalar_like() {
            Ok(sb.shape().to_vec())
        } else {
            Err(Error::dim(
                name,
                format!("shapes {:?} and {:?} do not broadcast", sa.shape(), sb.shape()),
            ))
        }
    }

    fn zip_with(&self, a: Var, b: Var, shape: Vec<usize>, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let numel: usize = shape.iter().product();
        let pick = |d: &[f64], i: usize| if d.len() == 1 { d[0] } else { d[i] };
        let data = (0..numel).map(|i| f(pick(da, i), pick(db, i))).collect();
        Tensor::new(shape, data).expect("broadcast shape checked")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.broadcast_shape("add", a, b)?;
        let value = self.zip_with(a, b, shape, |x, y| x + y);
        self.push("add", value, Op::Add { a, b }, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.broadcast_shape("mul", a, b)?;
        let value = self.zip_with(a, b, shape, |x, y| x * y);
        self.push("mul", value, Op::Mul { a, b }, &[a, b])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let src = self.value(a);
        let data = src.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        self.push("relu", value, Op::Relu { a }, &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let src = self.value(a);
        let data = src.data().iter().map(|&x| x * factor).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        self.push("scale", value, Op::Scale { a, factor }, &[a])
    }

    /// Sum over `axes`; the reduced axes are removed from the shape.
    pub fn reduce_sum(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        self.reduce("reduce_sum", a, axes, false)
    }

    /// Arithmetic mean over `axes`. An empty axis set returns the input values.
    pub fn reduce_mean(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        self.reduce("reduce_mean", a, axes, true)
    }

    fn reduce(&mut self, name: &str, a: Var, axes: &[usize], mean: bool) -> Result<Var> {
        let src = self.value(a);
        let shape = src.shape();
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != axes.len() || sorted.iter().any(|&ax| ax >= shape.len()) {
            return Err(Error::dim(
                name,
                format!("invalid axes {:?} for shape {:?}", axes, shape),
            ));
        }
        let count: usize = sorted.iter().map(|&ax| shape[ax]).product();
        if count == 0 {
            return Err(Error::Degenerate(format!(
                "{} over an empty extent of shape {:?}",
                name, shape
            )));
        }
        let factor = if mean { 1.0 / count as f64 } else { 1.0 };
        let (out_shape, map) = reduce_index_map(shape, &sorted);
        let mut out = vec![0.0; out_shape.iter().product()];
        for (&o, &x) in map.iter().zip(src.data()) {
            out[o] += x;
        }
        if mean {
            out.iter_mut().for_each(|v| *v *= factor);
        }
        let value = Tensor::new(out_shape, out)?;
        self.push(
            name,
            value,
            Op::Reduce {
                a,
                axes: sorted,
                factor,
            },
            &[a],
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        self.push("reshape", value, Op::Reshape { a }, &[a])
    }

    /// Keeps the first `len` entries along axis 0.
    pub fn narrow_leading(&mut self, a: Var, len: usize) -> Result<Var> {
        let src = self.value(a);
        let shape = src.shape();
        if shape.is_empty() || len > shape[0] {
            return Err(Error::dim(
                "narrow",
                format!("cannot keep {} leading entries of {:?}", len, shape),
            ));
        }
        let inner: usize = shape[1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape[0] = len;
        let value = Tensor::new(out_shape, src.data()[..len * inner].to_vec())?;
        self.push("narrow", value, Op::Narrow { a }, &[a])
    }

    /// Applies one `M×M` matrix to every `M×C` slab of a `B×M×C` tensor.
    pub fn graph_mix(&mut self, adj: Var, x: Var) -> Result<Var> {
        let (m, m2) = self.value(adj).as_matrix("graph_mix adjacency")?;
        let xs = self.value(x).shape().to_vec();
        if m != m2 || xs.len() != 3 || xs[1] != m {
            return Err(Error::dim(
                "graph_mix",
                format!("adjacency {}x{} against features {:?}", m, m2, xs),
            ));
        }
        let (batch, c) = (xs[0], xs[2]);
        let a = self.value(adj).data();
        let xd = self.value(x).data();
        let mut out = vec![0.0; batch * m * c];
        for b in 0..batch {
            let off = b * m * c;
            gemm_nn(a, &xd[off..off + m * c], &mut out[off..off + m * c], m, m, c);
        }
        let value = Tensor::new(xs, out)?;
        self.push("graph_mix", value, Op::GraphMix { adj, x }, &[adj, x])
    }

    /// Zero-padded, stride-1 convolution along the leading (time) axis.
    ///
    /// `x: T×N×Cin`, `w: K×Cin×Cout` with `K` odd; output `T×N×Cout`.
    pub fn temporal_conv(&mut self, x: Var, w: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 3 || ws[1] != xs[2] || ws[0].is_multiple_of(2) {
            return Err(Error::dim(
                "temporal_conv",
                format!("features {:?} with kernel {:?}", xs, ws),
            ));
        }
        let (t, n, cin) = (xs[0], xs[1], xs[2]);
        let (k, cout) = (ws[0], ws[2]);
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let mut out = vec![0.0; t * n * cout];
        for tap in 0..k {
            if let Some((lo, hi, shift)) = conv_window(t, k, tap) {
                let rows = (hi - lo) * n;
                let src = ((lo as isize + shift) as usize) * n * cin;
                gemm_nn(
                    &xd[src..src + rows * cin],
                    &wd[tap * cin * cout..(tap + 1) * cin * cout],
                    &mut out[lo * n * cout..hi * n * cout],
                    rows,
                    cin,
                    cout,
                );
            }
        }
        let value = Tensor::new(vec![t, n, cout], out)?;
        self.push("temporal_conv", value, Op::TemporalConv { x, w }, &[x, w])
    }

    /// Non-overlapping average pooling along the leading axis; trailing
    /// frames that do not fill a window are dropped.
    pub fn time_pool(&mut self, x: Var, stride: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if stride == 0 || xs.is_empty() || xs[0] / stride == 0 {
            return Err(Error::dim(
                "time_pool",
                format!("stride {} over shape {:?}", stride, xs),
            ));
        }
        let frame: usize = xs[1..].iter().product();
        let t_out = xs[0] / stride;
        let xd = self.value(x).data();
        let inv = 1.0 / stride as f64;
        let mut out = vec![0.0; t_out * frame];
        for to in 0..t_out {
            let dst = &mut out[to * frame..(to + 1) * frame];
            for j in 0..stride {
                let src = &xd[(to * stride + j) * frame..(to * stride + j + 1) * frame];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
            }
            dst.iter_mut().for_each(|d| *d *= inv);
        }
        let mut shape = xs;
        shape[0] = t_out;
        let value = Tensor::new(shape, out)?;
        self.push("time_pool", value, Op::TimePool { x, stride }, &[x])
    }

    /// Adds a length-`C` vector to every trailing-axis row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let bs = self.value(b).shape().to_vec();
        let c = *xs.last().unwrap_or(&0);
        if bs != [c] || c == 0 {
            return Err(Error::dim(
                "add_bias",
                format!("bias {:?} against features {:?}", bs, xs),
            ));
        }
        let bd = self.value(b).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(c) {
            row.iter_mut().zip(bd).for_each(|(o, bv)| *o += bv);
        }
        let value = Tensor::new(xs, out)?;
        self.push("add_bias", value, Op::AddBias { x, b }, &[x, b])
    }

    /// Assembles a `τM×τM` block matrix: `spatial` on the diagonal blocks
    /// and `temporal` on each off-diagonal block `(i, j)` with
    /// `links[i*τ + j]` set.
    pub fn block_tile(&mut self, spatial: Var, temporal: Var, tau: usize, links: &[bool]) -> Result<Var> {
        let (m, m2) = self.value(spatial).as_matrix("block_tile spatial")?;
        let ts = self.value(temporal).shape().to_vec();
        if m != m2 || ts != [m, m] || tau == 0 || links.len() != tau * tau {
            return Err(Error::dim(
                "block_tile",
                format!("spatial {}x{}, temporal {:?}, tau {}", m, m2, ts, tau),
            ));
        }
        let size = m * tau;
        let out = tile_blocks(self.value(spatial).data(), self.value(temporal).data(), m, tau, links);
        let value = Tensor::new(vec![size, size], out)?;
        self.push(
            "block_tile",
            value,
            Op::BlockTile {
                spatial,
                temporal,
                links: links.to_vec(),
            },
            &[spatial, temporal],
        )
    }

    /// Degree normalization of a square matrix (degrees use `|a_ij|`).
    pub fn normalize_adjacency(&mut self, a: Var, mode: Normalization) -> Result<Var> {
        let (n, n2) = self.value(a).as_matrix("normalize")?;
        if n != n2 {
            return Err(Error::dim("normalize", format!("{}x{} is not square", n, n2)));
        }
        let data = normalize_values(self.value(a).data(), n, mode);
        let value = Tensor::new(vec![n, n], data)?;
        self.push("normalize", value, Op::Normalize { a, mode }, &[a])
    }

    /// Cross-entropy of `softmax(logits)` against a target distribution.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: &[f64]) -> Result<Var> {
        let z = self.value(logits).data();
        if z.len() != target.len() || z.is_empty() {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("{} logits against {} targets", z.len(), target.len()),
            ));
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_norm = max + sum_exp.ln();
        let probs: Vec<f64> = z.iter().map(|v| (v - log_norm).exp()).collect();
        let loss: f64 = z
            .iter()
            .zip(target)
            .map(|(v, t)| if *t == 0.0 { 0.0 } else { -t * (v - log_norm) })
            .sum();
        self.push(
            "softmax_cross_entropy",
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                target: target.to_vec(),
                probs,
            },
            &[logits],
        )
    }

    /// Gradients of `loss` for every `requires_grad` leaf, leaving the tape intact.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::contract("backward on an empty tape"));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::contract("loss handle does not belong to this tape"));
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut acc: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        acc[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(grad) = acc[id].take() else { continue };
            if let Op::Leaf = node.op {
                acc[id] = Some(grad);
                continue;
            }
            self.propagate(node, &grad, &mut acc);
        }

        let grads = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, node)| match node.op {
                Op::Leaf if node.requires_grad => {
                    let shape = node.value.shape().to_vec();
                    let data = acc
                        .get_mut(id)
                        .and_then(Option::take)
                        .unwrap_or_else(|| vec![0.0; node.value.numel()]);
                    Some(Tensor::new(shape, data).expect("gradient shape follows value"))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    /// Computes gradients, then clears the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        let grads = self.gradients(loss)?;
        self.nodes.clear();
        Ok(grads)
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &[f64], acc: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (m, k) = self.value(*a).as_matrix("").unwrap();
                let n = self.value(*b).shape()[1];
                if self.wants(*a) {
                    gemm_nt(g, self.value(*b).data(), slot(acc, self, *a), m, n, k);
                }
                if self.wants(*b) {
                    gemm_tn(self.value(*a).data(), g, slot(acc, self, *b), k, m, n);
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if self.wants(v) {
                        accumulate_broadcast(slot(acc, self, v), g, |_| 1.0);
                    }
                }
            }
            Op::Mul { a, b } => {
                let (da, db) = (self.value(*a).data(), self.value(*b).data());
                let pick = |d: &[f64], i: usize| if d.len() == 1 { d[0] } else { d[i] };
                if self.wants(*a) {
                    accumulate_broadcast(slot(acc, self, *a), g, |i| pick(db, i));
                }
                if self.wants(*b) {
                    accumulate_broadcast(slot(acc, self, *b), g, |i| pick(da, i));
                }
            }
            Op::Relu { a } => {
                let x = self.value(*a).data();
                let dst = slot(acc, self, *a);
                for ((d, gi), xi) in dst.iter_mut().zip(g).zip(x) {
                    if *xi > 0.0 {
                        *d += gi;
                    }
                }
            }
            Op::Scale { a, factor } => {
                let dst = slot(acc, self, *a);
                dst.iter_mut().zip(g).for_each(|(d, gi)| *d += gi * factor);
            }
            Op::Reduce { a, axes, factor } => {
                let (_, map) = reduce_index_map(self.value(*a).shape(), axes);
                let dst = slot(acc, self, *a);
                for (d, &o) in dst.iter_mut().zip(&map) {
                    *d += g[o] * factor;
                }
            }
            Op::Reshape { a } | Op::Narrow { a } => {
                let dst = slot(acc, self, *a);
                dst.iter_mut().zip(g).for_each(|(d, gi)| *d += gi);
            }
            Op::GraphMix { adj, x } => {
                let m = self.value(*adj).shape()[0];
                let xs = self.value(*x).shape();
                let (batch, c) = (xs[0], xs[2]);
                let xd = self.value(*x).data();
                if self.wants(*x) {
                    let a = self.value(*adj).data();
                    let dst = slot(acc, self, *x);
                    for b in 0..batch {
                        let off = b * m * c;
                        gemm_tn(a, &g[off..off + m * c], &mut dst[off..off + m * c], m, m, c);
                    }
                }
                if self.wants(*adj) {
                    let dst = slot(acc, self, *adj);
                    for b in 0..batch {
                        let off = b * m * c;
                        gemm_nt(&g[off..off + m * c], &xd[off..off + m * c], dst, m, c, m);
                    }
                }
            }
            Op::TemporalConv { x, w } => {
                let xs = self.value(*x).shape();
                let ws = self.value(*w).shape();
                let (t, n, cin) = (xs[0], xs[1], xs[2]);
                let (k, cout) = (ws[0], ws[2]);
                let xd = self.value(*x).data();
                let wd = self.value(*w).data();
                if self.wants(*x) {
                    let dst = slot(acc, self, *x);
                    for tap in 0..k {
                        if let Some((lo, hi, shift)) = conv_window(t, k, tap) {
                            let rows = (hi - lo) * n;
                            let src = ((lo as isize + shift) as usize) * n * cin;
                            gemm_nt(
                                &g[lo * n * cout..hi * n * cout],
                                &wd[tap * cin * cout..(tap + 1) * cin * cout],
                                &mut dst[src..src + rows * cin],
                                rows,
                                cout,
                                cin,
                            );
                        }
                    }
                }
                if self.wants(*w) {
                    let dst = slot(acc, self, *w);
                    for tap in 0..k {
                        if let Some((lo, hi, shift)) = conv_window(t, k, tap) {
                            let rows = (hi - lo) * n;
                            let src = ((lo as isize + shift) as usize) * n * cin;
                            gemm_tn(
                                &xd[src..src + rows * cin],
                                &g[lo * n * cout..hi * n * cout],
                                &mut dst[tap * cin * cout..(tap + 1) * cin * cout],
                                cin,
                                rows,
                                cout,
                            );
                        }
                    }
                }
            }
            Op::TimePool { x, stride } => {
                let xs = self.value(*x).shape();
                let frame: usize = xs[1..].iter().product();
                let t_out = node.value.shape()[0];
                let inv = 1.0 / *stride as f64;
                let dst = slot(acc, self, *x);
                for to in 0..t_out {
                    let gf = &g[to * frame..(to + 1) * frame];
                    for j in 0..*stride {
                        let f = to * stride + j;
                        dst[f * frame..(f + 1) * frame]
                            .iter_mut()
                            .zip(gf)
                            .for_each(|(d, gi)| *d += gi * inv);
                    }
                }
            }
            Op::AddBias { x, b } => {
                let c = self.value(*b).numel();
                if self.wants(*x) {
                    let dst = slot(acc, self, *x);
                    dst.iter_mut().zip(g).for_each(|(d, gi)| *d += gi);
                }
                if self.wants(*b) {
                    let dst = slot(acc, self, *b);
                    for row in g.chunks(c) {
                        dst.iter_mut().zip(row).for_each(|(d, gi)| *d += gi);
                    }
                }
            }
            Op::BlockTile {
                spatial,
                temporal,
                links,
            } => {
                let m = self.value(*spatial).shape()[0];
                let size = node.value.shape()[0];
                let tau = size / m;
                for bi in 0..tau {
                    for bj in 0..tau {
                        let target = if bi == bj {
                            *spatial
                        } else if links[bi * tau + bj] {
                            *temporal
                        } else {
                            continue;
                        };
                        if !self.wants(target) {
                            continue;
                        }
                        let dst = slot(acc, self, target);
                        for r in 0..m {
                            let src = (bi * m + r) * size + bj * m;
                            dst[r * m..(r + 1) * m]
                                .iter_mut()
                                .zip(&g[src..src + m])
                                .for_each(|(d, gi)| *d += gi);
                        }
                    }
                }
            }
            Op::Normalize { a, mode } => {
                let n = self.value(*a).shape()[0];
                let av = self.value(*a).data().to_vec();
                let dst = slot(acc, self, *a);
                normalize_backward(&av, g, dst, n, *mode);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            } => {
                let mass: f64 = target.iter().sum();
                let g0 = g[0];
                let dst = slot(acc, self, *logits);
                for ((d, p), t) in dst.iter_mut().zip(probs).zip(target) {
                    *d += g0 * (p * mass - t);
                }
            }
        }
    }
}

/// Gradient accumulator for `v`, allocated on first use.
fn slot<'a>(acc: &'a mut [Option<Vec<f64>>], tape: &Tape, v: Var) -> &'a mut Vec<f64> {
    acc[v.0].get_or_insert_with(|| vec![0.0; tape.nodes[v.0].value.numel()])
}

/// Adds `g[i] * scale(i)` into `dst`, summing everything when `dst` is a
/// broadcast single element.
fn accumulate_broadcast(dst: &mut [f64], g: &[f64], scale: impl Fn(usize) -> f64) {
    if dst.len() == 1 && g.len() != 1 {
        dst[0] += g.iter().enumerate().map(|(i, gi)| gi * scale(i)).sum::<f64>();
    } else if g.len() == 1 {
        for (i, d) in dst.iter_mut().enumerate() {
            *d += g[0] * scale(i);
        }
    } else {
        for (i, (d, gi)) in dst.iter_mut().zip(g).enumerate() {
            *d += gi * scale(i);
        }
    }
}

/// Output rows `[lo, hi)` that read input at `t + shift` for kernel tap `tap`.
fn conv_window(t: usize, k: usize, tap: usize) -> Option<(usize, usize, isize)> {
    let shift = tap as isize - (k / 2) as isize;
    let lo = (-shift).max(0) as usize;
    let hi = (t as isize - shift).min(t as isize);
    if hi <= lo as isize {
        None
    } else {
        Some((lo, hi as usize, shift))
    }
}

/// Output shape of a reduction and, for every input element, the flat index
/// of the output element it contributes to. `axes` must be sorted and valid.
fn reduce_index_map(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let out_shape: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|(i, _)| !axes.contains(i))
        .map(|(_, &d)| d)
        .collect();
    let numel: usize = shape.iter().product();
    // Stride of each input axis in the output layout; zero for reduced axes.
    let mut out_strides = vec![0usize; shape.len()];
    let mut stride = 1;
    for ax in (0..shape.len()).rev() {
        if !axes.contains(&ax) {
            out_strides[ax] = stride;
            stride *= shape[ax];
        }
    }
    let mut map = Vec::with_capacity(numel);
    let mut index = vec![0usize; shape.len()];
    for _ in 0..numel {
        map.push(index.iter().zip(&out_strides).map(|(i, s)| i * s).sum());
        for ax in (0..shape.len()).rev() {
            index[ax] += 1;
            if index[ax] < shape[ax] {
                break;
            }
            index[ax] = 0;
        }
    }
    (out_shape, map)
}

/// Vector-Jacobian product of degree normalization.
///
/// With `d_i = Σ_j |a_ij|` and `s_i = d_i^{-1/2}`, symmetric normalization
/// gives `ā_ij = s_i a_ij s_j`, so
/// `∂L/∂a_kl = G_kl s_k s_l − ½ d_k^{-3/2} sgn(a_kl) u_k` where
/// `u_k = Σ_j G_kj a_kj s_j + Σ_i G_ik a_ik s_i`.
/// Row normalization `ā_ij = a_ij / d_i` gives
/// `∂L/∂a_kl = G_kl / d_k − sgn(a_kl) / d_k² · Σ_j G_kj a_kj`.
/// Zero-degree rows carry no gradient.
fn normalize_backward(a: &[f64], g: &[f64], dst: &mut [f64], n: usize, mode: Normalization) {
    let deg: Vec<f64> = (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum())
        .collect();
    match mode {
        Normalization::Symmetric => {
            let s: Vec<f64> = deg
                .iter()
                .map(|&d| if d > 0.0 { d.powf(-0.5) } else { 0.0 })
                .collect();
            let mut u = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    let w = g[i * n + j] * a[i * n + j];
                    u[i] += w * s[j];
                    u[j] += w * s[i];
                }
            }
            for k in 0..n {
                if deg[k] == 0.0 {
                    continue;
                }
                let c = 0.5 * deg[k].powf(-1.5) * u[k];
                for l in 0..n {
                    let akl = a[k * n + l];
                    dst[k * n + l] += g[k * n + l] * s[k] * s[l] - c * sign(akl);
                }
            }
        }
        Normalization::RowStochastic => {
            for k in 0..n {
                if deg[k] == 0.0 {
                    continue;
                }
                let row_dot: f64 = (0..n).map(|j| g[k * n + j] * a[k * n + j]).sum();
                for l in 0..n {
                    let akl = a[k * n + l];
                    dst[k * n + l] += g[k * n + l] / deg[k] - sign(akl) * row_dot / (deg[k] * deg[k]);
                }
            }
        }
    }
}

/// Derivative of `|x|`, taken as 0 at 0.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
