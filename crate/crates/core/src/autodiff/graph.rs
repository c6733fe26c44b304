use std::collections::HashMap;

use super::kernels::{self, ConvDims};
use super::{AutodiffError, ParamId, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation computed by a node.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// Externally bound tensor.
    Input,
    /// Trainable tensor read from a [`ParamStore`].
    Param(ParamId),
    /// `[B, in] × [out, in]ᵀ + [out]`.
    Dense,
    /// `[B, C_in, T]` with weights `[C_out, C_in, K]` and bias `[C_out]`.
    DilatedCausalConv1d {
        dilation: usize,
    },
    LeakyRelu {
        slope: f64,
    },
    Sigmoid,
    Tanh,
    Add,
    /// `scale·x + shift`.
    Affine {
        scale: f64,
        shift: f64,
    },
    Clamp {
        lo: f64,
        hi: f64,
    },
    /// Keeps the leading (batch) dimension, reshapes the rest to `inner`.
    Reshape {
        inner: Vec<usize>,
    },
    /// Mean of squared differences, scalar output.
    Mse,
    /// Mean binary cross-entropy of `sigmoid(input)` against a constant label.
    Bce {
        target: f64,
    },
    Sum,
    Mean,
    /// `mean + exp(logvar/2)·eps`.
    Reparameterize,
    /// Batch-averaged `KL(N(mean, exp(logvar)) || N(0, 1))`.
    KlPrior,
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Dense => "dense",
            Op::DilatedCausalConv1d { .. } => "dilated-causal-conv1d",
            Op::LeakyRelu { .. } => "leaky-relu",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Add => "add",
            Op::Affine { .. } => "affine",
            Op::Clamp { .. } => "clamp",
            Op::Reshape { .. } => "reshape",
            Op::Mse => "mse",
            Op::Bce { .. } => "bce",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Reparameterize => "reparameterize",
            Op::KlPrior => "kl-prior",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    label: String,
    requires_grad: bool,
    value: Option<Tensor>,
    grad: Option<Tensor>,
}

/// Tensors bound to input nodes for one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    map: HashMap<NodeId, Tensor>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: NodeId, value: Tensor) -> Self {
        self.insert(node, value);
        self
    }

    pub fn insert(&mut self, node: NodeId, value: Tensor) {
        self.map.insert(node, value);
    }

    pub fn get(&self, node: NodeId) -> Option<&Tensor> {
        self.map.get(&node)
    }
}

/// A computation DAG built node by node.
///
/// Nodes can only reference nodes created before them, so construction order
/// is a topological order and the graph is acyclic by construction.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    evaluated: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>) -> NodeId {
        for inp in &inputs {
            assert!(inp.0 < self.nodes.len(), "node input refers to a later node");
        }
        let requires_grad = match op {
            Op::Input => false,
            Op::Param(_) => true,
            _ => inputs.iter().any(|i| self.nodes[i.0].requires_grad),
        };
        let label = format!("{}#{}", op.kind(), self.nodes.len());
        self.nodes.push(Node { op, inputs, label, requires_grad, value: None, grad: None });
        self.evaluated = false;
        NodeId(self.nodes.len() - 1)
    }

    /// Replaces a node's label, used in error messages.
    pub fn set_label(&mut self, node: NodeId, label: impl Into<String>) {
        self.nodes[node.0].label = label.into();
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.nodes[node.0].label
    }

    pub fn op(&self, node: NodeId) -> &Op {
        &self.nodes[node.0].op
    }

    pub fn input(&mut self, label: &str) -> NodeId {
        let id = self.push(Op::Input, vec![]);
        self.set_label(id, label);
        id
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.push(Op::Param(id), vec![])
    }

    pub fn dense(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> NodeId {
        self.push(Op::Dense, vec![x, weight, bias])
    }

    pub fn conv1d(&mut self, x: NodeId, weight: NodeId, bias: NodeId, dilation: usize) -> NodeId {
        self.push(Op::DilatedCausalConv1d { dilation }, vec![x, weight, bias])
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        self.push(Op::LeakyRelu { slope }, vec![x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Sigmoid, vec![x])
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Tanh, vec![x])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add, vec![a, b])
    }

    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> NodeId {
        self.push(Op::Affine { scale, shift }, vec![x])
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        self.push(Op::Clamp { lo, hi }, vec![x])
    }

    pub fn reshape(&mut self, x: NodeId, inner: &[usize]) -> NodeId {
        self.push(Op::Reshape { inner: inner.to_vec() }, vec![x])
    }

    pub fn mse(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mse, vec![a, b])
    }

    pub fn bce_with_logits(&mut self, logits: NodeId, target: f64) -> NodeId {
        self.push(Op::Bce { target }, vec![logits])
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Sum, vec![x])
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Mean, vec![x])
    }

    pub fn reparameterize(&mut self, mean: NodeId, logvar: NodeId, eps: NodeId) -> NodeId {
        self.push(Op::Reparameterize, vec![mean, logvar, eps])
    }

    pub fn kl_prior(&mut self, mean: NodeId, logvar: NodeId) -> NodeId {
        self.push(Op::KlPrior, vec![mean, logvar])
    }

    /// Value cached by the last forward pass.
    pub fn value(&self, node: NodeId) -> Option<&Tensor> {
        self.nodes[node.0].value.as_ref()
    }

    /// Gradient of the last backward root with respect to `node`, if the
    /// node was reached.
    pub fn grad(&self, node: NodeId) -> Option<&Tensor> {
        self.nodes[node.0].grad.as_ref()
    }

    /// Scalar value of a node after forward.
    pub fn scalar(&self, node: NodeId) -> Result<f64, AutodiffError> {
        let v = self.value(node).ok_or(AutodiffError::NotEvaluated)?;
        if !v.is_scalar() {
            return Err(AutodiffError::NonScalarRoot { shape: v.shape().to_vec() });
        }
        Ok(v.item())
    }

    /// Evaluates every node in construction order and caches the values.
    pub fn forward(&mut self, params: &ParamStore, bindings: &Bindings) -> Result<(), AutodiffError> {
        self.evaluated = false;
        for i in 0..self.nodes.len() {
            let value = self.eval_node(i, params, bindings)?;
            let node = &mut self.nodes[i];
            node.value = Some(value);
            node.grad = None;
        }
        self.evaluated = true;
        Ok(())
    }

    /// Runs forward and returns a copy of `root`'s value.
    pub fn eval(&mut self, root: NodeId, params: &ParamStore, bindings: &Bindings) -> Result<Tensor, AutodiffError> {
        self.forward(params, bindings)?;
        Ok(self.nodes[root.0].value.clone().expect("evaluated"))
    }

    fn val(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0].value.as_ref().expect("inputs are evaluated before their consumers")
    }

    fn mismatch(&self, i: usize, detail: String) -> AutodiffError {
        AutodiffError::ShapeMismatch { node: self.nodes[i].label.clone(), detail }
    }

    fn eval_node(&self, i: usize, params: &ParamStore, bindings: &Bindings) -> Result<Tensor, AutodiffError> {
        let node = &self.nodes[i];
        let arg = |k: usize| self.val(node.inputs[k]);
        match &node.op {
            Op::Input => {
                bindings.get(NodeId(i)).cloned().ok_or_else(|| AutodiffError::UnboundInput { node: node.label.clone() })
            }
            Op::Param(pid) => Ok(params.get(*pid).value.clone()),
            Op::Dense => {
                let (x, w, b) = (arg(0), arg(1), arg(2));
                let (batch, inputs, outputs) = self.dense_dims(i, x, w, b)?;
                let out = kernels::dense_forward(batch, inputs, outputs, x.data(), w.data(), b.data());
                Tensor::new(vec![batch, outputs], out)
            }
            Op::DilatedCausalConv1d { dilation } => {
                let (x, w, b) = (arg(0), arg(1), arg(2));
                let dims = self.conv_dims(i, x, w, b, *dilation)?;
                let out = kernels::conv1d_forward(dims, x.data(), w.data(), b.data());
                Tensor::new(vec![dims.batch, dims.out_channels, dims.time], out)
            }
            Op::LeakyRelu { slope } => Ok(map(arg(0), |v| if v > 0.0 { v } else { slope * v })),
            Op::Sigmoid => Ok(map(arg(0), kernels::sigmoid)),
            Op::Tanh => Ok(map(arg(0), f64::tanh)),
            Op::Affine { scale, shift } => Ok(map(arg(0), |v| scale * v + shift)),
            Op::Clamp { lo, hi } => Ok(map(arg(0), |v| v.clamp(*lo, *hi))),
            Op::Add => {
                let (a, b) = (arg(0), arg(1));
                self.same_shape(i, a, b)?;
                let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
                Tensor::new(a.shape().to_vec(), data)
            }
            Op::Reshape { inner } => {
                let x = arg(0);
                let batch = *x.shape().first().unwrap_or(&1);
                let mut shape = vec![batch];
                shape.extend_from_slice(inner);
                x.clone()
                    .reshape(shape.clone())
                    .map_err(|_| self.mismatch(i, format!("cannot reshape {:?} to {:?}", x.shape(), shape)))
            }
            Op::Mse => {
                let (a, b) = (arg(0), arg(1));
                self.same_shape(i, a, b)?;
                self.non_empty(i, a)?;
                let sq: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
                Ok(Tensor::scalar(sq / a.len() as f64))
            }
            Op::Bce { target } => {
                let x = arg(0);
                self.non_empty(i, x)?;
                let total: f64 = x.data().iter().map(|&l| kernels::bce_with_logit(l, *target)).sum();
                Ok(Tensor::scalar(total / x.len() as f64))
            }
            Op::Sum => Ok(Tensor::scalar(arg(0).data().iter().sum())),
            Op::Mean => {
                let x = arg(0);
                self.non_empty(i, x)?;
                Ok(Tensor::scalar(x.data().iter().sum::<f64>() / x.len() as f64))
            }
            Op::Reparameterize => {
                let (m, lv, e) = (arg(0), arg(1), arg(2));
                self.same_shape(i, m, lv)?;
                self.same_shape(i, m, e)?;
                let data =
                    m.data().iter().zip(lv.data()).zip(e.data()).map(|((m, lv), e)| m + (0.5 * lv).exp() * e).collect();
                Tensor::new(m.shape().to_vec(), data)
            }
            Op::KlPrior => {
                let (m, lv) = (arg(0), arg(1));
                self.same_shape(i, m, lv)?;
                let batch = kl_batch(m);
                let total: f64 = m.data().iter().zip(lv.data()).map(|(m, lv)| m * m + lv.exp() - 1.0 - lv).sum();
                Ok(Tensor::scalar(0.5 * total / batch as f64))
            }
        }
    }

    fn same_shape(&self, i: usize, a: &Tensor, b: &Tensor) -> Result<(), AutodiffError> {
        if a.shape() != b.shape() {
            return Err(self.mismatch(i, format!("operand shapes {:?} and {:?} differ", a.shape(), b.shape())));
        }
        Ok(())
    }

    fn non_empty(&self, i: usize, a: &Tensor) -> Result<(), AutodiffError> {
        if a.is_empty() {
            return Err(self.mismatch(i, "empty operand".into()));
        }
        Ok(())
    }

    fn dense_dims(&self, i: usize, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize), AutodiffError> {
        let (xs, ws, bs) = (x.shape(), w.shape(), b.shape());
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[1] || bs[0] != ws[0] {
            return Err(
                self.mismatch(i, format!("dense expects x [B, in], w [out, in], b [out]; got {xs:?}, {ws:?}, {bs:?}"))
            );
        }
        Ok((xs[0], xs[1], ws[0]))
    }

    fn conv_dims(
        &self,
        i: usize,
        x: &Tensor,
        w: &Tensor,
        b: &Tensor,
        dilation: usize,
    ) -> Result<ConvDims, AutodiffError> {
        if dilation == 0 {
            return Err(AutodiffError::InvalidDilation { node: self.nodes[i].label.clone() });
        }
        let (xs, ws, bs) = (x.shape(), w.shape(), b.shape());
        if xs.len() != 3 || ws.len() != 3 || bs.len() != 1 || ws[2] == 0 || bs[0] != ws[0] {
            return Err(self.mismatch(
                i,
                format!("conv expects x [B, C_in, T], w [C_out, C_in, K], b [C_out]; got {xs:?}, {ws:?}, {bs:?}"),
            ));
        }
        if xs[1] != ws[1] {
            return Err(AutodiffError::ChannelMismatch {
                node: self.nodes[i].label.clone(),
                expected: ws[1],
                got: xs[1],
            });
        }
        Ok(ConvDims { batch: xs[0], in_channels: xs[1], out_channels: ws[0], time: xs[2], kernel: ws[2], dilation })
    }

    /// Back-propagates from a scalar `root`, accumulating into the gradient
    /// slots of every parameter the root depends on.
    ///
    /// Parameter gradients are added to, never overwritten; call
    /// [`ParamStore::zero_grad`] between independent backward passes.
    pub fn backward(&mut self, root: NodeId, params: &mut ParamStore) -> Result<(), AutodiffError> {
        let mask: Vec<bool> = self.nodes.iter().map(|n| n.requires_grad).collect();
        self.backward_masked(root, params, &mask)
    }

    /// Like [`Graph::backward`], but only parameters in `targets` receive
    /// gradients, and sub-graphs that cannot reach them are skipped.
    pub fn backward_to(
        &mut self,
        root: NodeId,
        params: &mut ParamStore,
        targets: &[ParamId],
    ) -> Result<(), AutodiffError> {
        let mut mask = vec![false; self.nodes.len()];
        for i in 0..self.nodes.len() {
            mask[i] = match self.nodes[i].op {
                Op::Param(pid) => targets.contains(&pid),
                Op::Input => false,
                _ => self.nodes[i].inputs.iter().any(|n| mask[n.0]),
            };
        }
        self.backward_masked(root, params, &mask)
    }

    fn backward_masked(&mut self, root: NodeId, params: &mut ParamStore, mask: &[bool]) -> Result<(), AutodiffError> {
        if !self.evaluated {
            return Err(AutodiffError::BackwardBeforeForward);
        }
        let root_shape = self.val(root).shape().to_vec();
        if !self.val(root).is_scalar() {
            return Err(AutodiffError::NonScalarRoot { shape: root_shape });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::filled(&root_shape, 1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if let Op::Param(pid) = self.nodes[i].op {
                params.get_mut(pid).grad.add_assign(&g);
            }
            for (input, contribution) in self.local_grads(i, &g, mask)? {
                match &mut grads[input.0] {
                    Some(existing) => existing.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `i` for each input that needs a gradient.
    fn local_grads(&self, i: usize, g: &Tensor, mask: &[bool]) -> Result<Vec<(NodeId, Tensor)>, AutodiffError> {
        let node = &self.nodes[i];
        let ins = &node.inputs;
        let wants = |k: usize| mask[ins[k].0];
        let arg = |k: usize| self.val(ins[k]);
        let out = self.val(NodeId(i));
        let mut result = Vec::with_capacity(ins.len());
        let mut emit = |k: usize, data: Vec<f64>, shape: &[usize]| {
            if wants(k) {
                result.push((ins[k], Tensor::new(shape.to_vec(), data).expect("gradient shape")));
            }
        };
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::Dense => {
                let (x, w, b) = (arg(0), arg(1), arg(2));
                let (batch, inputs, outputs) = self.dense_dims(i, x, w, b)?;
                let (gx, gw, gb) = kernels::dense_backward(batch, inputs, outputs, x.data(), w.data(), g.data());
                emit(0, gx, x.shape());
                emit(1, gw, w.shape());
                emit(2, gb, b.shape());
            }
            Op::DilatedCausalConv1d { dilation } => {
                let (x, w, b) = (arg(0), arg(1), arg(2));
                let dims = self.conv_dims(i, x, w, b, *dilation)?;
                let (gx, gw, gb) = kernels::conv1d_backward(dims, x.data(), w.data(), g.data());
                emit(0, gx, x.shape());
                emit(1, gw, w.shape());
                emit(2, gb, b.shape());
            }
            Op::LeakyRelu { slope } => {
                let x = arg(0);
                let data = zip_map(g, x, |g, x| if x > 0.0 { g } else { slope * g });
                emit(0, data, x.shape());
            }
            Op::Sigmoid => {
                let data = zip_map(g, out, |g, y| g * y * (1.0 - y));
                emit(0, data, out.shape());
            }
            Op::Tanh => {
                let data = zip_map(g, out, |g, y| g * (1.0 - y * y));
                emit(0, data, out.shape());
            }
            Op::Affine { scale, .. } => {
                let data = g.data().iter().map(|g| g * scale).collect();
                emit(0, data, g.shape());
            }
            Op::Clamp { lo, hi } => {
                let x = arg(0);
                let data = zip_map(g, x, |g, x| if x >= *lo && x <= *hi { g } else { 0.0 });
                emit(0, data, x.shape());
            }
            Op::Add => {
                emit(0, g.data().to_vec(), g.shape());
                emit(1, g.data().to_vec(), g.shape());
            }
            Op::Reshape { .. } => {
                emit(0, g.data().to_vec(), arg(0).shape());
            }
            Op::Mse => {
                let (a, b) = (arg(0), arg(1));
                let scale = 2.0 * g.item() / a.len() as f64;
                let da: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| scale * (x - y)).collect();
                let db = da.iter().map(|v| -v).collect();
                emit(0, da, a.shape());
                emit(1, db, b.shape());
            }
            Op::Bce { target } => {
                let x = arg(0);
                let scale = g.item() / x.len() as f64;
                let data = x.data().iter().map(|&l| scale * (kernels::sigmoid(l) - target)).collect();
                emit(0, data, x.shape());
            }
            Op::Sum => {
                let x = arg(0);
                emit(0, vec![g.item(); x.len()], x.shape());
            }
            Op::Mean => {
                let x = arg(0);
                emit(0, vec![g.item() / x.len() as f64; x.len()], x.shape());
            }
            Op::Reparameterize => {
                let (m, lv, e) = (arg(0), arg(1), arg(2));
                let sd: Vec<f64> = lv.data().iter().map(|lv| (0.5 * lv).exp()).collect();
                let dlv = g.data().iter().zip(&sd).zip(e.data()).map(|((g, s), e)| 0.5 * g * s * e).collect();
                let de = g.data().iter().zip(&sd).map(|(g, s)| g * s).collect();
                emit(0, g.data().to_vec(), m.shape());
                emit(1, dlv, lv.shape());
                emit(2, de, e.shape());
            }
            Op::KlPrior => {
                let (m, lv) = (arg(0), arg(1));
                let scale = g.item() / kl_batch(m) as f64;
                let dm = m.data().iter().map(|m| scale * m).collect();
                let dlv = lv.data().iter().map(|lv| scale * 0.5 * (lv.exp() - 1.0)).collect();
                emit(0, dm, m.shape());
                emit(1, dlv, lv.shape());
            }
        }
        Ok(result)
    }
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

fn zip_map(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    g.data().iter().zip(x.data()).map(|(&g, &x)| f(g, x)).collect()
}

/// Rows averaged over by the prior loss: the leading dimension of a batched
/// tensor, or 1 for a single vector.
fn kl_batch(t: &Tensor) -> usize {
    if t.shape().len() >= 2 {
        t.shape()[0].max(1)
    } else {
        1
    }
}
