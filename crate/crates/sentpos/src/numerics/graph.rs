//! Reverse-mode automatic differentiation over a flat expression graph.
//!
//! A [`Graph`] records one forward computation; node values are computed
//! eagerly at construction and `backward` walks the nodes in reverse creation
//! order. Parameters bind once per graph, so their gradients accumulate over
//! every use (weight sharing falls out for free). All accumulation happens in
//! node-index order, which keeps results bit-reproducible.

use std::collections::HashMap;

use super::param::{ParamId, ParamSet};
use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use super::NumericsError;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

enum Op {
    Leaf,
    Add(NodeId, NodeId),
    /// Broadcast-add a `[d]` row vector to every row of a `[n, d]` matrix.
    AddRow {
        mat: NodeId,
        row: NodeId,
    },
    Matmul(NodeId, NodeId),
    /// `a @ b^T` without materializing the transpose.
    MatmulNt(NodeId, NodeId),
    Scale(NodeId, f64),
    SliceCols {
        x: NodeId,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<NodeId>),
    SoftmaxRows {
        x: NodeId,
        mask: Option<Vec<bool>>,
    },
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    Gelu(NodeId),
    /// Rows of `table` selected by `indices`; gradients scatter-add back.
    Gather {
        table: NodeId,
        indices: Vec<usize>,
    },
    PickRow {
        x: NodeId,
        row: usize,
    },
    StackRows(Vec<NodeId>),
    Reshape(NodeId),
    CrossEntropy {
        logits: NodeId,
        gold: usize,
    },
    MeanScalars(Vec<NodeId>),
    SumAll(NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
    param: Option<ParamId>,
}

/// One recorded forward computation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_leaves: HashMap<usize, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        debug_assert!(
            value.all_finite(),
            "non-finite forward value at node {}",
            self.nodes.len()
        );
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value,
            param: None,
        });
        id
    }

    /// A constant leaf; no gradient is reported for it.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Binds a parameter as a leaf. Repeated binds of the same parameter
    /// return the same node, so all uses share one gradient accumulator.
    pub fn param(&mut self, set: &ParamSet, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_leaves.get(&id.index()) {
            return node;
        }
        let node = self.push(Op::Leaf, set.get(id).value.clone());
        self.nodes[node.0].param = Some(id);
        self.param_leaves.insert(id.index(), node);
        node
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", va.shape(), vb.shape()),
            });
        }
        let mut out = va.clone();
        out.add_assign(vb);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn add_row(&mut self, mat: NodeId, row: NodeId) -> Result<NodeId, NumericsError> {
        let (vm, vr) = (self.value(mat), self.value(row));
        if vm.shape().len() != 2 || vr.shape() != [vm.cols()] {
            return Err(NumericsError::ShapeMismatch {
                op: "add_row",
                detail: format!("matrix {:?} + row {:?}", vm.shape(), vr.shape()),
            });
        }
        let mut out = vm.clone();
        let d = out.cols();
        let rd = vr.data().to_vec();
        for r in 0..out.rows() {
            let orow = out.row_mut(r);
            for j in 0..d {
                orow[j] += rd[j];
            }
        }
        Ok(self.push(Op::AddRow { mat, row }, out))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.cols() != vb.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                detail: format!("{:?} @ {:?}", va.shape(), vb.shape()),
            });
        }
        let mut out = Tensor::zeros(&[va.rows(), vb.cols()]);
        matmul_acc(va, vb, &mut out);
        Ok(self.push(Op::Matmul(a, b), out))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.cols() != vb.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul_nt",
                detail: format!("{:?} @ {:?}^T", va.shape(), vb.shape()),
            });
        }
        let mut out = Tensor::zeros(&[va.rows(), vb.rows()]);
        matmul_nt_acc(va, vb, &mut out);
        Ok(self.push(Op::MatmulNt(a, b), out))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v *= factor;
        }
        self.push(Op::Scale(x, factor), out)
    }

    pub fn slice_cols(
        &mut self,
        x: NodeId,
        start: usize,
        len: usize,
    ) -> Result<NodeId, NumericsError> {
        let vx = self.value(x);
        if vx.shape().len() != 2 || start + len > vx.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "slice_cols",
                detail: format!("cols {}..{} of {:?}", start, start + len, vx.shape()),
            });
        }
        let mut out = Tensor::zeros(&[vx.rows(), len]);
        for r in 0..vx.rows() {
            out.row_mut(r).copy_from_slice(&vx.row(r)[start..start + len]);
        }
        Ok(self.push(Op::SliceCols { x, start, len }, out))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        if parts.is_empty() {
            return Err(NumericsError::ShapeMismatch {
                op: "concat_cols",
                detail: "no inputs".into(),
            });
        }
        let n = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(&[n, total]);
        let mut offset = 0;
        for &p in parts {
            let vp = self.value(p);
            if vp.rows() != n {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_cols",
                    detail: format!("row counts {} vs {}", n, vp.rows()),
                });
            }
            let w = vp.cols();
            for r in 0..n {
                out.row_mut(r)[offset..offset + w].copy_from_slice(vp.row(r));
            }
            offset += w;
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    /// Row-wise softmax with max subtraction. `mask[j] = true` excludes
    /// column `j` from every row (its output is exactly 0).
    pub fn softmax_rows(
        &mut self,
        x: NodeId,
        mask: Option<&[bool]>,
    ) -> Result<NodeId, NumericsError> {
        let vx = self.value(x);
        if vx.shape().len() != 2 {
            return Err(NumericsError::ShapeMismatch {
                op: "softmax_rows",
                detail: format!("{:?}", vx.shape()),
            });
        }
        let m = vx.cols();
        if let Some(mask) = mask {
            if mask.len() != m {
                return Err(NumericsError::ShapeMismatch {
                    op: "softmax_rows",
                    detail: format!("mask len {} vs {} columns", mask.len(), m),
                });
            }
            if mask.iter().all(|&b| b) {
                return Err(NumericsError::AllMasked);
            }
        }
        let mut out = Tensor::zeros(&[vx.rows(), m]);
        for r in 0..vx.rows() {
            let xrow = vx.row(r);
            let live = |j: usize| mask.map_or(true, |mk| !mk[j]);
            let mut max = f64::NEG_INFINITY;
            for j in 0..m {
                if live(j) && xrow[j] > max {
                    max = xrow[j];
                }
            }
            let orow = out.row_mut(r);
            let mut sum = 0.0;
            for j in 0..m {
                if live(j) {
                    let e = (xrow[j] - max).exp();
                    orow[j] = e;
                    sum += e;
                }
            }
            for v in orow.iter_mut() {
                *v /= sum;
            }
        }
        Ok(self.push(
            Op::SoftmaxRows {
                x,
                mask: mask.map(|s| s.to_vec()),
            },
            out,
        ))
    }

    /// Row-wise layer normalization with learnable gain and bias.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    ) -> Result<NodeId, NumericsError> {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        if vx.shape().len() != 2 || vg.shape() != [vx.cols()] || vb.shape() != [vx.cols()] {
            return Err(NumericsError::ShapeMismatch {
                op: "layer_norm",
                detail: format!(
                    "x {:?}, gain {:?}, bias {:?}",
                    vx.shape(),
                    vg.shape(),
                    vb.shape()
                ),
            });
        }
        let d = vx.cols();
        let mut out = Tensor::zeros(&[vx.rows(), d]);
        let g = vg.data().to_vec();
        let b = vb.data().to_vec();
        for r in 0..vx.rows() {
            let xrow = vx.row(r);
            let mean = xrow.iter().sum::<f64>() / d as f64;
            let var = xrow.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            let orow = out.row_mut(r);
            for j in 0..d {
                orow[j] = (xrow[j] - mean) * inv * g[j] + b[j];
            }
        }
        Ok(self.push(Op::LayerNorm { x, gain, bias, eps }, out))
    }

    /// Elementwise tanh-approximation GELU.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            let u = GELU_C * (*v + GELU_A * v.powi(3));
            *v = 0.5 * *v * (1.0 + u.tanh());
        }
        self.push(Op::Gelu(x), out)
    }

    /// Selects rows of a table; indices may repeat (gradients accumulate).
    pub fn gather(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId, NumericsError> {
        let vt = self.value(table);
        if vt.shape().len() != 2 {
            return Err(NumericsError::ShapeMismatch {
                op: "gather",
                detail: format!("{:?}", vt.shape()),
            });
        }
        let rows = vt.rows();
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(NumericsError::IndexOutOfBounds {
                op: "gather",
                index: bad,
                bound: rows,
            });
        }
        let mut out = Tensor::zeros(&[indices.len(), vt.cols()]);
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(vt.row(i));
        }
        Ok(self.push(
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            out,
        ))
    }

    /// Extracts one row of a matrix as a `[d]` vector.
    pub fn pick_row(&mut self, x: NodeId, row: usize) -> Result<NodeId, NumericsError> {
        let vx = self.value(x);
        if vx.shape().len() != 2 || row >= vx.rows() {
            return Err(NumericsError::IndexOutOfBounds {
                op: "pick_row",
                index: row,
                bound: if vx.shape().len() == 2 { vx.rows() } else { 0 },
            });
        }
        let out = Tensor::from_vec(&[vx.cols()], vx.row(row).to_vec())?;
        Ok(self.push(Op::PickRow { x, row }, out))
    }

    /// Stacks `[d]` vectors into a `[n, d]` matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId, NumericsError> {
        if rows.is_empty() {
            return Err(NumericsError::ShapeMismatch {
                op: "stack_rows",
                detail: "no inputs".into(),
            });
        }
        let d = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let vr = self.value(r);
            if vr.shape() != [d] {
                return Err(NumericsError::ShapeMismatch {
                    op: "stack_rows",
                    detail: format!("expected [{}], got {:?}", d, vr.shape()),
                });
            }
            data.extend_from_slice(vr.data());
        }
        let out = Tensor::from_vec(&[rows.len(), d], data)?;
        Ok(self.push(Op::StackRows(rows.to_vec()), out))
    }

    /// Reinterprets the shape; data order is unchanged.
    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId, NumericsError> {
        let out = self.value(x).reshaped(shape)?;
        Ok(self.push(Op::Reshape(x), out))
    }

    /// `-log softmax(logits)[gold]` for a `[c]` logits vector.
    pub fn cross_entropy(&mut self, logits: NodeId, gold: usize) -> Result<NodeId, NumericsError> {
        let vl = self.value(logits);
        if vl.shape().len() != 1 || gold >= vl.len() {
            return Err(NumericsError::IndexOutOfBounds {
                op: "cross_entropy",
                index: gold,
                bound: vl.len(),
            });
        }
        let max = vl.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + vl.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - vl.data()[gold];
        Ok(self.push(Op::CrossEntropy { logits, gold }, Tensor::scalar(loss)))
    }

    /// Mean of scalar nodes.
    pub fn mean_scalars(&mut self, xs: &[NodeId]) -> Result<NodeId, NumericsError> {
        if xs.is_empty() {
            return Err(NumericsError::ShapeMismatch {
                op: "mean_scalars",
                detail: "no inputs".into(),
            });
        }
        let mut sum = 0.0;
        for &x in xs {
            let v = self.value(x);
            if v.len() != 1 {
                return Err(NumericsError::ShapeMismatch {
                    op: "mean_scalars",
                    detail: format!("non-scalar input {:?}", v.shape()),
                });
            }
            sum += v.item();
        }
        let out = Tensor::scalar(sum / xs.len() as f64);
        Ok(self.push(Op::MeanScalars(xs.to_vec()), out))
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).data().iter().sum();
        self.push(Op::SumAll(x), Tensor::scalar(s))
    }

    /// Reverse pass from a scalar loss node. Returns gradients indexed by
    /// node; use [`Graph::export_grads`] to move them into a `ParamSet`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NumericsError> {
        if self.value(loss).len() != 1 {
            return Err(NumericsError::ShapeMismatch {
                op: "backward",
                detail: format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_vec(
            self.value(loss).shape(),
            vec![1.0],
        )?);
        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.accumulate(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    /// Adds this graph's parameter gradients (from `backward`) into the set.
    pub fn export_grads(&self, grads: &Gradients, set: &mut ParamSet) {
        for (idx, node) in self.nodes.iter().enumerate() {
            if let (Some(pid), Some(g)) = (node.param, grads.grads[idx].as_ref()) {
                set.get_mut(pid).grad.add_assign(g);
            }
        }
    }

    fn grad_slot<'a>(&self, grads: &'a mut [Option<Tensor>], id: NodeId) -> &'a mut Tensor {
        let shape = self.value(id).shape().to_vec();
        grads[id.0].get_or_insert_with(|| Tensor::zeros(&shape))
    }

    #[allow(clippy::too_many_lines)]
    fn accumulate(&self, idx: usize, dy: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.grad_slot(grads, *a).add_assign(dy);
                self.grad_slot(grads, *b).add_assign(dy);
            }
            Op::AddRow { mat, row } => {
                self.grad_slot(grads, *mat).add_assign(dy);
                let d = dy.cols();
                let gr = self.grad_slot(grads, *row);
                for r in 0..dy.rows() {
                    let drow = dy.row(r);
                    let gd = gr.data_mut();
                    for j in 0..d {
                        gd[j] += drow[j];
                    }
                }
            }
            Op::Matmul(a, b) => {
                // dA += dY @ B^T ; dB += A^T @ dY
                let vb = self.value(*b).clone();
                matmul_nt_acc(dy, &vb, self.grad_slot(grads, *a));
                let va = self.value(*a).clone();
                matmul_tn_acc(&va, dy, self.grad_slot(grads, *b));
            }
            Op::MatmulNt(a, b) => {
                // Y = A @ B^T : dA += dY @ B ; dB += dY^T @ A
                let vb = self.value(*b).clone();
                matmul_acc(dy, &vb, self.grad_slot(grads, *a));
                let va = self.value(*a).clone();
                matmul_tn_acc(dy, &va, self.grad_slot(grads, *b));
            }
            Op::Scale(x, f) => {
                let gx = self.grad_slot(grads, *x);
                for (g, d) in gx.data_mut().iter_mut().zip(dy.data()) {
                    *g += f * d;
                }
            }
            Op::SliceCols { x, start, len } => {
                let gx = self.grad_slot(grads, *x);
                for r in 0..dy.rows() {
                    let drow = dy.row(r);
                    let grow = gx.row_mut(r);
                    for j in 0..*len {
                        grow[start + j] += drow[j];
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let gp = self.grad_slot(grads, p);
                    for r in 0..dy.rows() {
                        let drow = &dy.row(r)[offset..offset + w];
                        let grow = gp.row_mut(r);
                        for j in 0..w {
                            grow[j] += drow[j];
                        }
                    }
                    offset += w;
                }
            }
            Op::SoftmaxRows { x, mask } => {
                let y = &self.nodes[idx].value;
                let m = y.cols();
                let gx = self.grad_slot(grads, *x);
                for r in 0..y.rows() {
                    let yrow = y.row(r);
                    let drow = dy.row(r);
                    let dot: f64 = (0..m)
                        .filter(|&j| mask.as_ref().map_or(true, |mk| !mk[j]))
                        .map(|j| yrow[j] * drow[j])
                        .sum();
                    let grow = gx.row_mut(r);
                    for j in 0..m {
                        if mask.as_ref().map_or(true, |mk| !mk[j]) {
                            grow[j] += yrow[j] * (drow[j] - dot);
                        }
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let vx = self.value(*x);
                let vg = self.value(*gain);
                let d = vx.cols();
                // Recompute per-row stats from the saved input.
                let mut dxhat_buf = vec![0.0; d];
                let mut xhat_buf = vec![0.0; d];
                for r in 0..vx.rows() {
                    let xrow = vx.row(r);
                    let drow = dy.row(r);
                    let mean = xrow.iter().sum::<f64>() / d as f64;
                    let var = xrow.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
                    let inv = 1.0 / (var + eps).sqrt();
                    for j in 0..d {
                        xhat_buf[j] = (xrow[j] - mean) * inv;
                        dxhat_buf[j] = drow[j] * vg.data()[j];
                    }
                    let mean_dxhat = dxhat_buf.iter().sum::<f64>() / d as f64;
                    let mean_dxhat_xhat = dxhat_buf
                        .iter()
                        .zip(&xhat_buf)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        / d as f64;
                    {
                        let gx = self.grad_slot(grads, *x);
                        let grow = gx.row_mut(r);
                        for j in 0..d {
                            grow[j] +=
                                inv * (dxhat_buf[j] - mean_dxhat - xhat_buf[j] * mean_dxhat_xhat);
                        }
                    }
                    {
                        let gg = self.grad_slot(grads, *gain);
                        for j in 0..d {
                            gg.data_mut()[j] += drow[j] * xhat_buf[j];
                        }
                    }
                    {
                        let gb = self.grad_slot(grads, *bias);
                        for j in 0..d {
                            gb.data_mut()[j] += drow[j];
                        }
                    }
                }
            }
            Op::Gelu(x) => {
                let vx = self.value(*x).clone();
                let gx = self.grad_slot(grads, *x);
                for ((g, &v), &d) in gx.data_mut().iter_mut().zip(vx.data()).zip(dy.data()) {
                    let u = GELU_C * (v + GELU_A * v.powi(3));
                    let t = u.tanh();
                    let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                    *g += d * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
                }
            }
            Op::Gather { table, indices } => {
                let gt = self.grad_slot(grads, *table);
                for (r, &i) in indices.iter().enumerate() {
                    let drow = dy.row(r);
                    let grow = gt.row_mut(i);
                    for j in 0..drow.len() {
                        grow[j] += drow[j];
                    }
                }
            }
            Op::PickRow { x, row } => {
                let gx = self.grad_slot(grads, *x);
                let grow = gx.row_mut(*row);
                for (g, d) in grow.iter_mut().zip(dy.data()) {
                    *g += d;
                }
            }
            Op::StackRows(rows) => {
                for (r, &src) in rows.iter().enumerate() {
                    let gsrc = self.grad_slot(grads, src);
                    for (g, d) in gsrc.data_mut().iter_mut().zip(dy.row(r)) {
                        *g += d;
                    }
                }
            }
            Op::Reshape(x) => {
                let gx = self.grad_slot(grads, *x);
                for (g, d) in gx.data_mut().iter_mut().zip(dy.data()) {
                    *g += d;
                }
            }
            Op::CrossEntropy { logits, gold } => {
                let vl = self.value(*logits);
                let max = vl.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = vl.data().iter().map(|v| (v - max).exp()).sum();
                let d = dy.item();
                let gl = self.grad_slot(grads, *logits);
                for (j, g) in gl.data_mut().iter_mut().enumerate() {
                    let p = (vl.data()[j] - max).exp() / sum;
                    *g += d * (p - if j == *gold { 1.0 } else { 0.0 });
                }
            }
            Op::MeanScalars(xs) => {
                let w = dy.item() / xs.len() as f64;
                for &x in xs {
                    self.grad_slot(grads, x).data_mut()[0] += w;
                }
            }
            Op::SumAll(x) => {
                let d = dy.item();
                let gx = self.grad_slot(grads, *x);
                for g in gx.data_mut() {
                    *g += d;
                }
            }
        }
    }
}

/// Per-node gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }
}

/// `x @ w + b` with broadcast bias.
pub fn linear(
    g: &mut Graph,
    x: NodeId,
    w: NodeId,
    b: NodeId,
) -> Result<NodeId, NumericsError> {
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

/// Scaled dot-product attention over one head.
///
/// `mask[j] = true` hides position `j` as a key: it receives no attention
/// weight and contributes nothing to the output. Errors if every position
/// is masked.
pub fn attention(
    g: &mut Graph,
    q: NodeId,
    k: NodeId,
    v: NodeId,
    mask: Option<&[bool]>,
) -> Result<NodeId, NumericsError> {
    let d_h = g.value(q).cols();
    let scores = g.matmul_nt(q, k)?;
    let scaled = g.scale(scores, 1.0 / (d_h as f64).sqrt());
    let probs = g.softmax_rows(scaled, mask)?;
    g.matmul(probs, v)
}

/// As [`attention`], but also returns the attention probability node so
/// callers can inspect row sums.
pub fn attention_with_probs(
    g: &mut Graph,
    q: NodeId,
    k: NodeId,
    v: NodeId,
    mask: Option<&[bool]>,
) -> Result<(NodeId, NodeId), NumericsError> {
    let d_h = g.value(q).cols();
    let scores = g.matmul_nt(q, k)?;
    let scaled = g.scale(scores, 1.0 / (d_h as f64).sqrt());
    let probs = g.softmax_rows(scaled, mask)?;
    let out = g.matmul(probs, v)?;
    Ok((out, probs))
}
