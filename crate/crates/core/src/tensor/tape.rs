//! Reverse-mode gradient tape over dense matrices.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Nodes are
//! appended in evaluation order, so walking the node list backwards is a
//! valid reverse topological order. Parameters live outside the tape in a
//! [`ParamSet`]; `Tape::param` snapshots a parameter into the tape and
//! `Tape::backward_into` writes the accumulated gradients back.

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;

use crate::error::{HerbError, Result};
use crate::rng::HerbRng;
use crate::tensor::matrix::{axpy, Matrix};

/// A matrix that may carry a gradient.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub value: Matrix,
    pub requires_grad: bool,
    pub grad: Option<Matrix>,
}

impl Tensor {
    pub fn new(value: Matrix, requires_grad: bool) -> Self {
        Tensor {
            value,
            requires_grad,
            grad: None,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    tensors: Vec<Tensor>,
    names: Vec<String>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.tensors.push(Tensor::new(value, true));
        self.names.push(name.into());
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.tensors
            .iter()
            .zip(&self.names)
            .enumerate()
            .map(|(i, (t, n))| (ParamId(i), n.as_str(), t))
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.all_finite())
    }
}

#[derive(Debug)]
enum Op {
    Leaf { param: Option<ParamId> },
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    ScaleRows(usize, Rc<Vec<f64>>),
    Scale(usize, f64),
    Relu(usize),
    Tanh(usize),
    Exp(usize),
    Log(usize),
    Sum(usize),
    SumSquares(usize),
    Mask(usize, Matrix),
    GatherRows(usize, Rc<Vec<usize>>),
    RowSum(usize),
    SoftmaxXent {
        logits: usize,
        labels: Rc<Vec<usize>>,
        rows: Rc<Vec<usize>>,
        probs: Matrix,
    },
    BceLogits {
        logits: usize,
        targets: Rc<Vec<f64>>,
    },
}

struct Node {
    value: Rc<Matrix>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.shape())
    }
}

/// A [`ParamSet`] recorded on a tape, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct BoundParams<'t> {
    vars: Vec<Var<'t>>,
}

impl<'t> BoundParams<'t> {
    pub fn get(&self, id: ParamId) -> Var<'t> {
        self.vars[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = Var<'t>> + '_ {
        self.vars.iter().copied()
    }
}

/// Gradients of one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> Option<&Matrix> {
        self.grads.get(v.id).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Matrix, op: Op, requires_grad: bool) -> Var<'_> {
        self.push_rc(Rc::new(value), op, requires_grad)
    }

    fn push_rc(&self, value: Rc<Matrix>, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn constant(&self, value: Matrix) -> Var<'_> {
        self.push(value, Op::Leaf { param: None }, false)
    }

    /// Shares an existing matrix (e.g. an adjacency reused every epoch) without copying.
    pub fn constant_rc(&self, value: Rc<Matrix>) -> Var<'_> {
        self.push_rc(value, Op::Leaf { param: None }, false)
    }

    /// A free differentiable input that is not backed by a [`ParamSet`].
    pub fn leaf(&self, value: Matrix) -> Var<'_> {
        self.push(value, Op::Leaf { param: None }, true)
    }

    pub fn param(&self, params: &ParamSet, id: ParamId) -> Var<'_> {
        let t = params.get(id);
        self.push(t.value.clone(), Op::Leaf { param: Some(id) }, t.requires_grad)
    }

    /// Records every tensor of `params` once.
    pub fn bind(&self, params: &ParamSet) -> BoundParams<'_> {
        BoundParams {
            vars: params.ids().map(|id| self.param(params, id)).collect(),
        }
    }

    fn value_of(&self, id: usize) -> Rc<Matrix> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn needs_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Runs the reverse sweep from a 1×1 loss.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.shape() != (1, 1) {
            return Err(HerbError::precondition(format!(
                "backward needs a 1x1 loss, got {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Matrix::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let wants = |p: usize| nodes[p].requires_grad;
            let emit = |p: usize, d: Matrix, grads: &mut Vec<Option<Matrix>>| {
                match &mut grads[p] {
                    Some(acc) => axpy(acc.data_mut(), 1.0, d.data()),
                    slot => *slot = Some(d),
                }
            };
            let val = |p: usize| &*nodes[p].value;
            match &node.op {
                Op::Leaf { .. } => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if wants(*a) {
                        emit(*a, g.matmul_t(val(*b))?, &mut grads);
                    }
                    if wants(*b) {
                        emit(*b, val(*a).t_matmul(&g)?, &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    if wants(*a) {
                        emit(*a, g.clone(), &mut grads);
                    }
                    if wants(*b) {
                        emit(*b, g, &mut grads);
                    }
                }
                Op::Sub(a, b) => {
                    if wants(*a) {
                        emit(*a, g.clone(), &mut grads);
                    }
                    if wants(*b) {
                        emit(*b, g.scale(-1.0), &mut grads);
                    }
                }
                Op::Mul(a, b) => {
                    if wants(*a) {
                        emit(*a, g.hadamard(val(*b))?, &mut grads);
                    }
                    if wants(*b) {
                        emit(*b, g.hadamard(val(*a))?, &mut grads);
                    }
                }
                Op::AddRow(a, r) => {
                    if wants(*r) {
                        emit(*r, column_sums(&g), &mut grads);
                    }
                    if wants(*a) {
                        emit(*a, g, &mut grads);
                    }
                }
                Op::MulRow(a, r) => {
                    let rv = val(*r);
                    if wants(*r) {
                        let prod = g.hadamard(val(*a))?;
                        emit(*r, column_sums(&prod), &mut grads);
                    }
                    if wants(*a) {
                        let mut d = g;
                        let c = d.cols();
                        for (k, x) in d.data_mut().iter_mut().enumerate() {
                            *x *= rv.data()[k % c];
                        }
                        emit(*a, d, &mut grads);
                    }
                }
                Op::ScaleRows(a, s) => {
                    if wants(*a) {
                        let mut d = g;
                        for (i, si) in s.iter().enumerate() {
                            d.row_mut(i).iter_mut().for_each(|x| *x *= si);
                        }
                        emit(*a, d, &mut grads);
                    }
                }
                Op::Scale(a, s) => {
                    if wants(*a) {
                        emit(*a, g.scale(*s), &mut grads);
                    }
                }
                Op::Relu(a) => {
                    if wants(*a) {
                        emit(*a, g.zip_map(val(*a), |gi, x| if x > 0.0 { gi } else { 0.0 })?, &mut grads);
                    }
                }
                Op::Tanh(a) => {
                    if wants(*a) {
                        emit(*a, g.zip_map(&node.value, |gi, y| gi * (1.0 - y * y))?, &mut grads);
                    }
                }
                Op::Exp(a) => {
                    if wants(*a) {
                        emit(*a, g.hadamard(&node.value)?, &mut grads);
                    }
                }
                Op::Log(a) => {
                    if wants(*a) {
                        emit(*a, g.zip_map(val(*a), |gi, x| gi / x)?, &mut grads);
                    }
                }
                Op::Sum(a) => {
                    if wants(*a) {
                        let (r, c) = val(*a).shape();
                        emit(*a, Matrix::filled(r, c, g.get(0, 0)), &mut grads);
                    }
                }
                Op::SumSquares(a) => {
                    if wants(*a) {
                        emit(*a, val(*a).scale(2.0 * g.get(0, 0)), &mut grads);
                    }
                }
                Op::Mask(a, m) => {
                    if wants(*a) {
                        emit(*a, g.hadamard(m)?, &mut grads);
                    }
                }
                Op::GatherRows(a, idx) => {
                    if wants(*a) {
                        let (r, c) = val(*a).shape();
                        let mut d = Matrix::zeros(r, c);
                        {
                            let buf = d.data_mut();
                            for (k, &i) in idx.iter().enumerate() {
                                axpy(&mut buf[i * c..(i + 1) * c], 1.0, g.row(k));
                            }
                        }
                        emit(*a, d, &mut grads);
                    }
                }
                Op::RowSum(a) => {
                    if wants(*a) {
                        let (r, c) = val(*a).shape();
                        emit(*a, Matrix::from_fn(r, c, |i, _| g.get(i, 0)), &mut grads);
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    labels,
                    rows,
                    probs,
                } => {
                    if wants(*logits) {
                        let (r, c) = val(*logits).shape();
                        let mut d = Matrix::zeros(r, c);
                        let scale = g.get(0, 0) / rows.len() as f64;
                        {
                            let buf = d.data_mut();
                            for (k, &i) in rows.iter().enumerate() {
                                let dst = &mut buf[i * c..(i + 1) * c];
                                axpy(dst, scale, probs.row(k));
                                dst[labels[i]] -= scale;
                            }
                        }
                        emit(*logits, d, &mut grads);
                    }
                }
                Op::BceLogits { logits, targets } => {
                    if wants(*logits) {
                        let s = val(*logits);
                        let m = targets.len() as f64;
                        let scale = g.get(0, 0) / m;
                        let d = Matrix::from_fn(s.rows(), 1, |i, _| {
                            (sigmoid(s.get(i, 0)) - targets[i]) * scale
                        });
                        emit(*logits, d, &mut grads);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Backward pass that accumulates gradients into the parameters that were
    /// snapshotted with [`Tape::param`].
    pub fn backward_into(&self, loss: Var<'_>, params: &mut ParamSet) -> Result<()> {
        let grads = self.backward(loss)?;
        let nodes = self.nodes.borrow();
        for (id, node) in nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(pid) } = node.op {
                if let Some(g) = &grads.grads[id] {
                    let t = &mut params.tensors_mut()[pid.0];
                    if !t.requires_grad {
                        continue;
                    }
                    match &mut t.grad {
                        Some(acc) => acc.add_scaled_in_place(g, 1.0)?,
                        slot => *slot = Some(g.clone()),
                    }
                }
            }
        }
        Ok(())
    }
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut out = vec![0.0; g.cols()];
    for i in 0..g.rows() {
        axpy(&mut out, 1.0, g.row(i));
    }
    Matrix::row_vector(out)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Matrix> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    /// Value of a 1×1 variable.
    pub fn item(&self) -> f64 {
        self.value().get(0, 0)
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.needs_grad(self.id)
    }

    fn same_tape(&self, other: &Var<'t>) {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
    }

    fn unary(&self, value: Matrix, op: Op) -> Var<'t> {
        self.tape.push(value, op, self.requires_grad())
    }

    fn binary(&self, other: &Var<'t>, value: Matrix, op: Op) -> Var<'t> {
        self.same_tape(other);
        let rg = self.requires_grad() || other.requires_grad();
        self.tape.push(value, op, rg)
    }

    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self.value().matmul(&other.value())?;
        Ok(self.binary(other, v, Op::MatMul(self.id, other.id)))
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self.value().add(&other.value())?;
        Ok(self.binary(other, v, Op::Add(self.id, other.id)))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self.value().sub(&other.value())?;
        Ok(self.binary(other, v, Op::Sub(self.id, other.id)))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self.value().hadamard(&other.value())?;
        Ok(self.binary(other, v, Op::Mul(self.id, other.id)))
    }

    fn check_row(&self, row: &Var<'t>, op: &'static str) -> Result<()> {
        let (_, c) = self.shape();
        if row.shape() != (1, c) {
            return Err(HerbError::Shape {
                op,
                left: self.shape(),
                right: row.shape(),
            });
        }
        Ok(())
    }

    /// Adds a 1×c row to every row (bias broadcast).
    pub fn add_row(&self, row: &Var<'t>) -> Result<Var<'t>> {
        self.check_row(row, "add_row")?;
        let mut v = (*self.value()).clone();
        let rv = row.value();
        let c = v.cols();
        for (k, x) in v.data_mut().iter_mut().enumerate() {
            *x += rv.data()[k % c];
        }
        Ok(self.binary(row, v, Op::AddRow(self.id, row.id)))
    }

    /// Multiplies every row elementwise by a 1×c row.
    pub fn mul_row(&self, row: &Var<'t>) -> Result<Var<'t>> {
        self.check_row(row, "mul_row")?;
        let mut v = (*self.value()).clone();
        let rv = row.value();
        let c = v.cols();
        for (k, x) in v.data_mut().iter_mut().enumerate() {
            *x *= rv.data()[k % c];
        }
        Ok(self.binary(row, v, Op::MulRow(self.id, row.id)))
    }

    /// Scales row i by the constant `factors[i]`.
    pub fn scale_rows(&self, factors: Rc<Vec<f64>>) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if factors.len() != r {
            return Err(HerbError::Shape {
                op: "scale_rows",
                left: (r, c),
                right: (factors.len(), 1),
            });
        }
        let mut v = (*self.value()).clone();
        for (i, s) in factors.iter().enumerate() {
            v.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        Ok(self.unary(v, Op::ScaleRows(self.id, factors)))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        let v = self.value().scale(s);
        self.unary(v, Op::Scale(self.id, s))
    }

    pub fn neg(&self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn relu(&self) -> Var<'t> {
        let v = self.value().map(|x| if x > 0.0 { x } else { 0.0 });
        self.unary(v, Op::Relu(self.id))
    }

    pub fn tanh(&self) -> Var<'t> {
        let v = self.value().map(f64::tanh);
        self.unary(v, Op::Tanh(self.id))
    }

    pub fn exp(&self) -> Var<'t> {
        let v = self.value().map(f64::exp);
        self.unary(v, Op::Exp(self.id))
    }

    pub fn log(&self) -> Result<Var<'t>> {
        let x = self.value();
        if let Some(bad) = x.data().iter().find(|v| **v <= 0.0 || v.is_nan()) {
            return Err(HerbError::Domain {
                op: "log",
                detail: format!("non-positive input {bad}"),
            });
        }
        let v = x.map(f64::ln);
        Ok(self.unary(v, Op::Log(self.id)))
    }

    pub fn sum(&self) -> Var<'t> {
        let v = Matrix::scalar(self.value().sum());
        self.unary(v, Op::Sum(self.id))
    }

    /// Squared Frobenius norm.
    pub fn sum_squares(&self) -> Var<'t> {
        let v = Matrix::scalar(self.value().sum_squares());
        self.unary(v, Op::SumSquares(self.id))
    }

    /// n×c → n×1 row sums.
    pub fn row_sum(&self) -> Var<'t> {
        let x = self.value();
        let v = Matrix::from_fn(x.rows(), 1, |i, _| x.row(i).iter().sum());
        self.unary(v, Op::RowSum(self.id))
    }

    pub fn gather_rows(&self, idx: Rc<Vec<usize>>) -> Result<Var<'t>> {
        let v = self.value().gather_rows(&idx)?;
        Ok(self.unary(v, Op::GatherRows(self.id, idx)))
    }

    /// Elementwise product with a constant mask.
    pub fn mask(&self, mask: Matrix) -> Result<Var<'t>> {
        let v = self.value().hadamard(&mask)?;
        Ok(self.unary(v, Op::Mask(self.id, mask)))
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
    /// Identity in evaluation mode or at rate 0. Only nonzero entries
    /// consume random draws.
    pub fn dropout(&self, rate: f64, training: bool, rng: &mut HerbRng) -> Result<Var<'t>> {
        if !(0.0..1.0).contains(&rate) {
            return Err(HerbError::precondition(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(*self);
        }
        let x = self.value();
        let keep = 1.0 / (1.0 - rate);
        // zeros stay zero whatever the mask says, so only nonzeros draw
        let mask = x.map_with(|v| if v == 0.0 || rng.gen::<f64>() >= rate { keep } else { 0.0 });
        self.mask(mask)
    }

    /// Mean over `rows` of `-log softmax(logits[row])[labels[row]]`.
    pub fn softmax_cross_entropy(&self, labels: Rc<Vec<usize>>, rows: Rc<Vec<usize>>) -> Result<Var<'t>> {
        if rows.is_empty() {
            return Err(HerbError::precondition("cross-entropy over an empty mask"));
        }
        let x = self.value();
        let (n, c) = x.shape();
        let mut probs = Vec::with_capacity(rows.len() * c);
        let mut total = 0.0;
        for &i in rows.iter() {
            if i >= n || i >= labels.len() {
                return Err(HerbError::precondition(format!("masked row {i} outside logits ({n} rows)")));
            }
            let y = labels[i];
            if y >= c {
                return Err(HerbError::precondition(format!("label {y} outside {c} classes")));
            }
            let row = x.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let lse = m + z.ln();
            total += lse - row[y];
            probs.extend(row.iter().map(|v| (v - lse).exp()));
        }
        let probs = Matrix::new(rows.len(), c, probs)?;
        let v = Matrix::scalar(total / rows.len() as f64);
        Ok(self.unary(
            v,
            Op::SoftmaxXent {
                logits: self.id,
                labels,
                rows,
                probs,
            },
        ))
    }

    /// Mean binary cross-entropy of an m×1 logit column against 0/1 targets.
    pub fn bce_with_logits(&self, targets: Rc<Vec<f64>>) -> Result<Var<'t>> {
        let s = self.value();
        if s.cols() != 1 || s.rows() != targets.len() || targets.is_empty() {
            return Err(HerbError::Shape {
                op: "bce_with_logits",
                left: s.shape(),
                right: (targets.len(), 1),
            });
        }
        let total: f64 = (0..s.rows())
            .map(|i| {
                let x = s.get(i, 0);
                x.max(0.0) - x * targets[i] + (-x.abs()).exp().ln_1p()
            })
            .sum();
        let v = Matrix::scalar(total / targets.len() as f64);
        Ok(self.unary(
            v,
            Op::BceLogits {
                logits: self.id,
                targets,
            },
        ))
    }

    /// Row-wise inner products `<self[i], other[i]>` as an n×1 column.
    pub fn row_dot(&self, other: &Var<'t>) -> Result<Var<'t>> {
        Ok(self.mul(other)?.row_sum())
    }
}

/// Numerically stable row-wise softmax of a plain matrix.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        row.iter_mut().for_each(|v| *v = (*v - m).exp() / z);
    }
    out
}

/// Index of the largest entry in each row (first wins on ties).
pub fn argmax_rows(x: &Matrix) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform, Stream};

    #[test]
    fn sum_gradient_is_ones() {
        let tape = Tape::new();
        let w = tape.leaf(Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap());
        let g = tape.backward(w.sum()).unwrap();
        assert_eq!(g.get(w).unwrap(), &Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn squared_norm_gradient_is_twice_w() {
        let tape = Tape::new();
        let m = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let w = tape.leaf(m.clone());
        let g = tape.backward(w.sum_squares()).unwrap();
        assert_eq!(g.get(w).unwrap(), &m.scale(2.0));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let tape = Tape::new();
        let w = tape.leaf(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(w), Err(HerbError::Precondition(_))));
    }

    #[test]
    fn relu_values_and_gradient_at_zero() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::from_rows(&[vec![-1.0, 2.0, 0.0]]).unwrap());
        let y = x.relu();
        assert_eq!(y.value().data(), &[0.0, 2.0, 0.0]);
        let g = tape.backward(y.sum()).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn add_zeros_is_identity() {
        let tape = Tape::new();
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let a = tape.constant(m.clone());
        let z = tape.constant(Matrix::zeros(2, 2));
        assert_eq!(&*a.add(&z).unwrap().value(), &m);
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = seeded(2, Stream::Custom(9));
        let m = uniform(3, 3, 0.1, 5.0, &mut rng);
        let tape = Tape::new();
        let x = tape.constant(m.clone());
        let back = x.exp().log().unwrap();
        assert!(back.value().max_abs_diff(&m).unwrap() < 1e-12);
    }

    #[test]
    fn log_of_non_positive_is_domain_error() {
        let tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap());
        assert!(matches!(x.log(), Err(HerbError::Domain { .. })));
    }

    #[test]
    fn elementwise_shape_mismatch() {
        let tape = Tape::new();
        let a = tape.constant(Matrix::zeros(2, 2));
        let b = tape.constant(Matrix::zeros(2, 3));
        assert!(matches!(a.add(&b), Err(HerbError::Shape { .. })));
        assert!(matches!(a.mul(&b), Err(HerbError::Shape { .. })));
    }

    #[test]
    fn uniform_logits_give_ln_c() {
        for c in [2usize, 3, 7, 10] {
            let tape = Tape::new();
            let x = tape.constant(Matrix::filled(4, c, 0.37));
            let labels = Rc::new(vec![0, 1 % c, 0, c - 1]);
            let loss = x.softmax_cross_entropy(labels, Rc::new(vec![0, 1, 2, 3])).unwrap();
            assert!((loss.item() - (c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_limits() {
        let big = |mag: f64, label: usize| {
            let tape = Tape::new();
            let x = tape.constant(Matrix::from_rows(&[vec![mag, 0.0]]).unwrap());
            x.softmax_cross_entropy(Rc::new(vec![label]), Rc::new(vec![0]))
                .unwrap()
                .item()
        };
        assert!(big(50.0, 0) < 1e-20);
        assert!(big(50.0, 1) > 49.0);
        assert!(big(500.0, 1) > big(50.0, 1));
    }

    #[test]
    fn cross_entropy_matches_scalar_oracle() {
        let logits: [[f64; 2]; 3] = [[0.3, -1.2], [2.0, 0.5], [-0.7, -0.1]];
        let labels = [1usize, 0, 0];
        let mut expected = 0.0;
        for (row, &y) in logits.iter().zip(&labels) {
            let e0 = row[0].exp();
            let e1 = row[1].exp();
            let p = if y == 0 { e0 / (e0 + e1) } else { e1 / (e0 + e1) };
            expected += -p.ln();
        }
        expected /= 3.0;
        let tape = Tape::new();
        let m = Matrix::from_rows(&logits.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        let loss = tape
            .constant(m)
            .softmax_cross_entropy(Rc::new(labels.to_vec()), Rc::new(vec![0, 1, 2]))
            .unwrap();
        assert!((loss.item() - expected).abs() < 1e-10);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let tape = Tape::new();
        let x = tape.constant(Matrix::zeros(2, 2));
        assert!(x.softmax_cross_entropy(Rc::new(vec![0, 0]), Rc::new(vec![])).is_err());
    }

    #[test]
    fn dropout_modes() {
        let mut rng = seeded(1, Stream::Dropout);
        let tape = Tape::new();
        let x = tape.constant(Matrix::filled(3, 3, 1.0));
        assert_eq!(&*x.dropout(0.0, true, &mut rng).unwrap().value(), &*x.value());
        assert_eq!(&*x.dropout(0.9, false, &mut rng).unwrap().value(), &*x.value());
        assert!(x.dropout(1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let mut rng = seeded(123, Stream::Dropout);
        let tape = Tape::new();
        let x = tape.constant(Matrix::filled(1000, 100, 1.0));
        let y = x.dropout(0.7, true, &mut rng).unwrap().value();
        let n = y.len() as f64;
        let mean = y.sum() / n;
        let zeros = y.data().iter().filter(|v| **v == 0.0).count() as f64 / n;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!((zeros - 0.7).abs() < 0.02 * 0.7, "zero fraction {zeros}");
    }

    #[test]
    fn param_gradients_land_in_param_set() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let tape = Tape::new();
        let v = tape.param(&ps, w);
        let loss = v.sum_squares();
        tape.backward_into(loss, &mut ps).unwrap();
        assert_eq!(ps.get(w).grad.as_ref().unwrap().data(), &[2.0, 4.0]);
    }
}
