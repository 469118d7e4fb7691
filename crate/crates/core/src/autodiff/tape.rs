//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation evaluates eagerly, appends a node holding its output and
//! enough context for its backward rule, and returns a [`Var`] handle.
//! [`Tape::backward`] replays the nodes in reverse recording order.

use crate::error::{Error, Result};

use super::{Scalar, Tensor};

/// Probabilities are clamped here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    ConcatCols(Var, Var),
    MeanRowGroups(Var, usize),
    RepeatRows(Var, usize),
    Reshape(Var),
    GatherRows(Var, Vec<usize>),
    SliceCols(Var, usize),
    SoftmaxRows(Var),
    Nll(Var, Vec<usize>),
    BceLogits(Var, Vec<T>),
    SumAll(Var),
    MeanAll(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    op: Op<T>,
}

/// Records operations for one forward/backward pass. Create a fresh tape (or
/// call [`Tape::clear`]) per training step.
#[derive(Debug)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Treats a rank-1 tensor as a single row.
fn as_matrix<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        [c] => Ok((1, *c)),
        [r, c] => Ok((*r, *c)),
        other => Err(Error::shape(op, other, &[0, 0])),
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.grads.clear();
    }

    fn push(&mut self, value: Tensor<T>, requires_grad: bool, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A constant input; no gradient is tracked for it.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, false, Op::Leaf)
    }

    /// A differentiable input; its gradient is available after `backward`.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, true, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (r, k) = ta.dims2("matmul")?;
        let (k2, c) = tb.dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let mut out = vec![T::zero(); r * c];
        T::gemm(r, k, c, ta.data(), false, tb.data(), false, &mut out, false);
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(vec![r, c], out)?, rg, Op::MatMul(a, b)))
    }

    fn zip_same(&mut self, a: Var, b: Var, op_name: &'static str, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(op_name, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, rg, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "hadamard", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a length-`c` bias to every row of an `r×c` matrix. The only
    /// broadcasting the tape supports.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let (r, c) = as_matrix(tx, "add_row")?;
        let (br, bc) = as_matrix(tb, "add_row")?;
        if br != 1 || bc != c {
            return Err(Error::shape("add_row", tx.shape(), tb.shape()));
        }
        let mut data = tx.data().to_vec();
        for i in 0..r {
            for (d, &b) in data[i * c..(i + 1) * c].iter_mut().zip(tb.data()) {
                *d = *d + b;
            }
        }
        let out = Tensor::new(tx.shape().to_vec(), data)?;
        let rg = self.needs(&[x, bias]);
        Ok(self.push(out, rg, Op::AddRow(x, bias)))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let out = self.value(x).map(|v| v * factor);
        let rg = self.needs(&[x]);
        self.push(out, rg, Op::Scale(x, factor))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.tanh());
        let rg = self.needs(&[x]);
        self.push(out, rg, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        let rg = self.needs(&[x]);
        self.push(out, rg, Op::Sigmoid(x))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (r, c1) = ta.dims2("concat_cols")?;
        let (r2, c2) = tb.dims2("concat_cols")?;
        if r != r2 {
            return Err(Error::shape("concat_cols", ta.shape(), tb.shape()));
        }
        let mut data = Vec::with_capacity(r * (c1 + c2));
        for i in 0..r {
            data.extend_from_slice(ta.row(i));
            data.extend_from_slice(tb.row(i));
        }
        let out = Tensor::new(vec![r, c1 + c2], data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, rg, Op::ConcatCols(a, b)))
    }

    /// Averages consecutive groups of `group` rows: `(B·group)×d → B×d`.
    pub fn mean_row_groups(&mut self, x: Var, group: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, d) = tx.dims2("mean_row_groups")?;
        if group == 0 || r == 0 {
            return Err(Error::EmptyInput("mean over zero rows".into()));
        }
        if r % group != 0 {
            return Err(Error::shape("mean_row_groups", tx.shape(), &[group, d]));
        }
        let b = r / group;
        let inv = T::one() / T::from_f64(group as f64);
        let mut data = vec![T::zero(); b * d];
        for i in 0..r {
            let out = &mut data[(i / group) * d..(i / group + 1) * d];
            for (o, &v) in out.iter_mut().zip(tx.row(i)) {
                *o = *o + v;
            }
        }
        data.iter_mut().for_each(|v| *v = *v * inv);
        let out = Tensor::new(vec![b, d], data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, rg, Op::MeanRowGroups(x, group)))
    }

    /// Column-wise mean of an `r×d` matrix, returned as a length-`d` vector.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (r, d) = self.value(x).dims2("mean_rows")?;
        let m = self.mean_row_groups(x, r)?;
        self.reshape(m, vec![d])
    }

    /// Repeats each row `times` times consecutively: `r×c → (r·times)×c`.
    pub fn repeat_rows(&mut self, x: Var, times: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = as_matrix(tx, "repeat_rows")?;
        let mut data = Vec::with_capacity(r * c * times);
        for i in 0..r {
            for _ in 0..times {
                data.extend_from_slice(&tx.data()[i * c..(i + 1) * c]);
            }
        }
        let out = Tensor::new(vec![r * times, c], data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, rg, Op::RepeatRows(x, times)))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, rg, Op::Reshape(x)))
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = tx.dims2("gather_rows")?;
        let mut data = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            if i >= r {
                return Err(Error::Index(format!("row {i} of {r}")));
            }
            data.extend_from_slice(tx.row(i));
        }
        let out = Tensor::new(vec![rows.len(), c], data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, rg, Op::GatherRows(x, rows.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = tx.dims2("slice_cols")?;
        if start + width > c {
            return Err(Error::shape("slice_cols", tx.shape(), &[r, start + width]));
        }
        let mut data = Vec::with_capacity(r * width);
        for i in 0..r {
            data.extend_from_slice(&tx.row(i)[start..start + width]);
        }
        let out = Tensor::new(vec![r, width], data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, rg, Op::SliceCols(x, start)))
    }

    /// Max-subtracted softmax over each row.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = as_matrix(tx, "softmax_rows")?;
        let mut data = tx.data().to_vec();
        for i in 0..r {
            softmax_in_place(&mut data[i * c..(i + 1) * c]);
        }
        let out = Tensor::new(tx.shape().to_vec(), data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, rg, Op::SoftmaxRows(x)))
    }

    /// Mean negative log-probability of the target class of each row.
    pub fn nll_loss(&mut self, probs: Var, targets: &[usize]) -> Result<Var> {
        let tp = self.value(probs);
        let (r, c) = as_matrix(tp, "nll_loss")?;
        if targets.len() != r {
            return Err(Error::shape("nll_loss", tp.shape(), &[targets.len()]));
        }
        let floor = T::from_f64(PROB_FLOOR);
        let mut total = T::zero();
        for (i, &t) in targets.iter().enumerate() {
            if t >= c {
                return Err(Error::Index(format!("target class {t} with {c} classes")));
            }
            total = total - tp.data()[i * c + t].max(floor).ln();
        }
        let loss = total / T::from_f64(r as f64);
        let rg = self.needs(&[probs]);
        Ok(self.push(Tensor::scalar(loss), rg, Op::Nll(probs, targets.to_vec())))
    }

    /// Mean over all entries of the numerically stable binary cross-entropy
    /// between `logits` and 0/1 `targets` of the same shape.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Tensor<T>) -> Result<Var> {
        let tz = self.value(logits);
        if tz.shape() != targets.shape() {
            return Err(Error::shape("bce_with_logits", tz.shape(), targets.shape()));
        }
        if tz.is_empty() {
            return Err(Error::EmptyInput("bce over zero labels".into()));
        }
        let total: T = tz
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&z, &y)| z.max(T::zero()) - z * y + (T::one() + (-z.abs()).exp()).ln())
            .sum();
        let loss = total / T::from_f64(tz.len() as f64);
        let rg = self.needs(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            rg,
            Op::BceLogits(logits, targets.data().to_vec()),
        ))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s: T = self.value(x).data().iter().copied().sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), rg, Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s: T = t.data().iter().copied().sum::<T>() / T::from_f64(t.len() as f64);
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), rg, Op::MeanAll(x))
    }

    /// Back-propagates from a single-element `loss`. Gradients of earlier
    /// `backward` calls are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", self.value(loss).shape(), &[1]));
        }
        self.grads = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.backprop_node(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn backprop_node(&mut self, i: usize, g: &[T]) {
        let Tape { nodes, grads } = self;
        let nodes: &[Node<T>] = nodes;
        let val = |v: &Var| &nodes[v.0].value;
        let rg = |v: &Var| nodes[v.0].requires_grad;
        let mut acc = |v: &Var, f: &mut dyn FnMut(&mut [T])| {
            if !nodes[v.0].requires_grad {
                return;
            }
            let buf = grads[v.0].get_or_insert_with(|| vec![T::zero(); nodes[v.0].value.len()]);
            f(buf);
        };
        let y = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (r, k) = val(a).dims2("matmul").unwrap();
                let c = val(b).dims2("matmul").unwrap().1;
                if rg(a) {
                    let bv = val(b).data();
                    acc(a, &mut |ga| T::gemm(r, c, k, g, false, bv, true, ga, true));
                }
                if rg(b) {
                    let av = val(a).data();
                    acc(b, &mut |gb| T::gemm(k, r, c, av, true, g, false, gb, true));
                }
            }
            Op::Add(a, b) => {
                acc(a, &mut |ga| add_into(ga, g));
                acc(b, &mut |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                acc(a, &mut |ga| add_into(ga, g));
                acc(b, &mut |gb| gb.iter_mut().zip(g).for_each(|(x, &y)| *x = *x - y));
            }
            Op::AddRow(x, bias) => {
                acc(x, &mut |gx| add_into(gx, g));
                acc(bias, &mut |gb| {
                    let c = gb.len();
                    for row in g.chunks(c) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(a).data(), val(b).data());
                acc(a, &mut |ga| {
                    for ((x, &gi), &bi) in ga.iter_mut().zip(g).zip(bv) {
                        *x = *x + gi * bi;
                    }
                });
                acc(b, &mut |gb| {
                    for ((x, &gi), &ai) in gb.iter_mut().zip(g).zip(av) {
                        *x = *x + gi * ai;
                    }
                });
            }
            Op::Scale(x, factor) => {
                let factor = *factor;
                acc(x, &mut |gx| gx.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b * factor));
            }
            Op::Tanh(x) => acc(x, &mut |gx| {
                for ((a, &gi), &yi) in gx.iter_mut().zip(g).zip(y.data()) {
                    *a = *a + gi * (T::one() - yi * yi);
                }
            }),
            Op::Sigmoid(x) => acc(x, &mut |gx| {
                for ((a, &gi), &yi) in gx.iter_mut().zip(g).zip(y.data()) {
                    *a = *a + gi * yi * (T::one() - yi);
                }
            }),
            Op::ConcatCols(a, b) => {
                let c1 = val(a).dims2("concat_cols").unwrap().1;
                let c2 = val(b).dims2("concat_cols").unwrap().1;
                acc(a, &mut |ga| {
                    for (dst, src) in ga.chunks_mut(c1).zip(g.chunks(c1 + c2)) {
                        add_into(dst, &src[..c1]);
                    }
                });
                acc(b, &mut |gb| {
                    for (dst, src) in gb.chunks_mut(c2).zip(g.chunks(c1 + c2)) {
                        add_into(dst, &src[c1..]);
                    }
                });
            }
            Op::MeanRowGroups(x, group) => {
                let group = *group;
                let d = val(x).dims2("mean_row_groups").unwrap().1;
                let inv = T::one() / T::from_f64(group as f64);
                acc(x, &mut |gx| {
                    for (row, dst) in gx.chunks_mut(d).enumerate() {
                        let src = &g[(row / group) * d..(row / group + 1) * d];
                        for (a, &b) in dst.iter_mut().zip(src) {
                            *a = *a + b * inv;
                        }
                    }
                });
            }
            Op::RepeatRows(x, times) => {
                let times = *times;
                let c = as_matrix(val(x), "repeat_rows").unwrap().1;
                acc(x, &mut |gx| {
                    for (row, src) in g.chunks(c).enumerate() {
                        let i = row / times;
                        add_into(&mut gx[i * c..(i + 1) * c], src);
                    }
                });
            }
            Op::Reshape(x) => acc(x, &mut |gx| add_into(gx, g)),
            Op::GatherRows(x, rows) => {
                let c = val(x).dims2("gather_rows").unwrap().1;
                acc(x, &mut |gx| {
                    for (t, &i) in rows.iter().enumerate() {
                        add_into(&mut gx[i * c..(i + 1) * c], &g[t * c..(t + 1) * c]);
                    }
                });
            }
            Op::SliceCols(x, start) => {
                let start = *start;
                let width = y.dims2("slice_cols").unwrap().1;
                let c = val(x).dims2("slice_cols").unwrap().1;
                acc(x, &mut |gx| {
                    for (dst, src) in gx.chunks_mut(c).zip(g.chunks(width)) {
                        add_into(&mut dst[start..start + width], src);
                    }
                });
            }
            Op::SoftmaxRows(x) => {
                let c = as_matrix(y, "softmax_rows").unwrap().1;
                acc(x, &mut |gx| {
                    for ((dst, yr), gr) in gx.chunks_mut(c).zip(y.data().chunks(c)).zip(g.chunks(c)) {
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for ((d, &yi), &gi) in dst.iter_mut().zip(yr).zip(gr) {
                            *d = *d + yi * (gi - dot);
                        }
                    }
                });
            }
            Op::Nll(p, targets) => {
                let g0 = g[0];
                let floor = T::from_f64(PROB_FLOOR);
                let r = T::from_f64(targets.len() as f64);
                let pv = val(p);
                let c = as_matrix(pv, "nll_loss").unwrap().1;
                acc(p, &mut |gp| {
                    for (i, &t) in targets.iter().enumerate() {
                        let pi = pv.data()[i * c + t];
                        if pi >= floor {
                            gp[i * c + t] = gp[i * c + t] - g0 / (r * pi);
                        }
                    }
                });
            }
            Op::BceLogits(z, targets) => {
                let g0 = g[0];
                let zv = val(z);
                let n = T::from_f64(zv.len() as f64);
                acc(z, &mut |gz| {
                    for ((d, &zi), &yi) in gz.iter_mut().zip(zv.data()).zip(targets) {
                        *d = *d + g0 * (sigmoid(zi) - yi) / n;
                    }
                });
            }
            Op::SumAll(x) => {
                let g0 = g[0];
                acc(x, &mut |gx| gx.iter_mut().for_each(|a| *a = *a + g0));
            }
            Op::MeanAll(x) => {
                let share = g[0] / T::from_f64(val(x).len() as f64);
                acc(x, &mut |gx| gx.iter_mut().for_each(|a| *a = *a + share));
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(a, &b)| *a = *a + b);
}

/// Max-subtracted softmax of one row, in place.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    row.iter_mut().for_each(|v| *v = *v / sum);
}

pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    sigmoid(x)
}
