//! Tape of tensor operations with reverse-mode gradients.
//!
//! Nodes are appended in evaluation order, so a reverse sweep over the
//! tape visits every node after all of its consumers.

use std::sync::Arc;

use rand::Rng;

use super::tensor::{gemm, log_sum_exp, Operand, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Gather(Var, Vec<usize>),
    MulConst(Var, Tensor),
    AddConstRow(Var),
    SelectRows(Var, Var, Vec<bool>),
    BlockExpand(Var, Vec<usize>),
    Softmax(Var),
    /// Stores the row softmax for the backward pass.
    CrossEntropySum(Var, Vec<Option<usize>>, Tensor),
    Sum(Vec<Var>),
    Scale(Var, f64),
}

struct Node {
    value: Arc<Tensor>,
    grad: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.push_arc(Arc::new(value), op, requires_grad)
    }

    fn push_arc(&mut self, value: Arc<Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf sharing the parameter's storage.
    pub fn param(&mut self, value: &Arc<Tensor>) -> Var {
        self.push_arc(Arc::clone(value), Op::Leaf, true)
    }

    /// Leaf sharing storage that is never differentiated.
    pub fn frozen(&mut self, value: &Arc<Tensor>) -> Var {
        self.push_arc(Arc::clone(value), Op::Leaf, false)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor> {
        self.nodes[v.0].grad.take()
    }

    fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(va.rows(), va.cols(), data).expect("same shape")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// `a[m,n] + row[1,n]` broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let [m, n] = self.shape(a);
        if self.shape(row) != [1, n] {
            return Err(Error::dim(
                "add_row",
                format!("{:?} + {:?}", [m, n], self.shape(row)),
            ));
        }
        let mut out = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..m {
            for (o, b) in out.row_mut(i).iter_mut().zip(&r) {
                *o += b;
            }
        }
        let rg = self.rg(&[a, row]);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// `scale * a + shift`
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(a).map(|x| scale * x + shift);
        let rg = self.rg(&[a]);
        self.push(out, Op::Affine(a, scale), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.shape(p)[0])
            .ok_or_else(|| Error::dim("concat_cols", "no inputs"))?;
        if parts.iter().any(|&p| self.shape(p)[0] != rows) {
            return Err(Error::dim("concat_cols", "row counts differ"));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let dst = out.row_mut(r);
            let mut off = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                dst[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let [m, n] = self.shape(a);
        if start + len > n {
            return Err(Error::dim(
                "slice_cols",
                format!("[{start}, {}) of {n} columns", start + len),
            ));
        }
        let mut out = Tensor::zeros(m, len);
        for r in 0..m {
            out.row_mut(r)
                .copy_from_slice(&self.value(a).row(r)[start..start + len]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::SliceCols(a, start), rg))
    }

    /// Embedding lookup: row `ids[i]` of `table` becomes output row `i`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let [v, d] = self.shape(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::dim("gather", format!("id {bad} out of {v} rows")));
        }
        let mut out = Tensor::zeros(ids.len(), d);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.value(table).row(id));
        }
        let rg = self.rg(&[table]);
        Ok(self.push(out, Op::Gather(table, ids.to_vec()), rg))
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        if self.shape(a) != c.shape() {
            return Err(Error::dim("mul_const", "shape mismatch"));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(c.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Tensor::from_vec(c.rows(), c.cols(), data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::MulConst(a, c), rg))
    }

    /// Add a constant row to every row. Used for `-inf` logit masks.
    pub fn add_const_row(&mut self, a: Var, row: &[f64]) -> Result<Var> {
        let [m, n] = self.shape(a);
        if row.len() != n {
            return Err(Error::dim("add_const_row", "row length mismatch"));
        }
        let mut out = self.value(a).clone();
        for i in 0..m {
            for (o, b) in out.row_mut(i).iter_mut().zip(row) {
                *o += b;
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::AddConstRow(a), rg))
    }

    /// Row `i` of the output is row `i` of `a` where `take_a[i]`, else of `b`.
    pub fn select_rows(&mut self, take_a: &[bool], a: Var, b: Var) -> Result<Var> {
        self.same_shape("select_rows", a, b)?;
        if take_a.len() != self.shape(a)[0] {
            return Err(Error::dim("select_rows", "mask length"));
        }
        let mut out = self.value(b).clone();
        for (r, &t) in take_a.iter().enumerate() {
            if t {
                out.row_mut(r).copy_from_slice(self.value(a).row(r));
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::SelectRows(a, b, take_a.to_vec()), rg))
    }

    /// `[m,f] -> [m, f*blocks]`, placing row `i` in block `block_of[i]` and
    /// zeros elsewhere. A following matmul then uses per-block weights.
    pub fn block_expand(&mut self, a: Var, block_of: &[usize], blocks: usize) -> Result<Var> {
        let [m, f] = self.shape(a);
        if block_of.len() != m || block_of.iter().any(|&b| b >= blocks) {
            return Err(Error::dim("block_expand", "bad block assignment"));
        }
        let mut out = Tensor::zeros(m, f * blocks);
        for (r, &b) in block_of.iter().enumerate() {
            out.row_mut(r)[b * f..(b + 1) * f].copy_from_slice(self.value(a).row(r));
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::BlockExpand(a, block_of.to_vec()), rg))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = self.value(a).log_softmax_rows().map(f64::exp);
        let rg = self.rg(&[a]);
        self.push(out, Op::Softmax(a), rg)
    }

    /// Sum over rows of `-log softmax(logits)[target]`; rows without a target
    /// contribute nothing. Returns a 1x1 tensor.
    pub fn cross_entropy_sum(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let [m, n] = self.shape(logits);
        if targets.len() != m {
            return Err(Error::dim("cross_entropy_sum", "one target per row"));
        }
        let x = self.value(logits);
        let mut probs = Tensor::zeros(m, n);
        let mut loss = 0.0;
        for (r, t) in targets.iter().enumerate() {
            let Some(t) = *t else { continue };
            if t >= n {
                return Err(Error::dim("cross_entropy_sum", format!("target {t} >= {n}")));
            }
            let row = x.row(r);
            let lse = log_sum_exp(row);
            loss += lse - row[t];
            for (p, &v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropySum(logits, targets.to_vec(), probs),
            rg,
        ))
    }

    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let mut total = 0.0;
        for &p in parts {
            if self.shape(p) != [1, 1] {
                return Err(Error::dim("sum", "expects 1x1 inputs"));
            }
            total += self.value(p).data()[0];
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor::scalar(total), Op::Sum(parts.to_vec()), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    /// Inverted dropout: zero with probability `p`, scale survivors by
    /// `1/(1-p)`. Identity when `p == 0`.
    pub fn dropout<R: Rng>(&mut self, a: Var, p: f64, rng: &mut R) -> Result<Var> {
        if p <= 0.0 {
            return Ok(a);
        }
        let [m, n] = self.shape(a);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..m * n)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        self.mul_const(a, Tensor::from_vec(m, n, mask)?)
    }

    fn accumulate(&mut self, v: Var, g: Tensor) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(acc) => acc.add_assign(&g),
            None => node.grad = Some(g),
        }
    }

    fn grad_slot(&mut self, v: Var) -> Option<&mut Tensor> {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        let [r, c] = node.value.shape();
        Some(node.grad.get_or_insert_with(|| Tensor::zeros(r, c)))
    }

    /// Reverse sweep from a 1x1 loss. Gradients accumulate into every node
    /// that depends on a parameter.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.shape(loss) != [1, 1] {
            return Err(Error::dim("backward", "loss must be 1x1"));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.backprop(i, &op, &g);
            self.nodes[i].op = op;
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn backprop(&mut self, i: usize, op: &Op, g: &Tensor) {
        let out = Arc::clone(&self.nodes[i].value);
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let va = Arc::clone(&self.nodes[a.0].value);
                let vb = Arc::clone(&self.nodes[b.0].value);
                if let Some(ga) = self.grad_slot(*a) {
                    gemm(Operand::plain(g), Operand::transposed(&vb), ga, 1.0);
                }
                if let Some(gb) = self.grad_slot(*b) {
                    gemm(Operand::transposed(&va), Operand::plain(g), gb, 1.0);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(*a, g.clone());
                self.accumulate(*b, g.clone());
            }
            Op::AddRow(a, row) => {
                self.accumulate(*a, g.clone());
                let mut gr = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (acc, v) in gr.data_mut().iter_mut().zip(g.row(r)) {
                        *acc += v;
                    }
                }
                self.accumulate(*row, gr);
            }
            Op::Sub(a, b) => {
                self.accumulate(*a, g.clone());
                self.accumulate(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let va = Arc::clone(&self.nodes[a.0].value);
                let vb = Arc::clone(&self.nodes[b.0].value);
                self.accumulate(*a, hadamard(g, &vb));
                self.accumulate(*b, hadamard(g, &va));
            }
            Op::Affine(a, scale) => self.accumulate(*a, g.map(|x| scale * x)),
            Op::Sigmoid(a) => {
                let d = zip_map(g, &out, |gi, y| gi * y * (1.0 - y));
                self.accumulate(*a, d);
            }
            Op::Tanh(a) => {
                let d = zip_map(g, &out, |gi, y| gi * (1.0 - y * y));
                self.accumulate(*a, d);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let [m, n] = self.shape(p);
                    let mut gp = Tensor::zeros(m, n);
                    for r in 0..m {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + n]);
                    }
                    off += n;
                    self.accumulate(p, gp);
                }
            }
            Op::SliceCols(a, start) => {
                let start = *start;
                if let Some(ga) = self.grad_slot(*a) {
                    for r in 0..g.rows() {
                        for (acc, v) in ga.row_mut(r)[start..start + g.cols()].iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                }
            }
            Op::Gather(table, ids) => {
                if let Some(gt) = self.grad_slot(*table) {
                    for (r, &id) in ids.iter().enumerate() {
                        for (acc, v) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                }
            }
            Op::MulConst(a, c) => self.accumulate(*a, hadamard(g, c)),
            Op::AddConstRow(a) => self.accumulate(*a, g.clone()),
            Op::SelectRows(a, b, take_a) => {
                let mut ga = Tensor::zeros(g.rows(), g.cols());
                let mut gb = Tensor::zeros(g.rows(), g.cols());
                for (r, &t) in take_a.iter().enumerate() {
                    let dst = if t { &mut ga } else { &mut gb };
                    dst.row_mut(r).copy_from_slice(g.row(r));
                }
                self.accumulate(*a, ga);
                self.accumulate(*b, gb);
            }
            Op::BlockExpand(a, block_of) => {
                let f = self.shape(*a)[1];
                let mut ga = Tensor::zeros(g.rows(), f);
                for (r, &b) in block_of.iter().enumerate() {
                    ga.row_mut(r).copy_from_slice(&g.row(r)[b * f..(b + 1) * f]);
                }
                self.accumulate(*a, ga);
            }
            Op::Softmax(a) => {
                let mut d = Tensor::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    let y = out.row(r);
                    let gy = g.row(r);
                    let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                    for ((o, &yi), &gi) in d.row_mut(r).iter_mut().zip(y).zip(gy) {
                        *o = yi * (gi - dot);
                    }
                }
                self.accumulate(*a, d);
            }
            Op::CrossEntropySum(logits, targets, probs) => {
                let scale = g.data()[0];
                let mut d = Tensor::zeros(probs.rows(), probs.cols());
                for (r, t) in targets.iter().enumerate() {
                    let Some(t) = *t else { continue };
                    for (o, &p) in d.row_mut(r).iter_mut().zip(probs.row(r)) {
                        *o = scale * p;
                    }
                    d.row_mut(r)[t] -= scale;
                }
                self.accumulate(*logits, d);
            }
            Op::Sum(parts) => {
                for &p in parts {
                    self.accumulate(p, g.clone());
                }
            }
            Op::Scale(a, c) => self.accumulate(*a, g.map(|x| c * x)),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    zip_map(a, b, |x, y| x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row_vector(vec![0.0, 0.0]));
        let y = g.softmax(x);
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn identity_matmul_passes_values_and_gradients() {
        let mut g = Graph::new();
        let eye = g.constant(Tensor::identity(3));
        let x = g.param(&Arc::new(
            Tensor::from_vec(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap(),
        ));
        let y = g.matmul(eye, x).unwrap();
        assert_eq!(g.value(y), g.value(x));
        let w = g.constant(Tensor::from_vec(3, 2, vec![0.5, -1., 2., 0., 1., 3.]).unwrap());
        let prod = g.mul(y, w).unwrap();
        let ones = g.constant(Tensor::filled(2, 1, 1.0));
        let col = g.matmul(prod, ones).unwrap();
        let ones_row = g.constant(Tensor::filled(1, 3, 1.0));
        let loss = g.matmul(ones_row, col).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), g.value(w).data());
    }

    #[test]
    fn cross_entropy_at_optimum() {
        let mut g = Graph::new();
        let logits = g.param(&Arc::new(Tensor::row_vector(vec![0.0, f64::NEG_INFINITY])));
        let loss = g.cross_entropy_sum(logits, &[Some(0)]).unwrap();
        assert_eq!(g.value(loss).data()[0], 0.0);
        g.backward(loss).unwrap();
        assert!(g.grad(logits).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(2, 3));
        let b = g.constant(Tensor::zeros(2, 2));
        assert!(matches!(g.matmul(a, a), Err(Error::Dimension { .. })));
        assert!(g.add(a, b).is_err());
        assert!(g.slice_cols(a, 2, 2).is_err());
        assert!(g.gather(a, &[5]).is_err());
    }

    #[test]
    fn dropout_is_seeded() {
        use rand::SeedableRng;
        let run = || {
            let mut g = Graph::new();
            let a = g.constant(Tensor::filled(4, 4, 1.0));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
            let d = g.dropout(a, 0.5, &mut rng).unwrap();
            g.value(d).clone()
        };
        assert_eq!(run(), run());
        assert!(run().data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
