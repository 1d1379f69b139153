//! Dense matrices with a recording tape for reverse-mode gradients, plus
//! the Adam optimizer.
//!
//! Trainable tensors live in a [`ParamStore`]. A [`Tape`] is built fresh
//! for every forward pass: parameters enter it through [`Tape::param`],
//! operations append nodes, and [`Tape::backward`] walks the nodes in
//! reverse recording order and accumulates into the store's gradients.

use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named trainable matrix and its accumulated gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub value: Array2Data,
    #[serde(skip)]
    pub grad: Option<Array2<f64>>,
    pub requires_grad: bool,
}

/// Row-major matrix payload used for (de)serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Array2Data {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Array2Data {
    pub fn from_array(a: &Array2<f64>) -> Self {
        Array2Data {
            rows: a.nrows(),
            cols: a.ncols(),
            values: a.iter().copied().collect(),
        }
    }

    pub fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.values.clone()).map_err(|_| {
            Error::Checkpoint(format!(
                "{} values do not fill a {}x{} matrix",
                self.values.len(),
                self.rows,
                self.cols
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Owned collection of trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    values: Vec<Array2<f64>>,
    grads: Vec<Array2<f64>>,
    names: Vec<String>,
    trainable: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.grads.push(Array2::zeros(value.raw_dim()));
        self.values.push(value);
        self.names.push(name.into());
        self.trainable.push(true);
        ParamId(self.values.len() - 1)
    }

    /// Glorot-uniform `rows x cols` matrix.
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        self.add(name, glorot(rows, cols, rng))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Array2<f64> {
        &self.grads[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    /// Frozen parameters still take part in forward passes but receive no
    /// gradient.
    pub fn set_requires_grad(&mut self, id: ParamId, on: bool) {
        self.trainable[id.0] = on;
    }

    pub fn requires_grad(&self, id: ParamId) -> bool {
        self.trainable[id.0]
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// Snapshot as serializable tensors, in insertion order.
    pub fn tensors(&self) -> Vec<Tensor> {
        self.ids()
            .map(|id| Tensor {
                name: self.names[id.0].clone(),
                value: Array2Data::from_array(&self.values[id.0]),
                grad: None,
                requires_grad: self.trainable[id.0],
            })
            .collect()
    }

    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        let mut store = ParamStore::new();
        for t in tensors {
            let value = t.value.to_array()?;
            if value.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            let id = store.add(t.name.clone(), value);
            store.set_requires_grad(id, t.requires_grad);
        }
        Ok(store)
    }
}

/// Uniform on `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..=a))
}

/// Constant sparse matrix in CSR form, used as the left factor of
/// [`Tape::spmm`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= rows || t.1 >= cols) {
            return Err(Error::Shape {
                op: "sparse_from_triplets",
                left: (rows, cols),
                right: (r, c),
            });
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[[r, self.col_idx[k]]] += self.vals[k];
            }
        }
        d
    }

    fn mul(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, x.ncols()));
        for r in 0..self.rows {
            let mut row = out.row_mut(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row.scaled_add(self.vals[k], &x.row(self.col_idx[k]));
            }
        }
        out
    }

    /// `self^T * g`
    fn mul_transpose(&self, g: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.cols, g.ncols()));
        for r in 0..self.rows {
            let grow = g.row(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.row_mut(self.col_idx[k]).scaled_add(self.vals[k], &grow);
            }
        }
        out
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    SpMM(SparseMatrix, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    /// Multiply by the single entry of a 1x1 node.
    ScaleBy(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    ConcatCols(Vec<Var>),
    MeanRows(Var),
    SumAll(Var),
    GatherRows(Var, Vec<usize>),
    /// Row-wise softmax probabilities are kept for the backward pass.
    SoftmaxXent(Var, Vec<usize>, Array2<f64>),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Records a forward computation for one backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_of(a: &Array2<f64>) -> (usize, usize) {
    (a.nrows(), a.ncols())
}

fn shape_error(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape { op, left: a, right: b }
}

/// `max(t, 0) + ln(1 + e^{-|t|})`, exact for large `|t|`.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        shape_of(self.value(v))
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        let value = self.value(v);
        if value.dim() != (1, 1) {
            return Err(shape_error("scalar", shape_of(value), (1, 1)));
        }
        Ok(value[[0, 0]])
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_error("matmul", sa, sb));
        }
        let value = self.value(a).dot(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Constant sparse matrix times a node.
    pub fn spmm(&mut self, m: SparseMatrix, x: Var) -> Result<Var> {
        let sx = self.shape(x);
        if m.cols != sx.0 {
            return Err(shape_error("spmm", m.shape(), sx));
        }
        let value = m.mul(self.value(x));
        Ok(self.push(value, Op::SpMM(m, x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_error("add", sa, sb));
        }
        let value = self.value(a) + self.value(b);
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds a `1 x c` row to every row of an `r x c` node (bias).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(shape_error("add_row", sa, sr));
        }
        let value = self.value(a) + self.value(row);
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(value, Op::Scale(a, c))
    }

    /// Multiplies every entry of `a` by the scalar held in 1x1 node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let c = self
            .scalar(s)
            .map_err(|_| shape_error("scale_by", self.shape(a), self.shape(s)))?;
        let value = self.value(a) * c;
        Ok(self.push(value, Op::ScaleBy(a, s)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(softplus);
        self.push(value, Op::Softplus(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("concat_cols needs at least one input".into()))?;
        let rows = self.shape(*first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(shape_error("concat_cols", self.shape(*first), self.shape(p)));
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts checked");
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Column means as a `1 x c` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.0 == 0 {
            return Err(shape_error("mean_rows", s, (1, s.1)));
        }
        let value = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("non-empty")
            .insert_axis(Axis(0));
        Ok(self.push(value, Op::MeanRows(a)))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::SumAll(a))
    }

    /// Mean of all entries.
    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(shape_error("mean_all", self.shape(a), (1, 1)));
        }
        let total = self.sum_all(a);
        Ok(self.scale(total, 1.0 / n as f64))
    }

    /// Row `i` of the result is row `idx[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= s.0) {
            return Err(shape_error("gather_rows", s, (bad, s.1)));
        }
        let src = self.value(a);
        let mut value = Array2::zeros((idx.len(), s.1));
        for (r, &i) in idx.iter().enumerate() {
            value.row_mut(r).assign(&src.row(i));
        }
        Ok(self.push(value, Op::GatherRows(a, idx.to_vec())))
    }

    /// Mean softmax cross-entropy of the rows of `logits` against class
    /// indices `targets`, as a 1x1 node.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (n, c) = self.shape(logits);
        if n == 0 || targets.len() != n {
            return Err(shape_error("softmax_cross_entropy", (n, c), (targets.len(), 1)));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(shape_error("softmax_cross_entropy", (n, c), (n, bad)));
        }
        let x = self.value(logits);
        let mut probs = Array2::zeros((n, c));
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = x.row(r);
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
            total += max + sum.ln() - row[t];
            for j in 0..c {
                probs[[r, j]] = (row[j] - max).exp() / sum;
            }
        }
        let value = Array2::from_elem((1, 1), total / n as f64);
        Ok(self.push(value, Op::SoftmaxXent(logits, targets.to_vec(), probs)))
    }

    /// Reverse pass from a scalar node. Gradients of parameter leaves are
    /// added to `store`; repeated calls accumulate.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let s = self.shape(loss);
        if s != (1, 1) {
            return Err(shape_error("backward", s, (1, 1)));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    if store.requires_grad(*id) {
                        store.grads[id.0] += &g;
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::SpMM(m, x) => acc(&mut grads, *x, m.mul_transpose(&g)),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *row, gr);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g * *c),
                Op::ScaleBy(a, sv) => {
                    let c = self.value(*sv)[[0, 0]];
                    let gs = (&g * self.value(*a)).sum();
                    acc(&mut grads, *a, g * c);
                    acc(&mut grads, *sv, Array2::from_elem((1, 1), gs));
                }
                Op::Relu(a) => {
                    let mask = self.value(*a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    acc(&mut grads, *a, g * mask);
                }
                Op::Sigmoid(a) => {
                    let d = node.value.mapv(|y| y * (1.0 - y));
                    acc(&mut grads, *a, g * d);
                }
                Op::Softplus(a) => {
                    let d = self.value(*a).mapv(sigmoid);
                    acc(&mut grads, *a, g * d);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        acc(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::MeanRows(a) => {
                    let (r, _) = self.shape(*a);
                    let row = g.row(0).mapv(|x| x / r as f64);
                    let full = row.broadcast((r, row.len())).expect("row broadcast").to_owned();
                    acc(&mut grads, *a, full);
                }
                Op::SumAll(a) => {
                    let full = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    acc(&mut grads, *a, full);
                }
                Op::GatherRows(a, idx) => {
                    let mut full = Array2::zeros(self.shape(*a));
                    for (r, &src) in idx.iter().enumerate() {
                        full.row_mut(src).scaled_add(1.0, &g.row(r));
                    }
                    acc(&mut grads, *a, full);
                }
                Op::SoftmaxXent(a, targets, probs) => {
                    let n = targets.len() as f64;
                    let mut d = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        d[[r, t]] -= 1.0;
                    }
                    acc(&mut grads, *a, d * (g[[0, 0]] / n));
                }
            }
        }
        Ok(())
    }
}

/// Adam with bias correction. Moments are allocated lazily to match the
/// store on the first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    #[serde(skip)]
    m: Vec<Array2<f64>>,
    #[serde(skip)]
    v: Vec<Array2<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(0.01)
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every trainable parameter, then zeroes all grads.
    pub fn step(&mut self, store: &mut ParamStore) {
        if self.m.len() != store.len() {
            self.m = store.values.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..store.len() {
            if !store.trainable[i] {
                continue;
            }
            let g = &store.grads[i];
            let (b1, b2) = (self.beta1, self.beta2);
            self.m[i].zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            self.v[i].zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            let (lr, eps) = (self.lr, self.eps);
            let param = &mut store.values[i];
            ndarray::Zip::from(param)
                .and(&self.m[i])
                .and(&self.v[i])
                .for_each(|p, &m, &v| {
                    let m_hat = m / c1;
                    let v_hat = v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        store.zero_grad();
    }
}

/// Seeded generator for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.5..1.5))
    }

    /// Compares the tape gradient of `f` with respect to every parameter
    /// against central differences.
    fn grad_check<F>(store: &mut ParamStore, f: F, h: f64, tol: f64)
    where
        F: Fn(&mut Tape, &ParamStore) -> Var,
    {
        store.zero_grad();
        let mut tape = Tape::new();
        let loss = f(&mut tape, store);
        tape.backward(loss, store).unwrap();
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let analytic = store.grad(id).clone();
            for idx in 0..analytic.len() {
                let (r, c) = (idx / analytic.ncols(), idx % analytic.ncols());
                let orig = store.value(id)[[r, c]];
                let mut eval = |x: f64| {
                    store.value_mut(id)[[r, c]] = x;
                    let mut t = Tape::new();
                    let l = f(&mut t, store);
                    t.scalar(l).unwrap()
                };
                let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
                store.value_mut(id)[[r, c]] = orig;
                let a = analytic[[r, c]];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(err < tol, "{} [{r},{c}]: {a} vs {numeric}", store.name(id));
            }
        }
    }

    #[test]
    fn scalar_examples() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        // 50 + ln(1 + e^-50) rounds to 50 in double precision
        assert_eq!(softplus(50.0), 50.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert_eq!(sigmoid(0.0), 0.5);
        let mut tape = Tape::new();
        let x = tape.constant(array![[-3.0, 2.0]]);
        let r = tape.relu(x);
        assert_eq!(tape.value(r), &array![[0.0, 2.0]]);
    }

    #[test]
    fn linear_map_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let x = tape.constant(array![[0.5], [-1.0], [2.0]]);
        let y = tape.matmul(wv, x).unwrap();
        let loss = tape.sum_all(y);
        tape.backward(loss, &mut store).unwrap();
        // d sum(Wx) / dW = 1 x^T
        assert_eq!(store.grad(w), &array![[0.5, -1.0, 2.0], [0.5, -1.0, 2.0]]);
    }

    #[test]
    fn gradients_accumulate_until_zeroed() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[0.3, -0.7]]);
        let run = |store: &mut ParamStore| {
            let mut tape = Tape::new();
            let wv = tape.param(store, w);
            let s = tape.sigmoid(wv);
            let loss = tape.sum_all(s);
            tape.backward(loss, store).unwrap();
        };
        run(&mut store);
        let once = store.grad(w).clone();
        run(&mut store);
        assert_eq!(store.grad(w), &(&once * 2.0));
        store.zero_grad();
        assert!(store.grad(w).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let x = tape.constant(Array2::zeros((2, 2)));
        assert!(matches!(tape.backward(x, &mut store), Err(Error::Shape { .. })));
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Array2::zeros((2, 3)));
        let b = tape.constant(Array2::zeros((2, 3)));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("matmul"), "{msg}");
        let c = tape.constant(Array2::zeros((3, 3)));
        assert!(tape.add(a, c).is_err());
        assert!(tape.concat_cols(&[a, c]).is_err());
        assert!(tape.gather_rows(a, &[2]).is_err());
    }

    #[test]
    fn sigmoid_dot_gradient_vs_finite_differences() {
        let mut rng = init_rng(1);
        let mut store = ParamStore::new();
        store.add("w", random(1, 5, &mut rng));
        let v = random(5, 1, &mut rng);
        grad_check(
            &mut store,
            |t, s| {
                let w = t.param(s, ParamId(0));
                let sw = t.sigmoid(w);
                let vc = t.constant(v.clone());
                t.matmul(sw, vc).unwrap()
            },
            1e-5,
            1e-6,
        );
    }

    #[test]
    fn every_op_passes_gradient_check() {
        let mut rng = init_rng(7);
        let mut store = ParamStore::new();
        let a = store.add("a", random(4, 3, &mut rng));
        let b = store.add("b", random(3, 5, &mut rng));
        let bias = store.add("bias", random(1, 5, &mut rng));
        let c = store.add("c", random(4, 2, &mut rng));
        let eps = store.add("eps", random(1, 1, &mut rng));
        let sp = SparseMatrix::from_triplets(
            3,
            4,
            vec![(0, 0, 1.0), (0, 3, 0.5), (1, 1, -2.0), (2, 2, 1.0), (2, 0, 0.25), (0, 0, 1.0)],
        )
        .unwrap();
        grad_check(
            &mut store,
            |t, s| {
                let (av, bv, biasv, cv, ev) = (
                    t.param(s, a),
                    t.param(s, b),
                    t.param(s, bias),
                    t.param(s, c),
                    t.param(s, eps),
                );
                let ab = t.matmul(av, bv).unwrap();
                let ab = t.add_row(ab, biasv).unwrap();
                let relu = t.relu(ab);
                let sig = t.sigmoid(ab);
                let sum = t.add(relu, sig).unwrap();
                let scaled = t.scale_by(sum, ev).unwrap();
                let cat = t.concat_cols(&[scaled, cv]).unwrap();
                let neg = t.scale(cat, -0.7);
                let sp_out = t.spmm(sp.clone(), neg).unwrap();
                let gathered = t.gather_rows(sp_out, &[2, 0, 2, 1]).unwrap();
                let soft = t.softplus(gathered);
                let mean = t.mean_rows(soft).unwrap();
                let total = t.sum_all(mean);
                let m = t.mean_all(cat).unwrap();
                let xent = t.softmax_cross_entropy(sp_out, &[1, 5, 0]).unwrap();
                let out = t.add(total, m).unwrap();
                t.add(out, xent).unwrap()
            },
            1e-6,
            1e-4,
        );
    }

    #[test]
    fn cross_entropy_closed_form() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[0.0, 0.0], [1000.0, 0.0]]);
        let l = tape.softmax_cross_entropy(x, &[0, 0]).unwrap();
        // ln 2 for the uniform row, ~0 for the confident one
        assert!((tape.scalar(l).unwrap() - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!(tape.softmax_cross_entropy(x, &[0, 2]).is_err());
        assert!(tape.softmax_cross_entropy(x, &[0]).is_err());
    }

    #[test]
    fn sparse_matches_dense_product() {
        let mut rng = init_rng(3);
        let trip: Vec<_> = (0..12)
            .map(|_| (rng.gen_range(0..4), rng.gen_range(0..5), rng.gen_range(-1.0..1.0)))
            .collect();
        let sp = SparseMatrix::from_triplets(4, 5, trip).unwrap();
        let x = random(5, 3, &mut rng);
        let dense = sp.to_dense();
        assert!((sp.mul(&x) - dense.dot(&x)).iter().all(|d| d.abs() < 1e-14));
        let g = random(4, 3, &mut rng);
        assert!((sp.mul_transpose(&g) - dense.t().dot(&g)).iter().all(|d| d.abs() < 1e-14));
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn adam_first_step_and_zero_grad() {
        let mut store = ParamStore::new();
        let p = store.add("p", array![[1.0, -2.0, 0.5]]);
        store.grads[p.0] = array![[3.0, -0.2, 0.0]];
        let mut adam = Adam::new(0.01);
        adam.step(&mut store);
        let after = store.value(p);
        // bias-corrected first step moves each coordinate by ~lr against
        // the sign of its gradient
        assert!((after[[0, 0]] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((after[[0, 1]] - (-2.0 + 0.01)).abs() < 1e-9);
        assert_eq!(after[[0, 2]], 0.5);
        assert!(store.grad(p).iter().all(|&g| g == 0.0));
        adam.step(&mut store);
        assert!((store.value(p)[[0, 2]] - 0.5).abs() == 0.0);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut store = ParamStore::new();
        let x = store.add("x", array![[0.0]]);
        let mut adam = Adam::new(0.1);
        for _ in 0..100 {
            let mut tape = Tape::new();
            let xv = tape.param(&store, x);
            let three = tape.constant(array![[-3.0]]);
            let d = tape.add(xv, three).unwrap();
            let sq = tape.matmul(d, d).unwrap();
            tape.backward(sq, &mut store).unwrap();
            adam.step(&mut store);
        }
        assert!((store.value(x)[[0, 0]] - 3.0).abs() < 0.5, "{}", store.value(x)[[0, 0]]);
    }

    #[test]
    fn frozen_params_are_untouched() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[1.0]]);
        store.set_requires_grad(w, false);
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let loss = tape.sum_all(wv);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(w)[[0, 0]], 0.0);
        Adam::default().step(&mut store);
        assert_eq!(store.value(w)[[0, 0]], 1.0);
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let a = glorot(10, 22, &mut init_rng(5));
        let bound = (6.0f64 / 32.0).sqrt();
        assert!(a.iter().all(|x| x.abs() <= bound));
        assert_eq!(a, glorot(10, 22, &mut init_rng(5)));
    }

    #[test]
    fn store_round_trips_through_tensors() {
        let mut store = ParamStore::new();
        store.add_glorot("w", 3, 4, &mut init_rng(2));
        let z = store.add_zeros("b", 1, 4);
        store.set_requires_grad(z, false);
        let back = ParamStore::from_tensors(&store.tensors()).unwrap();
        assert_eq!(back, store);
        let json = serde_json::to_string(&store.tensors()).unwrap();
        let parsed: Vec<Tensor> = serde_json::from_str(&json).unwrap();
        assert_eq!(ParamStore::from_tensors(&parsed).unwrap(), store);
    }
}
