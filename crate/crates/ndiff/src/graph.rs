use crate::params::{ParamId, ParamStore};
use crate::{matmul_acc, matmul_at_acc, matmul_bt_acc, NdError, Result, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    LogSigmoid(Var),
    Conv1d { x: Var, w: Var, dilation: usize },
    Embedding { table: Var, ids: Vec<usize> },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    BroadcastRows(Var),
    L1Loss(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Operation tape. Nodes are appended in evaluation order, which is also a
/// topological order for the backward sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(String, ParamId, Var)>,
}

fn shape_err(op: &'static str, detail: String) -> NdError {
    NdError::Shape { op, detail }
}

fn check_2d(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.shape().len() != 2 {
        return Err(shape_err(op, format!("expected a matrix, got shape {:?}", t.shape())));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x) = −softplus(−x)`, stable for large `|x|`.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(NdError::NonFinite(op_name));
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Constant input; receives a gradient but is not a parameter.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant that never needs a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf holding a copy of a stored parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let v = self.input(store.value(id).clone());
        self.params.push((store.name().to_string(), id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = check_2d("matmul", self.value(a))?;
        let (k2, m) = check_2d("matmul", self.value(b))?;
        if k != k2 {
            return Err(shape_err("matmul", format!("{n}×{k} · {k2}×{m}")));
        }
        let mut out = vec![0.0; n * m];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, n, k, m);
        self.push("matmul", Tensor::matrix(n, m, out)?, Op::MatMul(a, b), &[a, b])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(name, t, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Adds a `1×C` row to every row of a `T×C` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (t, c) = check_2d("add_row", self.value(a))?;
        if self.shape(row) != [1, c] {
            return Err(shape_err("add_row", format!("row {:?} for {t}×{c}", self.shape(row))));
        }
        let r = self.value(row).data().to_vec();
        let mut data = self.value(a).data().to_vec();
        for chunk in data.chunks_mut(c.max(1)) {
            for (x, b) in chunk.iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.push("add_row", Tensor::matrix(t, c, data)?, Op::AddRow(a, row), &[a, row])
    }

    fn unary(&mut self, name: &'static str, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let t = self.value(a).map(f);
        self.push(name, t, op, &[a])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary("scale", a, Op::Scale(a, s), |x| x * s)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary("add_scalar", a, Op::AddScalar(a), |x| x + s)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary("leaky_relu", a, Op::LeakyRelu(a, slope), |x| if x > 0.0 { x } else { slope * x })
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, Op::Tanh(a), f64::tanh)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(&bad) = self.value(a).data().iter().find(|&&x| !(x > 0.0)) {
            return Err(NdError::LogDomain(bad));
        }
        self.unary("log", a, Op::Log(a), f64::ln)
    }

    /// `log σ(x)` without overflow.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("log_sigmoid", a, Op::LogSigmoid(a), log_sigmoid)
    }

    /// Same-length temporal convolution. `x: T×Cin`, `w: Cout×Cin×k` with odd
    /// `k`; tap `j` reads frame `t + (j − (k−1)/2)·dilation`, zero outside.
    pub fn conv1d(&mut self, x: Var, w: Var, dilation: usize) -> Result<Var> {
        let (t, cin) = check_2d("conv1d", self.value(x))?;
        let ws = self.shape(w).to_vec();
        if ws.len() != 3 || ws[1] != cin || ws[2] % 2 == 0 || dilation == 0 {
            return Err(shape_err(
                "conv1d",
                format!("input {t}×{cin}, kernel {ws:?}, dilation {dilation}"),
            ));
        }
        let (cout, k) = (ws[0], ws[2]);
        let taps = tap_matrices(self.value(w).data(), cout, cin, k);
        let xd = self.value(x).data();
        let mut out = vec![0.0; t * cout];
        for (j, tap) in taps.iter().enumerate() {
            let shift = (j as isize - (k / 2) as isize) * dilation as isize;
            let (lo, hi) = valid_range(t, shift);
            if lo >= hi {
                continue;
            }
            let src = ((lo as isize + shift) as usize) * cin;
            matmul_acc(&xd[src..src + (hi - lo) * cin], tap, &mut out[lo * cout..hi * cout], hi - lo, cin, cout);
        }
        self.push("conv1d", Tensor::matrix(t, cout, out)?, Op::Conv1d { x, w, dilation }, &[x, w])
    }

    /// Rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (n, d) = check_2d("embedding", self.value(table))?;
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            if i >= n {
                return Err(NdError::Index { index: i, len: n });
            }
            data.extend_from_slice(self.value(table).row(i));
        }
        let t = Tensor::matrix(ids.len(), d, data)?;
        self.push("embedding", t, Op::Embedding { table, ids: ids.to_vec() }, &[table])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(shape_err("concat_cols", "nothing to concatenate".into()));
        }
        let rows = self.value(parts[0]).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = check_2d("concat_cols", self.value(p))?;
            if r != rows {
                return Err(shape_err("concat_cols", format!("{r} rows vs {rows}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let t = Tensor::matrix(rows, total, data)?;
        self.push("concat_cols", t, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(shape_err("concat_rows", "nothing to concatenate".into()));
        }
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (r, c) = check_2d("concat_rows", self.value(p))?;
            if c != cols {
                return Err(shape_err("concat_rows", format!("{c} cols vs {cols}")));
            }
            data.extend_from_slice(self.value(p).data());
            rows += r;
        }
        let t = Tensor::matrix(rows, cols, data)?;
        self.push("concat_rows", t, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = check_2d("slice_rows", self.value(a))?;
        if start > end || end > r {
            return Err(shape_err("slice_rows", format!("[{start}, {end}) of {r} rows")));
        }
        let data = self.value(a).data()[start * c..end * c].to_vec();
        self.push("slice_rows", Tensor::matrix(end - start, c, data)?, Op::SliceRows(a, start), &[a])
    }

    /// Columns `[start, end)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = check_2d("slice_cols", self.value(a))?;
        if start > end || end > c {
            return Err(shape_err("slice_cols", format!("[{start}, {end}) of {c} columns")));
        }
        let src = self.value(a);
        let data = (0..r).flat_map(|i| src.row(i)[start..end].to_vec()).collect();
        self.push("slice_cols", Tensor::matrix(r, end - start, data)?, Op::SliceCols(a, start), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(shape_err("mean", "empty tensor".into()));
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    /// Column means, `T×C → 1×C`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (r, c) = check_2d("mean_rows", self.value(a))?;
        if r == 0 {
            return Err(shape_err("mean_rows", "no rows".into()));
        }
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(self.value(a).row(i)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= r as f64);
        self.push("mean_rows", Tensor::matrix(1, c, out)?, Op::MeanRows(a), &[a])
    }

    /// Repeats a `1×C` row `n` times.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let (r, c) = check_2d("broadcast_rows", self.value(a))?;
        if r != 1 {
            return Err(shape_err("broadcast_rows", format!("expected one row, got {r}")));
        }
        let row = self.value(a).data().to_vec();
        let data = (0..n).flat_map(|_| row.iter().copied()).collect();
        self.push("broadcast_rows", Tensor::matrix(n, c, data)?, Op::BroadcastRows(a), &[a])
    }

    /// Mean absolute difference. The subgradient at equality is 0.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("l1_loss", a, b)?;
        let n = self.value(a).len();
        if n == 0 {
            return Err(shape_err("l1_loss", "empty tensors".into()));
        }
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        self.push("l1_loss", Tensor::scalar(s / n as f64), Op::L1Loss(a, b), &[a, b])
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        if self.value(loss).len() != 1 {
            return Err(NdError::NotScalar(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.propagate(node, &gy, &mut grads);
            }
            grads[idx] = Some(gy);
        }
        Ok(Grads {
            grads,
            shapes: self.nodes[..=loss.0].iter().map(|n| n.value.shape().to_vec()).collect(),
            params: self.params.clone(),
        })
    }

    fn propagate(&self, node: &Node, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, f: &dyn Fn(&mut [f64])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (n, k) = (val(*a).rows(), val(*a).cols());
                let m = val(*b).cols();
                acc(*a, &|g| matmul_bt_acc(gy, val(*b).data(), g, n, m, k));
                acc(*b, &|g| matmul_at_acc(val(*a).data(), gy, g, n, k, m));
            }
            Op::Add(a, b) => {
                acc(*a, &|g| add_into(g, gy));
                acc(*b, &|g| add_into(g, gy));
            }
            Op::Sub(a, b) => {
                acc(*a, &|g| add_into(g, gy));
                acc(*b, &|g| g.iter_mut().zip(gy).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a).data(), val(*b).data());
                acc(*a, &|g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * bv[i];
                    }
                });
                acc(*b, &|g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * av[i];
                    }
                });
            }
            Op::AddRow(a, row) => {
                acc(*a, &|g| add_into(g, gy));
                let c = val(*row).len();
                acc(*row, &|g| {
                    for chunk in gy.chunks(c.max(1)) {
                        add_into(g, chunk);
                    }
                });
            }
            Op::Scale(a, s) => acc(*a, &|g| g.iter_mut().zip(gy).for_each(|(x, y)| *x += s * y)),
            Op::AddScalar(a) => acc(*a, &|g| add_into(g, gy)),
            Op::LeakyRelu(a, slope) => {
                let x = val(*a).data();
                acc(*a, &|g| {
                    for i in 0..g.len() {
                        g[i] += if x[i] > 0.0 { gy[i] } else { slope * gy[i] };
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                acc(*a, &|g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                acc(*a, &|g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::Log(a) => {
                let x = val(*a).data();
                acc(*a, &|g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] / x[i];
                    }
                });
            }
            Op::LogSigmoid(a) => {
                let x = val(*a).data();
                acc(*a, &|g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * sigmoid(-x[i]);
                    }
                });
            }
            Op::Conv1d { x, w, dilation } => {
                let (t, cin) = (val(*x).rows(), val(*x).cols());
                let ws = val(*w).shape();
                let (cout, k) = (ws[0], ws[2]);
                let taps = tap_matrices(val(*w).data(), cout, cin, k);
                let xd = val(*x).data();
                acc(*x, &|g| {
                    for (j, tap) in taps.iter().enumerate() {
                        let shift = (j as isize - (k / 2) as isize) * *dilation as isize;
                        let (lo, hi) = valid_range(t, shift);
                        if lo >= hi {
                            continue;
                        }
                        let dst = ((lo as isize + shift) as usize) * cin;
                        // dx[t+s] += dy[t] · tapᵀ
                        matmul_bt_acc(&gy[lo * cout..hi * cout], tap, &mut g[dst..dst + (hi - lo) * cin], hi - lo, cout, cin);
                    }
                });
                acc(*w, &|g| {
                    for j in 0..k {
                        let shift = (j as isize - (k / 2) as isize) * *dilation as isize;
                        let (lo, hi) = valid_range(t, shift);
                        if lo >= hi {
                            continue;
                        }
                        let src = ((lo as isize + shift) as usize) * cin;
                        // dtap = x[t+s]ᵀ · dy[t], a Cin×Cout matrix
                        let mut dtap = vec![0.0; cin * cout];
                        matmul_at_acc(&xd[src..src + (hi - lo) * cin], &gy[lo * cout..hi * cout], &mut dtap, hi - lo, cin, cout);
                        for c in 0..cin {
                            for o in 0..cout {
                                g[(o * cin + c) * k + j] += dtap[c * cout + o];
                            }
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let d = val(*table).cols();
                acc(*table, &|g| {
                    for (r, &i) in ids.iter().enumerate() {
                        add_into(&mut g[i * d..(i + 1) * d], &gy[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let rows = node.value.rows();
                let mut offset = 0;
                for &p in parts {
                    let c = val(p).cols();
                    acc(p, &|g| {
                        for r in 0..rows {
                            add_into(&mut g[r * c..(r + 1) * c], &gy[r * total + offset..r * total + offset + c]);
                        }
                    });
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = val(p).len();
                    acc(p, &|g| add_into(g, &gy[offset..offset + n]));
                    offset += n;
                }
            }
            Op::SliceRows(a, start) => {
                let c = val(*a).cols();
                acc(*a, &|g| add_into(&mut g[start * c..start * c + gy.len()], gy));
            }
            Op::SliceCols(a, start) => {
                let c = val(*a).cols();
                let w = node.value.cols();
                acc(*a, &|g| {
                    for r in 0..node.value.rows() {
                        add_into(&mut g[r * c + start..r * c + start + w], &gy[r * w..(r + 1) * w]);
                    }
                });
            }
            Op::Sum(a) => acc(*a, &|g| g.iter_mut().for_each(|x| *x += gy[0])),
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                acc(*a, &|g| g.iter_mut().for_each(|x| *x += gy[0] / n));
            }
            Op::MeanRows(a) => {
                let r = val(*a).rows() as f64;
                let c = val(*a).cols();
                acc(*a, &|g| {
                    for chunk in g.chunks_mut(c.max(1)) {
                        chunk.iter_mut().zip(gy).for_each(|(x, y)| *x += y / r);
                    }
                });
            }
            Op::BroadcastRows(a) => {
                let c = val(*a).cols();
                acc(*a, &|g| {
                    for chunk in gy.chunks(c.max(1)) {
                        add_into(g, chunk);
                    }
                });
            }
            Op::L1Loss(a, b) => {
                let (av, bv) = (val(*a).data(), val(*b).data());
                let n = av.len() as f64;
                let sign = |i: usize| {
                    let d = av[i] - bv[i];
                    if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                };
                acc(*a, &|g| {
                    for i in 0..g.len() {
                        g[i] += gy[0] * sign(i) / n;
                    }
                });
                acc(*b, &|g| {
                    for i in 0..g.len() {
                        g[i] -= gy[0] * sign(i) / n;
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

/// Output rows `[lo, hi)` whose shifted source row lies inside `[0, t)`.
fn valid_range(t: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (t as isize - shift.max(0)).max(0) as usize;
    (lo.min(t), hi)
}

/// Per-tap `Cin×Cout` matrices of a `Cout×Cin×k` kernel.
fn tap_matrices(w: &[f64], cout: usize, cin: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut m = vec![0.0; cin * cout];
            for o in 0..cout {
                for c in 0..cin {
                    m[c * cout + o] = w[(o * cin + c) * k + j];
                }
            }
            m
        })
        .collect()
}

/// Gradients from one backward sweep.
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
    params: Vec<(String, ParamId, Var)>,
}

impl Grads {
    /// Gradient with respect to a node, if the loss depends on it.
    pub fn wrt(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.shapes[v.0].clone(), g.clone()).expect("gradient matches node shape"))
    }

    /// Per-parameter gradients of `store`, in parameter order. Parameters not
    /// reached by the loss get zeros; repeated uses accumulate.
    pub fn for_store(&self, store: &ParamStore) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        for (name, id, v) in &self.params {
            if name != store.name() {
                continue;
            }
            if let Some(Some(g)) = self.grads.get(v.0) {
                add_into(&mut out[id.0], g);
            }
        }
        out
    }
}
