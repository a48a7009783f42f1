//! Parameterized layers. Each layer stores [`ParamId`]s; `bind` places the
//! parameters on a graph once so repeated calls share the same leaves.

use rand::Rng;

use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::{Result, Tensor};

/// Fully connected layer, `y = x·W + b` with `W: in×out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundDense {
    w: Var,
    b: Var,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Dense {
        let w = store.add_uniform(format!("{name}.w"), &[input, output], input, rng);
        let b = store.add_uniform(format!("{name}.b"), &[1, output], input, rng);
        Dense { w, b, input, output }
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> BoundDense {
        BoundDense {
            w: g.param(store, self.w),
            b: g.param(store, self.b),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        self.bind(g, store).forward(g, x)
    }
}

impl BoundDense {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let y = g.matmul(x, self.w)?;
        g.add_row(y, self.b)
    }
}

/// Same-length dilated temporal convolution with bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut impl Rng,
    ) -> Conv1d {
        let fan_in = input * kernel;
        let w = store.add_uniform(format!("{name}.w"), &[output, input, kernel], fan_in, rng);
        let b = store.add_uniform(format!("{name}.b"), &[1, output], fan_in, rng);
        Conv1d {
            w,
            b,
            input,
            output,
            kernel,
            dilation,
        }
    }

    /// Frames on each side that can influence an output frame.
    pub fn radius(&self) -> usize {
        self.kernel / 2 * self.dilation
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let y = g.conv1d(x, w, self.dilation)?;
        g.add_row(y, b)
    }
}

/// Lookup table, one row per id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embedding {
    pub table: ParamId,
    pub count: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, count: usize, dim: usize, rng: &mut impl Rng) -> Embedding {
        let table = store.add_uniform(format!("{name}.table"), &[count, dim], 1, rng);
        Embedding { table, count, dim }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, ids: &[usize]) -> Result<Var> {
        let t = g.param(store, self.table);
        g.embedding(t, ids)
    }
}

/// Single-layer LSTM with gate order input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLstm {
    w_ih: Var,
    w_hh: Var,
    b: Var,
    hidden: usize,
}

/// Hidden and cell state, each `1×H`.
#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Lstm {
        let w_ih = store.add_uniform(format!("{name}.w_ih"), &[input, 4 * hidden], hidden, rng);
        let w_hh = store.add_uniform(format!("{name}.w_hh"), &[hidden, 4 * hidden], hidden, rng);
        let b = store.add_uniform(format!("{name}.b"), &[1, 4 * hidden], hidden, rng);
        Lstm {
            w_ih,
            w_hh,
            b,
            input,
            hidden,
        }
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> BoundLstm {
        BoundLstm {
            w_ih: g.param(store, self.w_ih),
            w_hh: g.param(store, self.w_hh),
            b: g.param(store, self.b),
            hidden: self.hidden,
        }
    }

    /// Runs the whole `T×in` sequence from a zero state; returns `T×H`.
    pub fn forward_seq(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        self.bind(g, store).forward_seq(g, x)
    }
}

impl BoundLstm {
    pub fn zero_state(&self, g: &mut Graph) -> LstmState {
        LstmState {
            h: g.constant(Tensor::zeros(&[1, self.hidden])),
            c: g.constant(Tensor::zeros(&[1, self.hidden])),
        }
    }

    /// Projects inputs for every step at once: `x·W_ih + b`.
    pub fn project(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let p = g.matmul(x, self.w_ih)?;
        g.add_row(p, self.b)
    }

    /// One recurrence step from a pre-projected `1×4H` input row.
    pub fn step(&self, g: &mut Graph, projected: Var, state: LstmState) -> Result<LstmState> {
        let h = self.hidden;
        let rec = g.matmul(state.h, self.w_hh)?;
        let z = g.add(projected, rec)?;
        let zi = g.slice_cols(z, 0, h)?;
        let zf = g.slice_cols(z, h, 2 * h)?;
        let zg = g.slice_cols(z, 2 * h, 3 * h)?;
        let zo = g.slice_cols(z, 3 * h, 4 * h)?;
        let i = g.sigmoid(zi)?;
        let f = g.sigmoid(zf)?;
        let cand = g.tanh(zg)?;
        let o = g.sigmoid(zo)?;
        let keep = g.mul(f, state.c)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c)?;
        let h = g.mul(o, tc)?;
        Ok(LstmState { h, c })
    }

    pub fn forward_seq(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let t = g.value(x).rows();
        let projected = self.project(g, x)?;
        let mut state = self.zero_state(g);
        let mut hs = Vec::with_capacity(t);
        for i in 0..t {
            let row = g.slice_rows(projected, i, i + 1)?;
            state = self.step(g, row, state)?;
            hs.push(state.h);
        }
        g.concat_rows(&hs)
    }
}
