//! Two stacked LSTM layers unrolled over the look-back window, followed by a
//! linear head on the last hidden state of the second layer.
//!
//! Each layer fuses its four gates into single matrices: `w` is
//! `input × 4H`, `u` is `H × 4H` and `b` is `1 × 4H`, with column blocks in
//! the order input, forget, output, candidate. Per time step
//!
//! ```text
//! i, f, o = sigmoid(x W + b + h U)      (blocks 0..3)
//! g       = tanh(x W + b + h U)         (block 3)
//! c_t     = f * c_prev + i * g
//! h_t     = o * tanh(c_t)
//! ```
//!
//! A batch of windows is laid out time-major and stacked: rows
//! `t·B .. (t+1)·B` hold time step `t` of all `B` windows. That lets the
//! input projection and the weight gradients of a whole layer run as one
//! product each; only the recurrent product is evaluated step by step.
//!
//! Dropout, when active, multiplies the first layer's outputs before they
//! enter the second layer. The recurrent state path is never masked.

use rand::Rng;

use super::{glorot, Dropout, Gradients, ModelSizes};
use crate::error::{Error, Result};
use crate::numkernel::{gemm, gemm_view, sigmoid_in_place, tanh_in_place, Matrix, Op, View};

/// Gate blocks inside the fused weight matrices, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

/// Initial value of every forget-gate bias.
pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Matrix,
}

/// Gate activations of one cell step (`batch × 4H`, blocks i, f, o, g) and
/// `tanh(c_t)`.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub gates: Matrix,
    pub tanh_c: Matrix,
}

impl LstmLayer {
    fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        // Glorot bounds are taken per gate block (input × H and H × H).
        let w = glorot(input, 4 * hidden, input, hidden, rng);
        let u = glorot(hidden, 4 * hidden, hidden, hidden, rng);
        let mut b = Matrix::zeros(1, 4 * hidden);
        for j in 0..hidden {
            b.set(0, Gate::Forget as usize * hidden + j, FORGET_BIAS_INIT);
        }
        Self { w, u, b }
    }

    pub fn hidden(&self) -> usize {
        self.u.rows()
    }

    pub fn input_size(&self) -> usize {
        self.w.rows()
    }

    /// Copies one gate's `(W, U, b)` blocks out of the fused matrices.
    pub fn gate(&self, gate: Gate) -> (Matrix, Matrix, Matrix) {
        let h = self.hidden();
        let start = gate as usize * h;
        (self.w.columns(start, h), self.u.columns(start, h), self.b.columns(start, h))
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if self.u.cols() != 4 * h || self.w.cols() != 4 * h || self.b.shape() != (1, 4 * h) {
            return Err(Error::Shape(format!(
                "LSTM layer shapes w {:?}, u {:?}, b {:?} are inconsistent",
                self.w.shape(),
                self.u.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

/// Sigmoid on the i, f, o blocks and tanh on the candidate block, row by row.
fn activate_gates(z: &mut [f64], hidden: usize) {
    for row in z.chunks_exact_mut(4 * hidden) {
        let (sig, cand) = row.split_at_mut(3 * hidden);
        sigmoid_in_place(sig);
        tanh_in_place(cand);
    }
}

/// `c = f ⊙ c_prev + i ⊙ g`, `tanh_c = tanh(c)`, `h = o ⊙ tanh_c`.
fn cell_update(
    gates: &[f64],
    c_prev: &[f64],
    c: &mut [f64],
    tanh_c: &mut [f64],
    h: &mut [f64],
    hidden: usize,
) {
    for (r, g) in gates.chunks_exact(4 * hidden).enumerate() {
        let base = r * hidden;
        for j in 0..hidden {
            c[base + j] = g[hidden + j] * c_prev[base + j] + g[j] * g[3 * hidden + j];
        }
    }
    tanh_c.copy_from_slice(c);
    tanh_in_place(tanh_c);
    for (r, g) in gates.chunks_exact(4 * hidden).enumerate() {
        let base = r * hidden;
        for j in 0..hidden {
            h[base + j] = g[2 * hidden + j] * tanh_c[base + j];
        }
    }
}

/// One LSTM step for a batch: returns `(h_t, c_t, cache)`.
pub fn lstm_cell_forward(
    layer: &LstmLayer,
    x_t: &Matrix,
    h_prev: &Matrix,
    c_prev: &Matrix,
) -> Result<(Matrix, Matrix, CellCache)> {
    let hidden = layer.hidden();
    let batch = x_t.rows();
    if x_t.cols() != layer.input_size()
        || h_prev.shape() != (batch, hidden)
        || c_prev.shape() != (batch, hidden)
    {
        return Err(Error::Shape(format!(
            "LSTM cell got x {:?}, h {:?}, c {:?} for input {} / hidden {}",
            x_t.shape(),
            h_prev.shape(),
            c_prev.shape(),
            layer.input_size(),
            hidden
        )));
    }
    let mut z = Matrix::zeros(batch, 4 * hidden);
    gemm(1.0, x_t, Op::N, &layer.w, Op::N, 0.0, &mut z);
    z.add_row_broadcast(&layer.b);
    gemm(1.0, h_prev, Op::N, &layer.u, Op::N, 1.0, &mut z);
    activate_gates(z.data_mut(), hidden);
    let mut c = Matrix::zeros(batch, hidden);
    let mut tanh_c = Matrix::zeros(batch, hidden);
    let mut h = Matrix::zeros(batch, hidden);
    cell_update(
        z.data(),
        c_prev.data(),
        c.data_mut(),
        tanh_c.data_mut(),
        h.data_mut(),
        hidden,
    );
    Ok((h, c, CellCache { gates: z, tanh_c }))
}

/// Full unrolled state of one layer over a stacked batch.
#[derive(Debug, Clone)]
struct LayerTrace {
    /// `(L·B) × input`.
    input: Matrix,
    /// `((L+1)·B) × H`; block 0 is the zero initial state.
    h: Matrix,
    /// `((L+1)·B) × H`; block 0 is the zero initial state.
    c: Matrix,
    /// `(L·B) × 4H` activated gates.
    gates: Matrix,
    /// `(L·B) × H`.
    tanh_c: Matrix,
}

fn layer_forward(layer: &LstmLayer, input: Matrix, batch: usize) -> LayerTrace {
    let hidden = layer.hidden();
    let steps = input.rows() / batch;
    let block = batch * hidden;
    let mut z = Matrix::zeros(input.rows(), 4 * hidden);
    gemm(1.0, &input, Op::N, &layer.w, Op::N, 0.0, &mut z);
    z.add_row_broadcast(&layer.b);
    let mut h = Matrix::zeros((steps + 1) * batch, hidden);
    let mut c = Matrix::zeros((steps + 1) * batch, hidden);
    let mut tanh_c = Matrix::zeros(steps * batch, hidden);
    for t in 0..steps {
        let z_t = &mut z.data_mut()[t * 4 * block..(t + 1) * 4 * block];
        let (h_done, h_next) = h.data_mut().split_at_mut((t + 1) * block);
        let h_prev = View {
            rows: batch,
            cols: hidden,
            data: &h_done[t * block..],
        };
        gemm_view(1.0, h_prev, Op::N, layer.u.view(), Op::N, 1.0, z_t, batch, 4 * hidden);
        activate_gates(z_t, hidden);
        let (c_done, c_next) = c.data_mut().split_at_mut((t + 1) * block);
        cell_update(
            z_t,
            &c_done[t * block..],
            &mut c_next[..block],
            &mut tanh_c.data_mut()[t * block..(t + 1) * block],
            &mut h_next[..block],
            hidden,
        );
    }
    LayerTrace {
        input,
        h,
        c,
        gates: z,
        tanh_c,
    }
}

/// Backpropagation through time for one layer. `dh_above` (`(L·B) × H`) is
/// the gradient reaching each step's output from outside the recurrence.
/// Accumulates `[dW, dU, db]` into `grads` and optionally returns the input
/// gradient `(L·B) × input`.
fn layer_backward(
    layer: &LstmLayer,
    tr: &LayerTrace,
    batch: usize,
    dh_above: &Matrix,
    grads: &mut [Matrix],
    want_dx: bool,
) -> Option<Matrix> {
    let hidden = layer.hidden();
    let steps = tr.gates.rows() / batch;
    let block = batch * hidden;
    let mut dz = Matrix::zeros(steps * batch, 4 * hidden);
    let mut dh = vec![0.0; block];
    let mut dc = vec![0.0; block];
    let mut dc_prev = vec![0.0; block];
    for t in (0..steps).rev() {
        for (d, a) in dh.iter_mut().zip(&dh_above.data()[t * block..(t + 1) * block]) {
            *d += a;
        }
        let gates = &tr.gates.data()[t * 4 * block..(t + 1) * 4 * block];
        let tanh_c = &tr.tanh_c.data()[t * block..(t + 1) * block];
        let c_prev = &tr.c.data()[t * block..(t + 1) * block];
        let dz_t = &mut dz.data_mut()[t * 4 * block..(t + 1) * 4 * block];
        for r in 0..batch {
            let row = r * hidden..(r + 1) * hidden;
            let g = &gates[r * 4 * hidden..(r + 1) * 4 * hidden];
            let (gi, rest) = g.split_at(hidden);
            let (gf, rest) = rest.split_at(hidden);
            let (go, gg) = rest.split_at(hidden);
            let dzr = &mut dz_t[r * 4 * hidden..(r + 1) * 4 * hidden];
            let (zi, rest) = dzr.split_at_mut(hidden);
            let (zf, rest) = rest.split_at_mut(hidden);
            let (zo, zg) = rest.split_at_mut(hidden);
            let (dh_r, dc_r, tc_r, cp_r) = (&dh[row.clone()], &dc[row.clone()], &tanh_c[row.clone()], &c_prev[row.clone()]);
            let dcp_r = &mut dc_prev[row];
            for j in 0..hidden {
                let (iv, fv, ov, gv, tc) = (gi[j], gf[j], go[j], gg[j], tc_r[j]);
                let dcv = dc_r[j] + dh_r[j] * ov * (1.0 - tc * tc);
                dcp_r[j] = dcv * fv;
                zi[j] = dcv * gv * iv * (1.0 - iv);
                zf[j] = dcv * cp_r[j] * fv * (1.0 - fv);
                zo[j] = dh_r[j] * tc * ov * (1.0 - ov);
                zg[j] = dcv * iv * (1.0 - gv * gv);
            }
        }
        let dz_view = View {
            rows: batch,
            cols: 4 * hidden,
            data: dz_t,
        };
        gemm_view(1.0, dz_view, Op::N, layer.u.view(), Op::T, 0.0, &mut dh, batch, hidden);
        std::mem::swap(&mut dc, &mut dc_prev);
    }
    gemm(1.0, &tr.input, Op::T, &dz, Op::N, 1.0, &mut grads[0]);
    let (u_rows, u_cols) = grads[1].shape();
    gemm_view(
        1.0,
        tr.h.row_block(0, steps * batch),
        Op::T,
        dz.view(),
        Op::N,
        1.0,
        grads[1].data_mut(),
        u_rows,
        u_cols,
    );
    grads[2].axpy(1.0, &dz.sum_rows());
    want_dx.then(|| {
        let mut dx = Matrix::zeros(steps * batch, layer.input_size());
        gemm(1.0, &dz, Op::N, &layer.w, Op::T, 0.0, &mut dx);
        dx
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub layers: [LstmLayer; 2],
    pub w_out: Matrix,
    pub b_out: Matrix,
    look_back: usize,
}

/// Unrolled forward state for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    batch: usize,
    layer1: LayerTrace,
    mask: Option<Matrix>,
    layer2: LayerTrace,
    h_last: Matrix,
}

impl LstmParams {
    pub(crate) fn init(sizes: ModelSizes, rng: &mut impl Rng) -> Self {
        let [h1, h2] = sizes.hidden;
        Self {
            layers: [
                LstmLayer::init(sizes.features, h1, rng),
                LstmLayer::init(h1, h2, rng),
            ],
            w_out: glorot(h2, sizes.outputs, h2, sizes.outputs, rng),
            b_out: Matrix::zeros(1, sizes.outputs),
            look_back: sizes.look_back,
        }
    }

    /// Reassembles parameters from matrices in [`params`](Self::params) order.
    pub fn from_parts(look_back: usize, parts: Vec<Matrix>) -> Result<Self> {
        let [w1, u1, b1, w2, u2, b2, w_out, b_out]: [Matrix; 8] = parts
            .try_into()
            .map_err(|_| Error::Shape("LSTM expects 8 parameter matrices".into()))?;
        let p = Self {
            layers: [
                LstmLayer { w: w1, u: u1, b: b1 },
                LstmLayer { w: w2, u: u2, b: b2 },
            ],
            w_out,
            b_out,
            look_back,
        };
        p.layers[0].validate()?;
        p.layers[1].validate()?;
        if p.layers[1].input_size() != p.layers[0].hidden()
            || p.w_out.rows() != p.layers[1].hidden()
            || p.b_out.shape() != (1, p.w_out.cols())
        {
            return Err(Error::Shape("inconsistent LSTM parameter shapes".into()));
        }
        Ok(p)
    }

    pub fn look_back(&self) -> usize {
        self.look_back
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn sizes(&self) -> ModelSizes {
        ModelSizes {
            features: self.input_size(),
            look_back: self.look_back,
            hidden: [self.layers[0].hidden(), self.layers[1].hidden()],
            outputs: self.w_out.cols(),
        }
    }

    pub fn params(&self) -> Vec<&Matrix> {
        let [l1, l2] = &self.layers;
        vec![&l1.w, &l1.u, &l1.b, &l2.w, &l2.u, &l2.b, &self.w_out, &self.b_out]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let [l1, l2] = &mut self.layers;
        vec![
            &mut l1.w,
            &mut l1.u,
            &mut l1.b,
            &mut l2.w,
            &mut l2.u,
            &mut l2.b,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    pub fn param_names(&self) -> Vec<String> {
        ["l1.w", "l1.u", "l1.b", "l2.w", "l2.u", "l2.b", "w_out", "b_out"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// Forward pass over one window (`look_back × features`).
    pub fn forward_sequence(
        &self,
        x: &Matrix,
        dropout: Option<&mut Dropout>,
        training: bool,
    ) -> Result<(Matrix, LstmCache)> {
        self.forward_batch(x, 1, dropout, training)
    }

    /// Forward pass over `batch` windows stacked time-major
    /// (`(look_back·batch) × features`, see [`batch_input`]).
    pub fn forward_batch(
        &self,
        x: &Matrix,
        batch: usize,
        mut dropout: Option<&mut Dropout>,
        training: bool,
    ) -> Result<(Matrix, LstmCache)> {
        if batch == 0 || x.rows() != self.look_back * batch {
            return Err(Error::Shape(format!(
                "window length {} does not match look-back {}",
                x.rows().checked_div(batch).unwrap_or(0),
                self.look_back
            )));
        }
        if x.cols() != self.input_size() {
            return Err(Error::Shape(format!(
                "LSTM input has {} features, expected {}",
                x.cols(),
                self.input_size()
            )));
        }
        let [l1, l2] = &self.layers;
        let steps = self.look_back;
        let layer1 = layer_forward(l1, x.clone(), batch);
        let h1 = Matrix::new(
            steps * batch,
            l1.hidden(),
            layer1.h.data()[batch * l1.hidden()..].to_vec(),
        )?;
        let mask = match (&mut dropout, training) {
            (Some(d), true) => Some(d.mask(steps * batch, l1.hidden())),
            _ => None,
        };
        let into2 = match &mask {
            Some(m) => h1.hadamard(m)?,
            None => h1,
        };
        let layer2 = layer_forward(l2, into2, batch);
        let h_last = Matrix::new(
            batch,
            l2.hidden(),
            layer2.h.data()[steps * batch * l2.hidden()..].to_vec(),
        )?;
        let mut y = Matrix::zeros(batch, self.w_out.cols());
        gemm(1.0, &h_last, Op::N, &self.w_out, Op::N, 0.0, &mut y);
        y.add_row_broadcast(&self.b_out);
        Ok((
            y,
            LstmCache {
                batch,
                layer1,
                mask,
                layer2,
                h_last,
            },
        ))
    }

    pub fn predict_batch(&self, x: &Matrix, batch: usize) -> Result<Matrix> {
        self.forward_batch(x, batch, None, false).map(|(y, _)| y)
    }

    /// Backpropagation through time for every parameter.
    pub fn backward(&self, cache: &LstmCache, grad_out: &Matrix) -> Result<Gradients> {
        self.backward_impl(cache, grad_out, false).map(|(g, _)| g)
    }

    /// Like [`backward`](Self::backward) but also returns ∂loss/∂x, stacked
    /// like the input.
    pub fn backward_with_inputs(
        &self,
        cache: &LstmCache,
        grad_out: &Matrix,
    ) -> Result<(Gradients, Matrix)> {
        self.backward_impl(cache, grad_out, true)
            .map(|(g, dx)| (g, dx.expect("input gradient requested")))
    }

    fn backward_impl(
        &self,
        cache: &LstmCache,
        grad_out: &Matrix,
        want_inputs: bool,
    ) -> Result<(Gradients, Option<Matrix>)> {
        let batch = cache.batch;
        let [l1, l2] = &self.layers;
        let consistent = grad_out.shape() == (batch, self.w_out.cols())
            && cache.layer1.gates.rows() == self.look_back * batch
            && cache.layer1.gates.cols() == 4 * l1.hidden()
            && cache.layer2.gates.cols() == 4 * l2.hidden();
        if !consistent {
            return Err(Error::Shape(format!(
                "LSTM grad_out {:?} does not match cache (batch {batch}, {} steps)",
                grad_out.shape(),
                cache.layer1.gates.rows() / batch.max(1)
            )));
        }
        let steps = self.look_back;
        let mut grads = Gradients::zeros_like(&self.params());
        let (g1, rest) = grads.0.split_at_mut(3);
        let (g2, head) = rest.split_at_mut(3);

        gemm(1.0, &cache.h_last, Op::T, grad_out, Op::N, 0.0, &mut head[0]);
        head[1] = grad_out.sum_rows();

        let mut dh2 = Matrix::zeros(steps * batch, l2.hidden());
        let last = (steps - 1) * batch * l2.hidden();
        gemm_view(
            1.0,
            grad_out.view(),
            Op::N,
            self.w_out.view(),
            Op::T,
            0.0,
            &mut dh2.data_mut()[last..],
            batch,
            l2.hidden(),
        );
        let mut dh1 = layer_backward(l2, &cache.layer2, batch, &dh2, g2, true).expect("requested");
        if let Some(m) = &cache.mask {
            dh1 = dh1.hadamard(m)?;
        }
        let dx = layer_backward(l1, &cache.layer1, batch, &dh1, g1, want_inputs);
        Ok((grads, dx))
    }
}

/// Stacks flattened time-major windows into `(look_back·batch) × features`,
/// rows `t·batch .. (t+1)·batch` holding time step `t`.
pub fn batch_input(windows: &[&[f64]], look_back: usize, features: usize) -> Result<Matrix> {
    for w in windows {
        if w.len() != look_back * features {
            return Err(Error::Shape(format!(
                "window has {} values, expected {look_back}x{features}",
                w.len()
            )));
        }
    }
    let mut data = Vec::with_capacity(windows.len() * look_back * features);
    for t in 0..look_back {
        for w in windows {
            data.extend_from_slice(&w[t * features..(t + 1) * features]);
        }
    }
    Matrix::new(look_back * windows.len(), features, data)
}
