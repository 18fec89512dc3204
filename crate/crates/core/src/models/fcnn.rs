//! Two-hidden-layer fully connected regressor with ReLU activations.

use rand::Rng;

use super::{glorot, Dropout, Gradients, ModelSizes};
use crate::error::{Error, Result};
use crate::numkernel::{gemm, Matrix, Op};

/// Weights are stored `in × out` so a batch propagates as `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnnParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub w_out: Matrix,
    pub b_out: Matrix,
    look_back: usize,
    features: usize,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct FcnnCache {
    x: Matrix,
    z1: Matrix,
    h1: Matrix,
    mask1: Option<Matrix>,
    z2: Matrix,
    h2: Matrix,
    mask2: Option<Matrix>,
}

impl FcnnParams {
    pub(crate) fn init(sizes: ModelSizes, rng: &mut impl Rng) -> Self {
        let input = sizes.features * sizes.look_back;
        let [h1, h2] = sizes.hidden;
        Self {
            w1: glorot(input, h1, input, h1, rng),
            b1: Matrix::zeros(1, h1),
            w2: glorot(h1, h2, h1, h2, rng),
            b2: Matrix::zeros(1, h2),
            w_out: glorot(h2, sizes.outputs, h2, sizes.outputs, rng),
            b_out: Matrix::zeros(1, sizes.outputs),
            look_back: sizes.look_back,
            features: sizes.features,
        }
    }

    /// Reassembles parameters from matrices in [`params`](Self::params) order.
    pub fn from_parts(look_back: usize, features: usize, parts: Vec<Matrix>) -> Result<Self> {
        let [w1, b1, w2, b2, w_out, b_out]: [Matrix; 6] = parts
            .try_into()
            .map_err(|_| Error::Shape("FCNN expects 6 parameter matrices".into()))?;
        let p = Self {
            w1,
            b1,
            w2,
            b2,
            w_out,
            b_out,
            look_back,
            features,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let (h1, h2, out) = (self.w1.cols(), self.w2.cols(), self.w_out.cols());
        let ok = self.w1.rows() == self.input_size()
            && self.b1.shape() == (1, h1)
            && self.w2.rows() == h1
            && self.b2.shape() == (1, h2)
            && self.w_out.rows() == h2
            && self.b_out.shape() == (1, out);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("inconsistent FCNN parameter shapes".into()))
        }
    }

    pub fn input_size(&self) -> usize {
        self.look_back * self.features
    }

    pub fn sizes(&self) -> ModelSizes {
        ModelSizes {
            features: self.features,
            look_back: self.look_back,
            hidden: [self.w1.cols(), self.w2.cols()],
            outputs: self.w_out.cols(),
        }
    }

    pub fn params(&self) -> Vec<&Matrix> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2, &self.w_out, &self.b_out]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    pub fn param_names(&self) -> Vec<String> {
        ["w1", "b1", "w2", "b2", "w_out", "b_out"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// Forward pass over `x` (`batch × input_size`).
    ///
    /// Dropout masks are drawn only when `training` is set and a sampler is
    /// supplied.
    pub fn forward(
        &self,
        x: &Matrix,
        mut dropout: Option<&mut Dropout>,
        training: bool,
    ) -> Result<(Matrix, FcnnCache)> {
        if x.cols() != self.input_size() {
            return Err(Error::Shape(format!(
                "FCNN input has {} columns, expected {}",
                x.cols(),
                self.input_size()
            )));
        }
        let batch = x.rows();
        let z1 = affine(x, &self.w1, &self.b1);
        let mut h1 = relu(&z1);
        let mask1 = match (&mut dropout, training) {
            (Some(d), true) => Some(d.mask(batch, h1.cols())),
            _ => None,
        };
        if let Some(m) = &mask1 {
            h1 = h1.hadamard(m)?;
        }
        let z2 = affine(&h1, &self.w2, &self.b2);
        let mut h2 = relu(&z2);
        let mask2 = match (&mut dropout, training) {
            (Some(d), true) => Some(d.mask(batch, h2.cols())),
            _ => None,
        };
        if let Some(m) = &mask2 {
            h2 = h2.hadamard(m)?;
        }
        let y = affine(&h2, &self.w_out, &self.b_out);
        Ok((
            y,
            FcnnCache {
                x: x.clone(),
                z1,
                h1,
                mask1,
                z2,
                h2,
                mask2,
            },
        ))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x, None, false).map(|(y, _)| y)
    }

    /// Backpropagates `grad_out` (∂loss/∂prediction) into every parameter.
    pub fn backward(&self, cache: &FcnnCache, grad_out: &Matrix) -> Result<Gradients> {
        if grad_out.shape() != (cache.x.rows(), self.w_out.cols()) {
            return Err(Error::Shape(format!(
                "FCNN grad_out is {}x{}, expected {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                cache.x.rows(),
                self.w_out.cols()
            )));
        }
        let mut d_w_out = Matrix::zeros(self.w_out.rows(), self.w_out.cols());
        gemm(1.0, &cache.h2, Op::T, grad_out, Op::N, 0.0, &mut d_w_out);
        let d_b_out = grad_out.sum_rows();

        let mut dz2 = Matrix::zeros(cache.h2.rows(), cache.h2.cols());
        gemm(1.0, grad_out, Op::N, &self.w_out, Op::T, 0.0, &mut dz2);
        relu_backward(&mut dz2, &cache.z2, cache.mask2.as_ref());

        let mut d_w2 = Matrix::zeros(self.w2.rows(), self.w2.cols());
        gemm(1.0, &cache.h1, Op::T, &dz2, Op::N, 0.0, &mut d_w2);
        let d_b2 = dz2.sum_rows();

        let mut dz1 = Matrix::zeros(cache.h1.rows(), cache.h1.cols());
        gemm(1.0, &dz2, Op::N, &self.w2, Op::T, 0.0, &mut dz1);
        relu_backward(&mut dz1, &cache.z1, cache.mask1.as_ref());

        let mut d_w1 = Matrix::zeros(self.w1.rows(), self.w1.cols());
        gemm(1.0, &cache.x, Op::T, &dz1, Op::N, 0.0, &mut d_w1);
        let d_b1 = dz1.sum_rows();

        Ok(Gradients(vec![d_w1, d_b1, d_w2, d_b2, d_w_out, d_b_out]))
    }
}

fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    let mut z = Matrix::zeros(x.rows(), w.cols());
    gemm(1.0, x, Op::N, w, Op::N, 0.0, &mut z);
    z.add_row_broadcast(b);
    z
}

fn relu(z: &Matrix) -> Matrix {
    z.map_with(|v| v.max(0.0))
}

/// Turns ∂loss/∂h into ∂loss/∂z in place, through the mask then the ReLU.
fn relu_backward(dh: &mut Matrix, z: &Matrix, mask: Option<&Matrix>) {
    let d = dh.data_mut();
    for (idx, v) in d.iter_mut().enumerate() {
        if z.data()[idx] <= 0.0 {
            *v = 0.0;
        } else if let Some(m) = mask {
            *v *= m.data()[idx];
        }
    }
}

/// Stacks flattened windows into a `batch × input_size` matrix.
pub fn batch_input(windows: &[&[f64]], input_size: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(windows.len() * input_size);
    for w in windows {
        if w.len() != input_size {
            return Err(Error::Shape(format!(
                "window has {} values, expected {input_size}",
                w.len()
            )));
        }
        data.extend_from_slice(w);
    }
    Matrix::new(windows.len(), input_size, data)
}
