//! Dense row-major matrices and the finite-difference gradient oracle.
//!
//! `Matrix` is the only numeric container used by the models: parameters,
//! activations, caches and gradients all live in it. Products go through
//! `matrixmultiply::dgemm`, which lets transposed operands be expressed
//! through strides instead of copies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 2-D array of `f64` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Scalar functions that can be mapped over a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Sigmoid,
    Tanh,
    /// Derivative of the sigmoid evaluated at the pre-activation.
    SigmoidDerivative,
    /// Derivative of tanh evaluated at the pre-activation.
    TanhDerivative,
    Relu,
}

impl Elementwise {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Elementwise::Sigmoid => sigmoid(x),
            Elementwise::Tanh => tanh(x),
            Elementwise::SigmoidDerivative => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Elementwise::TanhDerivative => {
                let t = tanh(x);
                1.0 - t * t
            }
            Elementwise::Relu => x.max(0.0),
        }
    }
}

/// Logistic function, branching on the sign so the exponential is always
/// evaluated at a non-positive argument.
#[inline(always)]
pub fn sigmoid(x: f64) -> f64 {
    let e = exp_kernel(-x.abs());
    let s = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    if x.is_nan() {
        x
    } else {
        s
    }
}

/// Hyperbolic tangent through one exponential, with a short series near 0
/// where `1 - exp(-2|x|)` would cancel.
#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();
    let t = exp_kernel(-2.0 * a);
    let far = (1.0 - t) / (1.0 + t);
    let a2 = a * a;
    let near = a
        * (1.0
            + a2 * (-1.0 / 3.0
                + a2 * (2.0 / 15.0
                    + a2 * (-17.0 / 315.0 + a2 * (62.0 / 2835.0 - a2 * (1382.0 / 155_925.0))))));
    let r = if a < 0.05 { near } else { far };
    if x.is_nan() {
        x
    } else {
        r.copysign(x)
    }
}

const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;

/// `exp(x)` for `x` clamped to `[-708, 709]`, accurate to a few ulp.
///
/// Written without branches or libm calls so that slice loops over it
/// vectorize. Every lane performs the same IEEE operations as the scalar
/// path, so vectorized and scalar results are bit-identical.
#[inline(always)]
fn exp_kernel(x: f64) -> f64 {
    let x = x.max(-708.0).min(709.0);
    let k = (x * std::f64::consts::LOG2_E + ROUND_MAGIC) - ROUND_MAGIC;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let scale = f64::from_bits((k + (1023.0 + ROUND_MAGIC)).to_bits() << 52);
    p * scale
}

macro_rules! slice_kernel {
    ($(#[$doc:meta])* $name:ident, $generic:ident, $avx:ident, $f:path) => {
        $(#[$doc])*
        pub fn $name(values: &mut [f64]) {
            #[cfg(target_arch = "x86_64")]
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports AVX2, checked just above.
                unsafe { $avx(values) };
                return;
            }
            $generic(values);
        }

        #[inline(always)]
        fn $generic(values: &mut [f64]) {
            for v in values {
                *v = $f(*v);
            }
        }

        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2")]
        unsafe fn $avx(values: &mut [f64]) {
            $generic(values)
        }
    };
}

slice_kernel!(
    /// In-place [`sigmoid`] over a slice.
    sigmoid_in_place,
    sigmoid_generic,
    sigmoid_avx2,
    sigmoid
);
slice_kernel!(
    /// In-place [`tanh`] over a slice.
    tanh_in_place,
    tanh_generic,
    tanh_avx2,
    tanh
);

/// Operand orientation for [`gemm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input, so this is
    /// meant for literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix product `self × other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape_error("matmul", self, other));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(1.0, self, Op::N, other, Op::N, 0.0, &mut out);
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: Elementwise) -> Matrix {
        self.map_with(|x| f.apply(x))
    }

    pub fn map_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Adds a `1 × cols` row vector to every row.
    pub fn add_row_broadcast(&mut self, row: &Matrix) {
        debug_assert_eq!(row.shape(), (1, self.cols));
        for r in self.data.chunks_exact_mut(self.cols) {
            for (x, b) in r.iter_mut().zip(&row.data) {
                *x += b;
            }
        }
    }

    /// Column sums as a `1 × cols` matrix.
    pub fn sum_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for r in self.data.chunks_exact(self.cols.max(1)) {
            for (o, x) in out.data.iter_mut().zip(r) {
                *o += x;
            }
        }
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(shape_error("hadamard", self, other));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// Copies columns `start..start + width` into a new matrix.
    pub fn columns(&self, start: usize, width: usize) -> Matrix {
        Matrix::from_fn(self.rows, width, |i, j| self.get(i, start + j))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn shape_error(op: &str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape(format!(
        "{op}: incompatible shapes {}x{} and {}x{}",
        a.rows, a.cols, b.rows, b.cols
    ))
}

/// Borrowed row-major block of a matrix.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl Matrix {
    pub fn view(&self) -> View<'_> {
        View {
            rows: self.rows,
            cols: self.cols,
            data: &self.data,
        }
    }

    /// Rows `start..start + count` as a view.
    pub fn row_block(&self, start: usize, count: usize) -> View<'_> {
        View {
            rows: count,
            cols: self.cols,
            data: &self.data[start * self.cols..(start + count) * self.cols],
        }
    }
}

/// `c ← alpha · op(a) · op(b) + beta · c`.
///
/// Shapes are checked with assertions: every caller inside the crate has
/// already validated its operands, so a mismatch here is a bug.
pub fn gemm(alpha: f64, a: &Matrix, op_a: Op, b: &Matrix, op_b: Op, beta: f64, c: &mut Matrix) {
    let (rows, cols) = c.shape();
    gemm_view(alpha, a.view(), op_a, b.view(), op_b, beta, &mut c.data, rows, cols);
}

/// [`gemm`] over borrowed blocks; `c` is a `c_rows × c_cols` row-major slice.
#[allow(clippy::too_many_arguments)]
pub fn gemm_view(
    alpha: f64,
    a: View<'_>,
    op_a: Op,
    b: View<'_>,
    op_b: Op,
    beta: f64,
    c: &mut [f64],
    c_rows: usize,
    c_cols: usize,
) {
    let (m, k, rsa, csa) = match op_a {
        Op::N => (a.rows, a.cols, a.cols as isize, 1),
        Op::T => (a.cols, a.rows, 1, a.cols as isize),
    };
    let (kb, n, rsb, csb) = match op_b {
        Op::N => (b.rows, b.cols, b.cols as isize, 1),
        Op::T => (b.cols, b.rows, 1, b.cols as isize),
    };
    assert_eq!(k, kb, "gemm inner dimension mismatch");
    assert_eq!((c_rows, c_cols), (m, n), "gemm output shape mismatch");
    assert_eq!(a.data.len(), a.rows * a.cols);
    assert_eq!(b.data.len(), b.rows * b.cols);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    // SAFETY: the strides and extents describe exactly the row-major buffers
    // behind `a`, `b` and `c`, whose lengths were asserted above; `c` is a
    // unique borrow and cannot alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Default perturbation for [`finite_difference_grad`].
pub const DEFAULT_FD_EPS: f64 = 1e-5;

/// Central-difference gradient of `loss` with respect to every entry of
/// `params`.
pub fn finite_difference_grad(
    mut loss: impl FnMut(&Matrix) -> f64,
    params: &Matrix,
    eps: f64,
) -> Matrix {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut probe = params.clone();
    let mut grad = Matrix::zeros(params.rows, params.cols);
    for idx in 0..params.len() {
        let orig = probe.data[idx];
        probe.data[idx] = orig + eps;
        let up = loss(&probe);
        probe.data[idx] = orig - eps;
        let down = loss(&probe);
        probe.data[idx] = orig;
        grad.data[idx] = (up - down) / (2.0 * eps);
    }
    grad
}

/// Relative error with denominator `max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
