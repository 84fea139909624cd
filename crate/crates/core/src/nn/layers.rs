//! Layer primitives. Activations are channels-last: a `[H, W, C]` tensor
//! stores `C` contiguous channel values per pixel, so a filter spanning the
//! full input width sees each output row's receptive field as one contiguous
//! run of memory and the patch matrix is a strided view with no copy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{gemm, Real, View};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor values".into()));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, values: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dimensions of one valid, stride-1 convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub filters: usize,
    pub f_h: usize,
    pub f_w: usize,
}

impl ConvShape {
    pub fn validate(&self) -> Result<()> {
        if self.f_h == 0 || self.f_w == 0 || self.in_c == 0 || self.filters == 0 {
            return Err(Error::ShapeMismatch(format!("degenerate convolution {self:?}")));
        }
        if self.f_h > self.in_h || self.f_w > self.in_w {
            return Err(Error::ShapeMismatch(format!(
                "filter {}x{} exceeds input {}x{}",
                self.f_h, self.f_w, self.in_h, self.in_w
            )));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        self.in_h - self.f_h + 1
    }

    pub fn out_w(&self) -> usize {
        self.in_w - self.f_w + 1
    }

    /// Length of one flattened receptive field.
    pub fn patch(&self) -> usize {
        self.f_h * self.f_w * self.in_c
    }

    pub fn input_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    pub fn output_len(&self) -> usize {
        self.out_h() * self.out_w() * self.filters
    }

    pub fn weight_len(&self) -> usize {
        self.filters * self.patch()
    }

    fn full_width(&self) -> bool {
        self.f_w == self.in_w
    }

    /// Patch matrix `(out_h * out_w) x patch`, borrowed when the filter
    /// spans the full width and gathered into `scratch` otherwise.
    fn patches<'a, T: Real>(&self, x: &'a [T], scratch: &'a mut Vec<T>) -> View<'a, T> {
        let rows = self.out_h() * self.out_w();
        if self.full_width() {
            return View::new(x, rows, self.patch(), self.in_w * self.in_c, 1);
        }
        let run = self.f_w * self.in_c;
        scratch.clear();
        scratch.reserve(rows * self.patch());
        for oh in 0..self.out_h() {
            for ow in 0..self.out_w() {
                for dh in 0..self.f_h {
                    let start = ((oh + dh) * self.in_w + ow) * self.in_c;
                    scratch.extend_from_slice(&x[start..start + run]);
                }
            }
        }
        View::rows(scratch, rows, self.patch())
    }
}

/// Forward convolution into `out` (`[out_h, out_w, filters]`).
pub(crate) fn conv_forward<T: Real>(
    s: &ConvShape,
    x: &[T],
    weights: &[T],
    bias: &[T],
    out: &mut [T],
    scratch: &mut Vec<T>,
) {
    debug_assert_eq!(x.len(), s.input_len());
    for row in out.chunks_mut(s.filters) {
        row.copy_from_slice(bias);
    }
    let a = s.patches(x, scratch);
    gemm(T::one(), a, View::transposed(weights, s.patch(), s.filters), T::one(), out, s.filters);
}

/// Accumulates filter and bias gradients and, when `dx` is given,
/// overwrites it with the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Real>(
    s: &ConvShape,
    x: &[T],
    weights: &[T],
    dout: &[T],
    dweights: &mut [T],
    dbias: &mut [T],
    dx: Option<&mut [T]>,
    scratch: &mut Vec<T>,
) {
    let rows = s.out_h() * s.out_w();
    let p = s.patch();
    {
        let a = s.patches(x, scratch);
        gemm(T::one(), View::transposed(dout, s.filters, rows), a, T::one(), dweights, p);
    }
    for row in dout.chunks(s.filters) {
        for (b, &d) in dbias.iter_mut().zip(row) {
            *b = *b + d;
        }
    }
    let Some(dx) = dx else { return };
    dx.iter_mut().for_each(|v| *v = T::zero());
    let dy = View::rows(dout, rows, s.filters);
    if s.full_width() {
        // One product per filter row keeps the overlapping windows out of a
        // single output view.
        let k = s.in_w * s.in_c;
        for dh in 0..s.f_h {
            let w = View::new(&weights[dh * k..], s.filters, k, p, 1);
            gemm(T::one(), dy, w, T::one(), &mut dx[dh * k..], k);
        }
        return;
    }
    scratch.clear();
    scratch.resize(rows * p, T::zero());
    gemm(T::one(), dy, View::rows(weights, s.filters, p), T::zero(), scratch, p);
    let run = s.f_w * s.in_c;
    for oh in 0..s.out_h() {
        for ow in 0..s.out_w() {
            let col = &scratch[(oh * s.out_w() + ow) * p..][..p];
            for dh in 0..s.f_h {
                let start = ((oh + dh) * s.in_w + ow) * s.in_c;
                for (d, &g) in dx[start..start + run].iter_mut().zip(&col[dh * run..(dh + 1) * run]) {
                    *d = *d + g;
                }
            }
        }
    }
}

fn conv_shape_of<T: Real>(input: &Tensor<T>, filters: &Tensor<T>, biases: &Tensor<T>) -> Result<ConvShape> {
    let [in_h, in_w, in_c] = input.shape[..] else {
        return Err(Error::ShapeMismatch(format!("input must be [H, W, C], got {:?}", input.shape)));
    };
    let [f, f_h, f_w, f_c] = filters.shape[..] else {
        return Err(Error::ShapeMismatch(format!("filters must be [F, fh, fw, C], got {:?}", filters.shape)));
    };
    if f_c != in_c {
        return Err(Error::ShapeMismatch(format!("filter depth {f_c} != input channels {in_c}")));
    }
    if biases.shape != [f] {
        return Err(Error::ShapeMismatch(format!("biases must be [{f}], got {:?}", biases.shape)));
    }
    let s = ConvShape { in_h, in_w, in_c, filters: f, f_h, f_w };
    s.validate()?;
    Ok(s)
}

/// Valid stride-1 cross-correlation. `input` is `[H, W, C]`, `filters`
/// `[F, fh, fw, C]`; the result is `[H - fh + 1, W - fw + 1, F]`.
pub fn conv_valid<T: Real>(input: &Tensor<T>, filters: &Tensor<T>, biases: &Tensor<T>) -> Result<Tensor<T>> {
    let s = conv_shape_of(input, filters, biases)?;
    let mut out = vec![T::zero(); s.output_len()];
    conv_forward(&s, &input.values, &filters.values, &biases.values, &mut out, &mut Vec::new());
    Ok(Tensor { shape: vec![s.out_h(), s.out_w(), s.filters], values: out })
}

/// Gradients of a scalar loss with respect to a convolution's operands.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub filters: Tensor<T>,
    pub biases: Tensor<T>,
}

/// Backward pass of [`conv_valid`] given the output gradient.
pub fn conv_valid_grad<T: Real>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    biases: &Tensor<T>,
    dout: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let s = conv_shape_of(input, filters, biases)?;
    if dout.shape != [s.out_h(), s.out_w(), s.filters] {
        return Err(Error::ShapeMismatch(format!("output gradient has shape {:?}", dout.shape)));
    }
    let mut dw = Tensor::zeros(filters.shape.clone());
    let mut db = Tensor::zeros(biases.shape.clone());
    let mut dx = Tensor::zeros(input.shape.clone());
    conv_backward(
        &s,
        &input.values,
        &filters.values,
        &dout.values,
        &mut dw.values,
        &mut db.values,
        Some(&mut dx.values),
        &mut Vec::new(),
    );
    Ok(ConvGrads { input: dx, filters: dw, biases: db })
}

pub fn relu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v.max(T::zero())).collect()
}

pub(crate) fn relu_in_place<T: Real>(x: &mut [T]) {
    x.iter_mut().for_each(|v| *v = v.max(T::zero()));
}

/// Gradient through ReLU given its output `y`: zero where `y <= 0`.
pub fn relu_grad<T: Real>(y: &[T], dy: &mut [T]) {
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= T::zero() {
            *d = T::zero();
        }
    }
}

/// `y = W x + b` for a batch: `x` is `batch x inputs`, `w` is
/// `outputs x inputs`, `y` is `batch x outputs`.
pub fn fc<T: Real>(x: &[T], w: &[T], b: &[T], batch: usize) -> Result<Vec<T>> {
    let outputs = b.len();
    if outputs == 0 || w.len() % outputs != 0 {
        return Err(Error::ShapeMismatch("weight length not a multiple of outputs".into()));
    }
    let inputs = w.len() / outputs;
    if x.len() != batch * inputs {
        return Err(Error::ShapeMismatch(format!("input has {} values, expected {batch} x {inputs}", x.len())));
    }
    let mut y = vec![T::zero(); batch * outputs];
    fc_forward(x, w, b, batch, inputs, &mut y);
    Ok(y)
}

pub(crate) fn fc_forward<T: Real>(x: &[T], w: &[T], b: &[T], batch: usize, inputs: usize, y: &mut [T]) {
    let outputs = b.len();
    for row in y.chunks_mut(outputs) {
        row.copy_from_slice(b);
    }
    gemm(T::one(), View::rows(x, batch, inputs), View::transposed(w, inputs, outputs), T::one(), y, outputs);
}

/// Accumulates `dw`, `db` and overwrites `dx` (if given) for [`fc`].
#[allow(clippy::too_many_arguments)]
pub fn fc_grad<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    batch: usize,
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let outputs = db.len();
    let inputs = w.len() / outputs;
    gemm(T::one(), View::transposed(dy, outputs, batch), View::rows(x, batch, inputs), T::one(), dw, inputs);
    for row in dy.chunks(outputs) {
        for (b, &d) in db.iter_mut().zip(row) {
            *b = *b + d;
        }
    }
    if let Some(dx) = dx {
        gemm(T::one(), View::rows(dy, batch, outputs), View::rows(w, outputs, inputs), T::zero(), dx, inputs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted-dropout multipliers: each unit is kept with probability
/// `1 - rate` and scaled by `1 / (1 - rate)`.
pub(crate) fn dropout_mask<T: Real, R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

pub fn dropout<T: Real>(x: &[T], rate: f64, mode: DropoutMode, seed: u64) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
    }
    if mode == DropoutMode::Infer || rate == 0.0 {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask::<T, _>(x.len(), rate, &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(x.iter().zip(&mask).map(|(&v, &m)| v * m).collect())
}
