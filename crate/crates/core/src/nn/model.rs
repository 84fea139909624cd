use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{conv_backward, conv_forward, dropout_mask, fc_forward, fc_grad, relu_grad, relu_in_place, ConvShape, Tensor};
use super::linalg::Real;
use crate::binio::{read_exact_array, read_f64, read_magic, read_u32, read_u64, read_u8, write_f32s};
use crate::dsp::{CepstrogramFeature, NormStats};
use crate::error::{Error, Result};

pub const CNNM_MAGIC: &[u8; 4] = b"CNNM";
pub const CNNM_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub conv_filters: usize,
    /// Filter height of all three convolutions.
    pub kernel_height: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    /// Metres per normalized range unit.
    pub range_scale: f64,
}

impl ModelConfig {
    pub fn new(input_height: usize, input_width: usize) -> Self {
        Self {
            input_height,
            input_width,
            conv_filters: 48,
            kernel_height: 10,
            hidden_units: 200,
            dropout_rate: 0.5,
            range_scale: 500.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min_height = 3 * (self.kernel_height.max(1) - 1) + 1;
        if self.kernel_height == 0 || self.input_height < min_height {
            return Err(Error::InvalidConfig(format!(
                "input height {} too small for three {}-tap convolutions",
                self.input_height, self.kernel_height
            )));
        }
        if self.input_width == 0 || self.conv_filters == 0 || self.hidden_units == 0 {
            return Err(Error::InvalidConfig("widths, filters and hidden units must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        if !(self.range_scale > 0.0 && self.range_scale.is_finite()) {
            return Err(Error::InvalidConfig("range scale must be positive".into()));
        }
        Ok(())
    }

    /// The three convolutions in order. Only the first spans the input width;
    /// its output width is 1, so the later ones see `[h, 1, filters]`.
    pub fn conv_shapes(&self) -> [ConvShape; 3] {
        let f = self.conv_filters;
        let k = self.kernel_height;
        let c1 = ConvShape { in_h: self.input_height, in_w: self.input_width, in_c: 1, filters: f, f_h: k, f_w: self.input_width };
        let c2 = ConvShape { in_h: c1.out_h(), in_w: 1, in_c: f, filters: f, f_h: k, f_w: 1 };
        let c3 = ConvShape { in_h: c2.out_h(), in_w: 1, in_c: f, filters: f, f_h: k, f_w: 1 };
        [c1, c2, c3]
    }

    /// Length of the flattened third convolution output.
    pub fn flat_len(&self) -> usize {
        self.conv_shapes()[2].output_len()
    }

    pub fn input_len(&self) -> usize {
        self.input_height * self.input_width
    }

    /// Parameter tensor shapes in checkpoint order.
    pub fn param_shapes(&self) -> [Vec<usize>; 12] {
        let [c1, c2, c3] = self.conv_shapes();
        let conv = |s: &ConvShape| vec![s.filters, s.f_h, s.f_w, s.in_c];
        let h = self.hidden_units;
        [
            conv(&c1),
            vec![c1.filters],
            conv(&c2),
            vec![c2.filters],
            conv(&c3),
            vec![c3.filters],
            vec![h, self.flat_len()],
            vec![h],
            vec![1, h],
            vec![1],
            vec![2, h],
            vec![2],
        ]
    }
}

pub const PARAM_NAMES: [&str; 12] = [
    "conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b", "fc_w", "fc_b", "range_w", "range_b", "detect_w",
    "detect_b",
];

pub(crate) const CONV1_W: usize = 0;
pub(crate) const FC_W: usize = 6;
pub(crate) const FC_B: usize = 7;
pub(crate) const RANGE_W: usize = 8;
pub(crate) const RANGE_B: usize = 9;
pub(crate) const DETECT_W: usize = 10;
pub(crate) const DETECT_B: usize = 11;

/// All parameters, in the order of [`PARAM_NAMES`]. Gradients and
/// momentum buffers use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T> {
    pub config: ModelConfig,
    pub params: Vec<Tensor<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub presence_probability: f64,
    /// Metres.
    pub range_estimate: f64,
}

/// One training target. `range` is in normalized units and must be present
/// exactly when `present` is true.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label {
    pub present: bool,
    pub range: Option<f64>,
}

impl Label {
    pub fn validate(&self) -> Result<()> {
        match (self.present, self.range) {
            (true, None) => Err(Error::InvalidArgument("present label without range".into())),
            (false, Some(_)) => Err(Error::InvalidArgument("absent label with a range".into())),
            (_, Some(r)) if !r.is_finite() => Err(Error::NonFinite("range label".into())),
            _ => Ok(()),
        }
    }
}

/// Joint loss of one example and its gradients with respect to the range
/// output and the two detection logits. The range gradient is exactly zero
/// for absent examples.
pub fn joint_loss(range_out: f64, logits: [f64; 2], label: &Label, alpha: f64) -> Result<(f64, f64, [f64; 2])> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} not in [0, 1]")));
    }
    label.validate()?;
    let hi = logits[0].max(logits[1]);
    let lse = hi + ((logits[0] - hi).exp() + (logits[1] - hi).exp()).ln();
    let class = usize::from(label.present);
    let e_d = lse - logits[class];
    let p1 = (logits[1] - lse).exp();
    let probs = [1.0 - p1, p1];
    let mut d_logits = [0.0; 2];
    for k in 0..2 {
        let target = if k == class { 1.0 } else { 0.0 };
        d_logits[k] = alpha * (probs[k] - target);
    }
    let (e_r, d_range) = match label.range {
        Some(y) => {
            let diff = range_out - y;
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            (diff.abs(), (1.0 - alpha) * sign)
        }
        None => (0.0, 0.0),
    };
    Ok((alpha * e_d + (1.0 - alpha) * e_r, d_range, d_logits))
}

/// Per-example intermediate activations kept for the backward pass.
struct Activations<T> {
    a1: Vec<T>,
    a2: Vec<T>,
}

/// Reusable buffers for batched forward/backward passes.
pub(crate) struct Workspace<T> {
    acts: Vec<Activations<T>>,
    flat: Vec<T>,
    hidden: Vec<T>,
    mask: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Self { acts: Vec::new(), flat: Vec::new(), hidden: Vec::new(), mask: Vec::new(), scratch: Vec::new() }
    }
}

/// Outputs of a batched forward pass.
pub(crate) struct BatchOutput {
    pub range: Vec<f64>,
    pub logits: Vec<[f64; 2]>,
}

impl<T: Real> NetworkModel<T> {
    /// Uniform initialization with half-width `sqrt(6 / fan_in)`; biases zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .param_shapes()
            .into_iter()
            .map(|shape| {
                if shape.len() == 1 {
                    return Tensor::zeros(shape);
                }
                let fan_in: usize = shape[1..].iter().product();
                let limit = (6.0 / fan_in as f64).sqrt();
                let len = shape.iter().product();
                let values = (0..len).map(|_| T::from_f64(rng.random_range(-limit..limit))).collect();
                Tensor { shape, values }
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, params: config.param_shapes().into_iter().map(Tensor::zeros).collect() })
    }

    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| Tensor::zeros(p.shape.clone())).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let shapes = self.config.param_shapes();
        if self.params.len() != shapes.len() {
            return Err(Error::ShapeMismatch(format!("model has {} parameter tensors", self.params.len())));
        }
        for ((p, s), name) in self.params.iter().zip(&shapes).zip(PARAM_NAMES) {
            if &p.shape != s || p.values.len() != s.iter().product::<usize>() {
                return Err(Error::ShapeMismatch(format!("{name} has shape {:?}, expected {s:?}", p.shape)));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(())
    }

    fn convs_forward(&self, x: &[T], ws: &mut Workspace<T>, slot: usize) {
        let [c1, c2, c3] = self.config.conv_shapes();
        let p = &self.params;
        if ws.acts.len() <= slot {
            ws.acts.push(Activations { a1: vec![T::zero(); c1.output_len()], a2: vec![T::zero(); c2.output_len()] });
        }
        let act = &mut ws.acts[slot];
        conv_forward(&c1, x, &p[0].values, &p[1].values, &mut act.a1, &mut ws.scratch);
        relu_in_place(&mut act.a1);
        conv_forward(&c2, &act.a1, &p[2].values, &p[3].values, &mut act.a2, &mut ws.scratch);
        relu_in_place(&mut act.a2);
        let flat = &mut ws.flat[slot * c3.output_len()..(slot + 1) * c3.output_len()];
        conv_forward(&c3, &act.a2, &p[4].values, &p[5].values, flat, &mut ws.scratch);
        relu_in_place(flat);
    }

    /// Forward pass over a batch of flattened `m x n` inputs. With a dropout
    /// RNG, the hidden layer is masked (train mode); otherwise it is the
    /// identity (infer mode).
    pub(crate) fn forward_batch(
        &self,
        inputs: &[&[T]],
        ws: &mut Workspace<T>,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> BatchOutput {
        let batch = inputs.len();
        let flat_len = self.config.flat_len();
        let h = self.config.hidden_units;
        ws.flat.resize(batch * flat_len, T::zero());
        for (i, x) in inputs.iter().enumerate() {
            assert_eq!(x.len(), self.config.input_len(), "input length");
            self.convs_forward(x, ws, i);
        }
        let p = &self.params;
        ws.hidden.resize(batch * h, T::zero());
        fc_forward(&ws.flat, &p[FC_W].values, &p[FC_B].values, batch, flat_len, &mut ws.hidden);
        relu_in_place(&mut ws.hidden);
        ws.mask = match dropout_rng {
            Some(rng) if self.config.dropout_rate > 0.0 => dropout_mask(batch * h, self.config.dropout_rate, rng),
            _ => vec![T::one(); batch * h],
        };
        for (v, &m) in ws.hidden.iter_mut().zip(&ws.mask) {
            *v = *v * m;
        }
        let mut out = BatchOutput { range: Vec::with_capacity(batch), logits: Vec::with_capacity(batch) };
        let dot = |w: &[T], x: &[T]| -> f64 { w.iter().zip(x).map(|(&a, &b)| a.as_f64() * b.as_f64()).sum() };
        for hd in ws.hidden.chunks(h) {
            out.range.push(dot(&p[RANGE_W].values, hd) + p[RANGE_B].values[0].as_f64());
            let wd = &p[DETECT_W].values;
            let bd = &p[DETECT_B].values;
            out.logits.push([dot(&wd[..h], hd) + bd[0].as_f64(), dot(&wd[h..], hd) + bd[1].as_f64()]);
        }
        out
    }

    /// Backward pass for the batch last run through `forward_batch`, given
    /// per-example output gradients. Gradients are accumulated into `grads`.
    /// Range-head gradients only receive contributions from examples whose
    /// `d_range` is flagged live, so a batch with none leaves them untouched.
    pub(crate) fn backward_batch(
        &self,
        inputs: &[&[T]],
        ws: &mut Workspace<T>,
        d_range: &[Option<f64>],
        d_logits: &[[f64; 2]],
        grads: &mut [Tensor<T>],
    ) {
        let batch = inputs.len();
        let h = self.config.hidden_units;
        let flat_len = self.config.flat_len();
        let p = &self.params;
        let mut dhidden = vec![T::zero(); batch * h];
        for i in 0..batch {
            let hd = &ws.hidden[i * h..(i + 1) * h];
            let dh = &mut dhidden[i * h..(i + 1) * h];
            if let Some(dr) = d_range[i] {
                let dr = T::from_f64(dr);
                for ((g, &x), (d, &w)) in grads[RANGE_W].values.iter_mut().zip(hd).zip(dh.iter_mut().zip(&p[RANGE_W].values)) {
                    *g = *g + dr * x;
                    *d = *d + dr * w;
                }
                grads[RANGE_B].values[0] = grads[RANGE_B].values[0] + dr;
            }
            for k in 0..2 {
                let dz = T::from_f64(d_logits[i][k]);
                let wrow = &p[DETECT_W].values[k * h..(k + 1) * h];
                for ((g, &x), (d, &w)) in grads[DETECT_W].values[k * h..(k + 1) * h].iter_mut().zip(hd).zip(dh.iter_mut().zip(wrow)) {
                    *g = *g + dz * x;
                    *d = *d + dz * w;
                }
                grads[DETECT_B].values[k] = grads[DETECT_B].values[k] + dz;
            }
        }
        // Dropout then ReLU; `hidden` holds the masked output, so a zero
        // there covers both.
        for ((d, &m), &y) in dhidden.iter_mut().zip(&ws.mask).zip(&ws.hidden) {
            *d = if y > T::zero() { *d * m } else { T::zero() };
        }
        let mut dflat = vec![T::zero(); batch * flat_len];
        {
            let (head, tail) = grads.split_at_mut(FC_B);
            fc_grad(&ws.flat, &p[FC_W].values, &dhidden, batch, &mut head[FC_W].values, &mut tail[0].values, Some(&mut dflat));
        }
        let [c1, c2, c3] = self.config.conv_shapes();
        let mut da2 = vec![T::zero(); c2.output_len()];
        let mut da1 = vec![T::zero(); c1.output_len()];
        for (i, x) in inputs.iter().enumerate() {
            let act = &ws.acts[i];
            let flat = &ws.flat[i * flat_len..(i + 1) * flat_len];
            let df = &mut dflat[i * flat_len..(i + 1) * flat_len];
            relu_grad(flat, df);
            let (g01, g2) = grads.split_at_mut(4);
            let (w3, b3) = g2.split_at_mut(1);
            conv_backward(&c3, &act.a2, &p[4].values, df, &mut w3[0].values, &mut b3[0].values, Some(&mut da2), &mut ws.scratch);
            relu_grad(&act.a2, &mut da2);
            let (g0, g1) = g01.split_at_mut(2);
            let (w2, b2) = g1.split_at_mut(1);
            conv_backward(&c2, &act.a1, &p[2].values, &da2, &mut w2[0].values, &mut b2[0].values, Some(&mut da1), &mut ws.scratch);
            relu_grad(&act.a1, &mut da1);
            let (w1, b1) = g0.split_at_mut(1);
            conv_backward(&c1, x, &p[CONV1_W].values, &da1, &mut w1[0].values, &mut b1[0].values, None, &mut ws.scratch);
        }
    }

    /// Mean joint loss over a batch and its parameter gradients.
    pub fn batch_loss_and_grads(
        &self,
        inputs: &[&[T]],
        labels: &[Label],
        alpha: f64,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Vec<Tensor<T>>)> {
        let mut ws = Workspace::new();
        let mut grads = self.zero_grads();
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let loss = self.accumulate_batch(inputs, labels, alpha, &mut ws, rng.as_mut(), &mut grads)?;
        Ok((loss, grads))
    }

    pub(crate) fn accumulate_batch(
        &self,
        inputs: &[&[T]],
        labels: &[Label],
        alpha: f64,
        ws: &mut Workspace<T>,
        dropout_rng: Option<&mut ChaCha8Rng>,
        grads: &mut [Tensor<T>],
    ) -> Result<f64> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} inputs, {} labels", inputs.len(), labels.len())));
        }
        for x in inputs {
            if x.len() != self.config.input_len() {
                return Err(Error::ShapeMismatch(format!(
                    "input has {} values, model expects {}",
                    x.len(),
                    self.config.input_len()
                )));
            }
        }
        let out = self.forward_batch(inputs, ws, dropout_rng);
        let scale = 1.0 / inputs.len() as f64;
        let mut total = 0.0;
        let mut d_range = Vec::with_capacity(inputs.len());
        let mut d_logits = Vec::with_capacity(inputs.len());
        for ((&r, &z), label) in out.range.iter().zip(&out.logits).zip(labels) {
            let (loss, dr, dz) = joint_loss(r, z, label, alpha)?;
            total += loss;
            d_range.push(label.present.then_some(dr * scale));
            d_logits.push([dz[0] * scale, dz[1] * scale]);
        }
        let loss = total * scale;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss {loss}")));
        }
        self.backward_batch(inputs, ws, &d_range, &d_logits, grads);
        Ok(loss)
    }

    /// Normalized range outputs and detection logits in infer mode.
    pub(crate) fn raw_outputs(&self, inputs: &[&[T]]) -> Result<BatchOutput> {
        for x in inputs {
            if x.len() != self.config.input_len() {
                return Err(Error::ShapeMismatch(format!(
                    "input has {} values, model expects {}",
                    x.len(),
                    self.config.input_len()
                )));
            }
        }
        let mut ws = Workspace::new();
        let mut all = BatchOutput { range: Vec::with_capacity(inputs.len()), logits: Vec::with_capacity(inputs.len()) };
        for chunk in inputs.chunks(64) {
            let out = self.forward_batch(chunk, &mut ws, None);
            all.range.extend(out.range);
            all.logits.extend(out.logits);
        }
        Ok(all)
    }

    /// Inference over a batch of flattened inputs.
    pub fn predict_batch(&self, inputs: &[&[T]]) -> Result<Vec<Prediction>> {
        let out = self.raw_outputs(inputs)?;
        Ok(out
            .range
            .into_iter()
            .zip(out.logits)
            .map(|(r, z)| Prediction {
                presence_probability: 1.0 / (1.0 + (z[0] - z[1]).exp()),
                range_estimate: r * self.config.range_scale,
            })
            .collect())
    }

    pub fn predict(&self, feature: &CepstrogramFeature) -> Result<Prediction> {
        if feature.m != self.config.input_height || feature.n != self.config.input_width {
            return Err(Error::ShapeMismatch(format!(
                "feature is {}x{}, model expects {}x{}",
                feature.m, feature.n, self.config.input_height, self.config.input_width
            )));
        }
        let x: Vec<T> = feature.values.iter().map(|&v| T::from_f64(v)).collect();
        Ok(self.predict_batch(&[&x])?[0])
    }

    pub fn cast<U: Real>(&self) -> NetworkModel<U> {
        NetworkModel {
            config: self.config,
            params: self
                .params
                .iter()
                .map(|t| Tensor { shape: t.shape.clone(), values: t.values.iter().map(|v| U::from_f64(v.as_f64())).collect() })
                .collect(),
        }
    }
}

/// A trained model together with the feature normalization it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: NetworkModel<f32>,
    pub norm: Option<NormStats>,
}

/// Checkpoint layout (little-endian): magic `b"CNNM"`, version `u32`, then
/// `input_height`, `input_width`, `conv_filters`, `kernel_height`,
/// `hidden_units` as `u32`, `dropout_rate` and `range_scale` as `f64`, then
/// the parameter tensors as `f32` in [`PARAM_NAMES`] order. A trailing
/// flag byte is followed, when 1, by the normalization row count `u64` and
/// the row means and standard deviations as `f64`.
impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.model.config;
        w.write_all(CNNM_MAGIC)?;
        w.write_all(&CNNM_VERSION.to_le_bytes())?;
        for v in [c.input_height, c.input_width, c.conv_filters, c.kernel_height, c.hidden_units] {
            let v = u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("dimension {v} exceeds u32")))?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&c.dropout_rate.to_le_bytes())?;
        w.write_all(&c.range_scale.to_le_bytes())?;
        for p in &self.model.params {
            write_f32s(&mut w, p.values.iter().copied())?;
        }
        match &self.norm {
            None => w.write_all(&[0])?,
            Some(s) => {
                w.write_all(&[1])?;
                w.write_all(&(s.rows() as u64).to_le_bytes())?;
                for v in s.mean.iter().chain(&s.std) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        read_magic(&mut r, CNNM_MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != CNNM_VERSION {
            return Err(Error::Format(format!("unsupported CNNM version {version}")));
        }
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = read_u32(&mut r)? as usize;
        }
        let config = ModelConfig {
            input_height: dims[0],
            input_width: dims[1],
            conv_filters: dims[2],
            kernel_height: dims[3],
            hidden_units: dims[4],
            dropout_rate: read_f64(&mut r)?,
            range_scale: read_f64(&mut r)?,
        };
        config.validate().map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let params = config
            .param_shapes()
            .into_iter()
            .map(|shape| {
                let values = read_exact_array(&mut r, shape.iter().product())?;
                Ok(Tensor { shape, values })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = NetworkModel { config, params };
        model.validate().map_err(|e| Error::Format(format!("checkpoint parameters: {e}")))?;
        let norm = match read_u8(&mut r)? {
            0 => None,
            1 => {
                let rows = read_u64(&mut r)? as usize;
                if rows != config.input_height {
                    return Err(Error::Format(format!("normalization has {rows} rows, model expects {}", config.input_height)));
                }
                let mut vals = Vec::with_capacity(2 * rows);
                for _ in 0..2 * rows {
                    vals.push(read_f64(&mut r)?);
                }
                let std = vals.split_off(rows);
                Some(NormStats { mean: vals, std })
            }
            f => return Err(Error::Format(format!("bad normalization flag {f}"))),
        };
        Ok(Self { model, norm })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Normalizes (when stats are present) and predicts.
    pub fn predict(&self, feature: &CepstrogramFeature) -> Result<Prediction> {
        match &self.norm {
            Some(stats) => self.model.predict(&crate::dsp::apply_normalization(feature, stats)?),
            None => self.model.predict(feature),
        }
    }

    /// Batched [`Checkpoint::predict`] over row-major `m x n` features.
    pub fn predict_raw(&self, features: &[&[f64]]) -> Result<Vec<Prediction>> {
        let c = &self.model.config;
        let mut inputs = Vec::with_capacity(features.len());
        for f in features {
            if f.len() != c.input_len() {
                return Err(Error::ShapeMismatch(format!("feature has {} values, model expects {}", f.len(), c.input_len())));
            }
            let mut v = f.to_vec();
            if let Some(stats) = &self.norm {
                stats.apply_in_place(&mut v, c.input_width)?;
            }
            inputs.push(v.into_iter().map(|x| x as f32).collect::<Vec<f32>>());
        }
        let refs: Vec<&[f32]> = inputs.iter().map(Vec::as_slice).collect();
        self.model.predict_batch(&refs)
    }
}
