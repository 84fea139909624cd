use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::Tensor;
use super::linalg::Real;
use super::model::{Label, ModelConfig, NetworkModel, Workspace};
use crate::error::{Error, Result};
use crate::eval::average_precision_scores;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub patience: usize,
    pub min_rel_improvement: f64,
    pub max_epochs: usize,
    /// Reverse the time columns of each training input with probability 1/2.
    pub random_flip: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-6,
            weight_decay: 5e-4,
            momentum: 0.9,
            batch_size: 256,
            alpha: 0.99,
            patience: 5,
            min_rel_improvement: 1e-3,
            max_epochs: 100,
            random_flip: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        for (name, v) in [
            ("learning rate", self.learning_rate),
            ("weight decay", self.weight_decay),
            ("momentum", self.momentum),
            ("min relative improvement", self.min_rel_improvement),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidConfig("max epochs and patience must be >= 1".into()));
        }
        Ok(())
    }
}

/// `v <- momentum * v - lr * (g + weight_decay * w); w <- w + v`.
pub fn sgd_step<T: Real>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    velocity: &mut [Tensor<T>],
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::ShapeMismatch("parameter, gradient and velocity counts differ".into()));
    }
    for ((p, g), v) in params.iter().zip(grads).zip(velocity.iter()) {
        if p.shape != g.shape || p.shape != v.shape {
            return Err(Error::ShapeMismatch(format!("tensor shapes {:?} / {:?} / {:?}", p.shape, g.shape, v.shape)));
        }
        if g.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
    }
    let mu = T::from_f64(cfg.momentum);
    let lr = T::from_f64(cfg.learning_rate);
    let wd = T::from_f64(cfg.weight_decay);
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        for ((w, &gi), vi) in p.values.iter_mut().zip(&g.values).zip(v.values.iter_mut()) {
            *vi = mu * *vi - lr * (gi + wd * *w);
            *w = *w + *vi;
        }
    }
    Ok(())
}

/// A flattened `m x n` input (row-major, quefrency by time) with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub input: Vec<T>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub phase: usize,
    pub alpha: f64,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_ap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Free-form notes, e.g. hyperparameters that differ from the defaults.
    pub notes: Vec<String>,
    pub epochs: Vec<EpochRecord>,
}

impl fmt::Display for TrainLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.notes {
            writeln!(f, "# {n}")?;
        }
        writeln!(f, "phase,alpha,epoch,train_loss,val_loss,val_ap")?;
        for e in &self.epochs {
            writeln!(
                f,
                "{},{},{},{:.6},{:.6},{:.6}",
                e.phase, e.alpha, e.epoch, e.train_loss, e.val_loss, e.val_ap
            )?;
        }
        Ok(())
    }
}

/// Lines describing where `phase` departs from the default hyperparameters.
pub fn deviation_notes(phase: usize, cfg: &TrainConfig) -> Vec<String> {
    let d = TrainConfig::default();
    let mut notes = Vec::new();
    let mut note = |name: &str, got: String, default: String| {
        notes.push(format!("phase {phase}: {name} {got} (default {default})"));
    };
    if cfg.learning_rate != d.learning_rate {
        note("learning_rate", cfg.learning_rate.to_string(), d.learning_rate.to_string());
    }
    if cfg.weight_decay != d.weight_decay {
        note("weight_decay", cfg.weight_decay.to_string(), d.weight_decay.to_string());
    }
    if cfg.momentum != d.momentum {
        note("momentum", cfg.momentum.to_string(), d.momentum.to_string());
    }
    if cfg.batch_size != d.batch_size {
        note("batch_size", cfg.batch_size.to_string(), d.batch_size.to_string());
    }
    notes
}

fn flip_columns<T: Copy>(x: &mut [T], n: usize) {
    for row in x.chunks_mut(n) {
        row.reverse();
    }
}

/// Mean joint loss and detection AP of `model` over `set`.
pub fn evaluate<T: Real>(model: &NetworkModel<T>, set: &[Sample<T>], alpha: f64, loss_positive_only: bool) -> Result<(f64, f64)> {
    let inputs: Vec<&[T]> = set.iter().map(|s| s.input.as_slice()).collect();
    let out = model.raw_outputs(&inputs)?;
    let mut loss = 0.0;
    let mut count = 0usize;
    for ((&r, &z), s) in out.range.iter().zip(&out.logits).zip(set) {
        if loss_positive_only && !s.label.present {
            continue;
        }
        loss += super::model::joint_loss(r, z, &s.label, alpha)?.0;
        count += 1;
    }
    let scores: Vec<f64> = out.logits.iter().map(|z| 1.0 / (1.0 + (z[0] - z[1]).exp())).collect();
    let labels: Vec<bool> = set.iter().map(|s| s.label.present).collect();
    let ap = if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
        average_precision_scores(&scores, &labels)?
    } else {
        f64::NAN
    };
    Ok((if count > 0 { loss / count as f64 } else { 0.0 }, ap))
}

/// Two-phase (or any-phase) training with early stopping. A phase with
/// `alpha == 0` trains and validates on presence-positive examples only.
/// Each phase starts from the best snapshot of the previous one, with fresh
/// momentum, and the best-validation snapshot of the last phase is returned.
pub fn train<T: Real>(
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    model_cfg: ModelConfig,
    phases: &[TrainConfig],
    init_seed: u64,
) -> Result<(NetworkModel<T>, TrainLog)> {
    let model = NetworkModel::init(model_cfg, init_seed)?;
    train_from(model, train_set, val_set, phases)
}

pub fn train_from<T: Real>(
    mut model: NetworkModel<T>,
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    phases: &[TrainConfig],
) -> Result<(NetworkModel<T>, TrainLog)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyInput("training and validation sets must be non-empty".into()));
    }
    if phases.is_empty() {
        return Err(Error::InvalidConfig("no training phases".into()));
    }
    let input_len = model.config.input_len();
    for s in train_set.iter().chain(val_set) {
        s.label.validate()?;
        if s.input.len() != input_len {
            return Err(Error::ShapeMismatch(format!("sample has {} values, model expects {input_len}", s.input.len())));
        }
    }
    let mut log = TrainLog::default();
    let n = model.config.input_width;
    let mut ws = Workspace::new();
    for (phase, cfg) in phases.iter().enumerate() {
        cfg.validate()?;
        log.notes.push(format!("phase {phase}: alpha {}", cfg.alpha));
        log.notes.extend(deviation_notes(phase, cfg));
        let positive_only = cfg.alpha == 0.0;
        let pool: Vec<&Sample<T>> = train_set.iter().filter(|s| !positive_only || s.label.present).collect();
        if pool.is_empty() {
            return Err(Error::EmptyInput(format!("phase {phase} has no training examples")));
        }
        let mut velocity = model.zero_grads();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (mut best_val, _) = evaluate(&model, val_set, cfg.alpha, positive_only)?;
        let mut best_model = model.clone();
        let mut reference = best_val;
        let mut stale = 0;
        let mut order: Vec<usize> = (0..pool.len()).collect();
        let mut flipped: Vec<Vec<T>> = Vec::new();
        for epoch in 0..cfg.max_epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut seen = 0usize;
            for chunk in order.chunks(cfg.batch_size) {
                let labels: Vec<Label> = chunk.iter().map(|&i| pool[i].label).collect();
                flipped.clear();
                let flips: Vec<bool> = chunk
                    .iter()
                    .map(|_| cfg.random_flip && n > 1 && rand::Rng::random_bool(&mut rng, 0.5))
                    .collect();
                for (&i, &f) in chunk.iter().zip(&flips) {
                    if f {
                        let mut x = pool[i].input.clone();
                        flip_columns(&mut x, n);
                        flipped.push(x);
                    }
                }
                let mut fi = flipped.iter();
                let inputs: Vec<&[T]> = chunk
                    .iter()
                    .zip(&flips)
                    .map(|(&i, &f)| if f { fi.next().expect("flipped copy").as_slice() } else { pool[i].input.as_slice() })
                    .collect();
                let mut grads = model.zero_grads();
                let loss = model.accumulate_batch(&inputs, &labels, cfg.alpha, &mut ws, Some(&mut rng), &mut grads)?;
                sgd_step(&mut model.params, &grads, &mut velocity, cfg)?;
                epoch_loss += loss * chunk.len() as f64;
                seen += chunk.len();
            }
            let train_loss = epoch_loss / seen as f64;
            let (val_loss, val_ap) = evaluate(&model, val_set, cfg.alpha, positive_only)?;
            if !val_loss.is_finite() || !train_loss.is_finite() {
                return Err(Error::Diverged(format!("phase {phase} epoch {epoch}: non-finite loss")));
            }
            log.epochs.push(EpochRecord { phase, alpha: cfg.alpha, epoch, train_loss, val_loss, val_ap });
            if val_loss < best_val {
                best_val = val_loss;
                best_model = model.clone();
            }
            if val_loss < reference * (1.0 - cfg.min_rel_improvement) {
                reference = val_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
        model = best_model;
    }
    Ok((model, log))
}
