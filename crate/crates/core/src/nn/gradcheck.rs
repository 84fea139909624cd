use super::layers::Tensor;
use super::model::{Label, NetworkModel};
use crate::error::Result;

/// Relative error `||analytic - numeric|| / max(||analytic||, ||numeric||)`
/// per parameter group, with central differences of step `h` (dropout off).
pub fn gradient_check(
    model: &NetworkModel<f64>,
    inputs: &[&[f64]],
    labels: &[Label],
    alpha: f64,
    h: f64,
) -> Result<Vec<(&'static str, f64)>> {
    let (_, analytic) = model.batch_loss_and_grads(inputs, labels, alpha, None)?;
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(analytic.len());
    for (g, (ana, name)) in analytic.iter().zip(super::model::PARAM_NAMES).enumerate() {
        let numeric = numeric_group(&mut probe, g, inputs, labels, alpha, h)?;
        out.push((name, relative_error(&ana.values, &numeric.values)));
    }
    Ok(out)
}

fn numeric_group(
    probe: &mut NetworkModel<f64>,
    group: usize,
    inputs: &[&[f64]],
    labels: &[Label],
    alpha: f64,
    h: f64,
) -> Result<Tensor<f64>> {
    let mut num = Tensor::zeros(probe.params[group].shape.clone());
    for i in 0..num.len() {
        let w = probe.params[group].values[i];
        probe.params[group].values[i] = w + h;
        let plus = loss_only(probe, inputs, labels, alpha)?;
        probe.params[group].values[i] = w - h;
        let minus = loss_only(probe, inputs, labels, alpha)?;
        probe.params[group].values[i] = w;
        num.values[i] = (plus - minus) / (2.0 * h);
    }
    Ok(num)
}

fn loss_only(model: &NetworkModel<f64>, inputs: &[&[f64]], labels: &[Label], alpha: f64) -> Result<f64> {
    Ok(model.batch_loss_and_grads(inputs, labels, alpha, None)?.0)
}

pub(crate) fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
