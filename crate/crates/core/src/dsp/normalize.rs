use super::cepstrum::CepstrogramFeature;
use crate::error::{Error, Result};

/// Guard added to the standard deviation before dividing.
pub const NORM_EPSILON: f64 = 1e-8;

/// Per-quefrency-row statistics pooled over a training set (all examples,
/// all columns).
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn rows(&self) -> usize {
        self.mean.len()
    }

    /// Identity transform for `m` rows.
    pub fn identity(m: usize) -> Self {
        Self { mean: vec![0.0; m], std: vec![1.0 - NORM_EPSILON; m] }
    }

    pub fn apply_in_place(&self, values: &mut [f64], n: usize) -> Result<()> {
        if values.len() != self.rows() * n {
            return Err(Error::ShapeMismatch(format!(
                "feature has {} values, stats expect {} x {n}",
                values.len(),
                self.rows()
            )));
        }
        for (i, row) in values.chunks_mut(n).enumerate() {
            let inv = 1.0 / (self.std[i] + NORM_EPSILON);
            for v in row {
                *v = (*v - self.mean[i]) * inv;
            }
        }
        Ok(())
    }
}

/// Fits row statistics with a two-pass mean/variance over `features`.
pub fn fit_normalization(features: &[CepstrogramFeature]) -> Result<NormStats> {
    if features.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "normalization needs at least 2 features, got {}",
            features.len()
        )));
    }
    let (m, n) = (features[0].m, features[0].n);
    if features.iter().any(|f| f.m != m || f.n != n) {
        return Err(Error::ShapeMismatch("features differ in shape".into()));
    }
    let count = (features.len() * n) as f64;
    let mut mean = vec![0.0; m];
    for f in features {
        for (i, row) in f.values.chunks(n).enumerate() {
            mean[i] += row.iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|v| *v /= count);
    let mut var = vec![0.0; m];
    for f in features {
        for (i, row) in f.values.chunks(n).enumerate() {
            var[i] += row.iter().map(|v| (v - mean[i]).powi(2)).sum::<f64>();
        }
    }
    let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
    Ok(NormStats { mean, std })
}

/// Returns `(f - mean) / (std + 1e-8)` row by row.
pub fn apply_normalization(f: &CepstrogramFeature, stats: &NormStats) -> Result<CepstrogramFeature> {
    let mut out = f.clone();
    stats.apply_in_place(&mut out.values, f.n)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::LifterWindow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_features(count: usize, m: usize, n: usize, seed: u64) -> Vec<CepstrogramFeature> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| CepstrogramFeature {
                values: (0..m * n).map(|i| rng.random::<f64>() * (1 + i % 3) as f64 + (i / n) as f64).collect(),
                m,
                n,
                lifter: LifterWindow::new(0, m - 1).unwrap(),
                quefrency_step: 1.0,
            })
            .collect()
    }

    #[test]
    fn standardizes_training_set() {
        let feats = random_features(50, 6, 3, 1);
        let stats = fit_normalization(&feats).unwrap();
        let normed: Vec<_> = feats.iter().map(|f| apply_normalization(f, &stats).unwrap()).collect();
        let again = fit_normalization(&normed).unwrap();
        for i in 0..6 {
            assert!(again.mean[i].abs() < 1e-6);
            assert!((again.std[i] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_row_maps_to_zero() {
        let mut feats = random_features(4, 3, 2, 2);
        for f in &mut feats {
            f.values[0] = 5.0;
            f.values[1] = 5.0;
        }
        let stats = fit_normalization(&feats).unwrap();
        assert_eq!(stats.std[0], 0.0);
        let out = apply_normalization(&feats[0], &stats).unwrap();
        assert!(out.values[0].abs() < 1e-9 && out.values[1].abs() < 1e-9);
        assert!(out.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn affine_input_keeps_row_argmax() {
        let feats = random_features(10, 5, 4, 3);
        let stats = fit_normalization(&feats).unwrap();
        let f = &feats[0];
        let mut g = f.clone();
        g.values.iter_mut().for_each(|v| *v = 2.5 * *v - 7.0);
        let (a, b) = (apply_normalization(f, &stats).unwrap(), apply_normalization(&g, &stats).unwrap());
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
        for i in 0..5 {
            assert_eq!(argmax(&a.values[i * 4..i * 4 + 4]), argmax(&b.values[i * 4..i * 4 + 4]));
        }
    }

    #[test]
    fn needs_two_features() {
        let feats = random_features(1, 3, 1, 4);
        assert!(fit_normalization(&feats).is_err());
        assert!(fit_normalization(&[]).is_err());
    }
}
