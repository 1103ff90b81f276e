use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Probabilities below this are clamped before the log.
pub const PROB_FLOOR: f64 = 1e-12;
pub const DEFAULT_BACKGROUND_WEIGHT: f64 = 0.1;
/// Background weights swept when studying the class imbalance.
pub const BACKGROUND_WEIGHT_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

/// Per-class loss weights. For segmentation the last entry is background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    weights: Vec<f64>,
}

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("class weights must not be empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Config(format!("class weight {w} must be finite and >= 0")));
        }
        Ok(Self { weights })
    }

    /// `num_classes` foreground weights of 1 followed by `background`.
    pub fn with_background(num_classes: usize, background: f64) -> Result<Self> {
        let mut w = vec![1.0; num_classes];
        w.push(background);
        Self::new(w)
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            weights: vec![1.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn background(&self) -> f64 {
        *self.weights.last().expect("non-empty")
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * factor).collect())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax applied to every consecutive group of `classes` logits.
pub fn softmax_rows(logits: &[f64], classes: usize) -> Vec<f64> {
    logits.chunks_exact(classes).flat_map(softmax).collect()
}

/// Mean over pixels of `-w[t] * ln p[t]` and its gradient with respect to the
/// pre-softmax logits, `w[t] * (p - onehot(t)) / pixels`.
///
/// `pixel_probs` holds one probability row of `weights.len()` classes per
/// pixel; `targets` one class index per pixel.
pub fn weighted_ce(pixel_probs: &[f64], targets: &[u8], weights: &ClassWeights) -> Result<(f64, Vec<f64>)> {
    let classes = weights.len();
    if targets.is_empty() || pixel_probs.len() != targets.len() * classes {
        return Err(Error::Shape(format!(
            "{} probabilities for {} pixels of {classes} classes",
            pixel_probs.len(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mut loss = 0.0;
    let mut grad = pixel_probs.to_vec();
    for (row, &t) in grad.chunks_exact_mut(classes).zip(targets) {
        let t = t as usize;
        if t >= classes {
            return Err(Error::ClassOutOfRange {
                class_id: t,
                num_classes: classes,
            });
        }
        let w = weights.as_slice()[t];
        loss -= w * row[t].max(PROB_FLOOR).ln();
        row[t] -= 1.0;
        for g in row.iter_mut() {
            *g *= w / n;
        }
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn loss_of_logits(logits: &[f64], targets: &[u8], weights: &ClassWeights) -> f64 {
        weighted_ce(&softmax_rows(logits, weights.len()), targets, weights)
            .unwrap()
            .0
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 0.0]);
        assert_eq!(p[0], 1.0);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z: Vec<f64> = (0..5).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let total: f64 = z.iter().map(|v| v.exp()).sum();
        for (a, v) in softmax(&z).iter().zip(&z) {
            assert!((a - v.exp() / total).abs() <= 1e-12);
        }
    }

    #[test]
    fn one_pixel_foreground_and_background() {
        let w = ClassWeights::with_background(1, 0.1).unwrap();
        let (fg, _) = weighted_ce(&[0.5, 0.5], &[0], &w).unwrap();
        assert!((fg - std::f64::consts::LN_2).abs() < 1e-12);
        let (bg, _) = weighted_ce(&[0.5, 0.5], &[1], &w).unwrap();
        assert!((bg - 0.1 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = ClassWeights::with_background(3, 0.1).unwrap();
        for _ in 0..5 {
            let logits: Vec<f64> = (0..16 * 4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let targets: Vec<u8> = (0..16).map(|_| rng.gen_range(0..4)).collect();
            let (_, grad) = weighted_ce(&softmax_rows(&logits, 4), &targets, &w).unwrap();
            let h = 1e-5;
            for j in 0..logits.len() {
                let mut plus = logits.clone();
                let mut minus = logits.clone();
                plus[j] += h;
                minus[j] -= h;
                let numeric = (loss_of_logits(&plus, &targets, &w) - loss_of_logits(&minus, &targets, &w)) / (2.0 * h);
                let rel = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(1e-6);
                assert!(rel <= 1e-4, "{j}: {} vs {numeric}", grad[j]);
            }
        }
    }

    #[test]
    fn zero_background_weight_annihilates_background() {
        let w = ClassWeights::with_background(2, 0.0).unwrap();
        let probs = softmax_rows(&[0.3, -1.0, 2.0, 1.0, 0.0, -0.5], 3);
        let (loss, grad) = weighted_ce(&probs, &[2, 0], &w).unwrap();
        assert!(grad[..3].iter().all(|&g| g == 0.0));
        assert!(grad[3..].iter().any(|&g| g != 0.0));
        let (bg_only, _) = weighted_ce(&probs[..3], &[2], &w).unwrap();
        assert_eq!(bg_only, 0.0);
        assert!(loss > 0.0);
    }

    #[test]
    fn shape_and_label_errors() {
        let w = ClassWeights::uniform(2);
        assert!(matches!(weighted_ce(&[0.5, 0.5, 0.5], &[0], &w), Err(Error::Shape(_))));
        assert!(matches!(
            weighted_ce(&[0.5, 0.5], &[2], &w),
            Err(Error::ClassOutOfRange { .. })
        ));
        assert!(ClassWeights::new(vec![1.0, -0.1]).is_err());
    }

    proptest! {
        #[test]
        fn non_negative_and_homogeneous(
            logits in proptest::collection::vec(-4.0f64..4.0, 12),
            targets in proptest::collection::vec(0u8..3, 4),
            bg in 0.0f64..2.0,
            scale in 0.1f64..10.0,
        ) {
            let w = ClassWeights::with_background(2, bg).unwrap();
            let probs = softmax_rows(&logits, 3);
            let (loss, grad) = weighted_ce(&probs, &targets, &w).unwrap();
            prop_assert!(loss >= 0.0);
            let (loss2, grad2) = weighted_ce(&probs, &targets, &w.scaled(scale).unwrap()).unwrap();
            prop_assert!((loss2 - scale * loss).abs() <= 1e-12 * (1.0 + loss2.abs()));
            for (a, b) in grad.iter().zip(&grad2) {
                prop_assert!((b - scale * a).abs() <= 1e-12);
            }
        }
    }
}
