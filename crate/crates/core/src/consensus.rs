//! Cross-model ensemble of explanations: the per-pixel mean of normalized maps.

use crate::explain::SaliencyMap;
use crate::{Error, Result};

/// Ensembles smaller than this still work but are flagged.
pub const MINIMUM_RECOMMENDED_MODELS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleConfig {
    pub model_count: usize,
}

impl EnsembleConfig {
    pub fn new(model_count: usize) -> Result<Self> {
        if model_count == 0 {
            return Err(Error::Config("an ensemble needs at least one model".into()));
        }
        Ok(Self { model_count })
    }

    /// True when fewer models than recommended are averaged.
    pub fn below_recommended(&self) -> bool {
        self.model_count < MINIMUM_RECOMMENDED_MODELS
    }
}

/// Averages normalized saliency maps pixel by pixel.
///
/// Per pixel, the `M` scores are sorted before summing in `f64`, so the
/// result does not depend on the order of `maps` down to the last bit.
pub fn ensemble(maps: &[SaliencyMap], config: &EnsembleConfig) -> Result<SaliencyMap> {
    if config.below_recommended() {
        log::warn!(
            "ensembling {} models; at least {MINIMUM_RECOMMENDED_MODELS} are recommended",
            maps.len()
        );
    }
    average_maps(maps, config)
}

/// [`ensemble`] without the small-ensemble warning, for callers that warn once.
pub(crate) fn average_maps(maps: &[SaliencyMap], config: &EnsembleConfig) -> Result<SaliencyMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Precondition("ensemble of an empty list".into()))?;
    if maps.len() != config.model_count {
        return Err(Error::Precondition(format!(
            "config expects {} maps, got {}",
            config.model_count,
            maps.len()
        )));
    }
    for m in maps {
        if (m.width(), m.height()) != (first.width(), first.height()) {
            return Err(Error::Shape(format!(
                "map {}x{} differs from {}x{}",
                m.width(),
                m.height(),
                first.width(),
                first.height()
            )));
        }
        if !m.is_normalized() {
            return Err(Error::Precondition("ensemble inputs must be min-max normalized".into()));
        }
    }
    let m = maps.len() as f64;
    let mut column = Vec::with_capacity(maps.len());
    let scores = (0..first.len())
        .map(|p| {
            column.clear();
            column.extend(maps.iter().map(|map| map.scores()[p]));
            column.sort_by(f32::total_cmp);
            let sum: f64 = column.iter().map(|&s| f64::from(s)).sum();
            (sum / m) as f32
        })
        .collect();
    let degenerate = maps.iter().all(SaliencyMap::is_degenerate);
    Ok(SaliencyMap::normalized_from_parts(
        first.width(),
        first.height(),
        scores,
        degenerate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::minmax_normalize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normalized(w: usize, scores: Vec<f32>) -> SaliencyMap {
        let h = scores.len() / w;
        minmax_normalize(&SaliencyMap::new(w, h, scores).unwrap())
    }

    #[test]
    fn two_map_mean() {
        let maps = [normalized(2, vec![0.0, 1.0]), normalized(2, vec![1.0, 0.0])];
        let out = ensemble(&maps, &EnsembleConfig::new(2).unwrap()).unwrap();
        assert_eq!(out.scores(), &[0.5, 0.5]);
        assert!(out.is_normalized() && !out.is_degenerate());
    }

    #[test]
    fn single_model_is_identity() {
        let m = normalized(3, vec![0.3, 0.9, 0.1, 0.5, 0.2, 0.7]);
        assert_eq!(
            ensemble(std::slice::from_ref(&m), &EnsembleConfig::new(1).unwrap()).unwrap(),
            m
        );
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let maps: Vec<_> = (0..15)
            .map(|_| normalized(8, (0..64).map(|_| rng.gen::<f32>()).collect()))
            .collect();
        let out = ensemble(&maps, &EnsembleConfig::new(15).unwrap()).unwrap();
        for p in 0..64 {
            let mut naive = 0.0f64;
            for m in &maps {
                naive += f64::from(m.scores()[p]);
            }
            let naive = ((naive / 15.0) as f32) as f64;
            assert!((f64::from(out.scores()[p]) - naive).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = normalized(2, vec![0.0, 1.0]);
        let b = normalized(1, vec![0.0, 1.0]);
        assert!(matches!(
            ensemble(&[a.clone(), b], &EnsembleConfig::new(2).unwrap()),
            Err(Error::Shape(_))
        ));
        assert!(ensemble(&[], &EnsembleConfig { model_count: 0 }).is_err());
        assert!(EnsembleConfig::new(0).is_err());
        let raw = SaliencyMap::new(2, 1, vec![0.0, 3.0]).unwrap();
        assert!(ensemble(&[raw], &EnsembleConfig::new(1).unwrap()).is_err());
        assert!(EnsembleConfig::new(5).unwrap().below_recommended());
        assert!(!EnsembleConfig::new(15).unwrap().below_recommended());
    }

    #[test]
    fn degenerate_only_when_all_inputs_are() {
        let flat = normalized(2, vec![4.0, 4.0]);
        let live = normalized(2, vec![0.0, 1.0]);
        assert!(
            ensemble(&[flat.clone(), flat.clone()], &EnsembleConfig::new(2).unwrap())
                .unwrap()
                .is_degenerate()
        );
        assert!(!ensemble(&[flat, live], &EnsembleConfig::new(2).unwrap())
            .unwrap()
            .is_degenerate());
    }

    proptest! {
        #[test]
        fn order_free_bounded_and_idempotent(
            seed in any::<u64>(),
            m in prop_oneof![Just(1usize), Just(5), Just(15)],
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let maps: Vec<_> = (0..m)
                .map(|_| normalized(4, (0..16).map(|_| rng.gen::<f32>() * 10.0).collect()))
                .collect();
            let cfg = EnsembleConfig::new(m).unwrap();
            let out = ensemble(&maps, &cfg).unwrap();
            let mut shuffled = maps.clone();
            shuffled.reverse();
            shuffled.rotate_left(seed as usize % m);
            prop_assert_eq!(ensemble(&shuffled, &cfg).unwrap().scores().to_vec(), out.scores().to_vec());
            prop_assert!(out.scores().iter().all(|&s| (0.0..=1.0).contains(&s)));
            let copies = vec![maps[0].clone(); m];
            prop_assert_eq!(ensemble(&copies, &cfg).unwrap().scores().to_vec(), maps[0].scores().to_vec());
        }
    }
}
