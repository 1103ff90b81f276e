//! Gradient saliency: vanilla |∂logit/∂pixel| and SmoothGrad.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::imagery::Image;
use crate::toynets::{grad_input, ClassifierNet};
use crate::{Error, Result};

/// Per-pixel importance scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    scores: Vec<f32>,
    normalized: bool,
    degenerate: bool,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, scores: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || scores.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} saliency map needs {} scores, got {}",
                width * height,
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Shape("saliency scores must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            scores,
            normalized: false,
            degenerate: false,
        })
    }

    /// Wraps scores already known to be min-max normalized.
    pub(crate) fn normalized_from_parts(width: usize, height: usize, scores: Vec<f32>, degenerate: bool) -> Self {
        Self {
            width,
            height,
            scores,
            normalized: true,
            degenerate,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Set by normalization when every input score was equal.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelReduction {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothGradConfig {
    pub samples: usize,
    /// Noise standard deviation as a fraction of the `[0, 1]` input range.
    pub noise_sigma: f64,
    pub seed: u64,
    pub reduction: ChannelReduction,
}

impl Default for SmoothGradConfig {
    fn default() -> Self {
        Self {
            samples: 25,
            noise_sigma: 0.15,
            seed: 0,
            reduction: ChannelReduction::Max,
        }
    }
}

impl SmoothGradConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("SmoothGrad needs at least one sample".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// The same configuration with its noise stream keyed to one image.
    pub fn for_image(&self, image_index: u64) -> Self {
        Self {
            seed: self.seed ^ image_index,
            ..self.clone()
        }
    }
}

fn reduced_gradient(
    net: &ClassifierNet,
    image: &Image,
    class_id: usize,
    reduction: ChannelReduction,
) -> Result<Vec<f64>> {
    let grad = grad_input(net, image, class_id)?;
    let c = image.channels();
    Ok(grad
        .chunks_exact(c)
        .map(|px| match reduction {
            ChannelReduction::Max => px.iter().fold(0.0f64, |m, g| m.max(g.abs())),
            ChannelReduction::Mean => px.iter().map(|g| g.abs()).sum::<f64>() / c as f64,
        })
        .collect())
}

fn to_map(image: &Image, scores: impl IntoIterator<Item = f64>) -> Result<SaliencyMap> {
    SaliencyMap::new(
        image.width(),
        image.height(),
        scores.into_iter().map(|s| s as f32).collect(),
    )
}

/// Absolute input gradient of `logit[class_id]`, maximum over channels.
pub fn vanilla_saliency(net: &ClassifierNet, image: &Image, class_id: usize) -> Result<SaliencyMap> {
    vanilla_saliency_with(net, image, class_id, ChannelReduction::Max)
}

pub fn vanilla_saliency_with(
    net: &ClassifierNet,
    image: &Image,
    class_id: usize,
    reduction: ChannelReduction,
) -> Result<SaliencyMap> {
    to_map(image, reduced_gradient(net, image, class_id, reduction)?)
}

/// Mean vanilla saliency over `config.samples` noisy copies of `image`.
///
/// One ChaCha8 stream seeded with `config.seed` supplies standard normal
/// draws in storage order (row-major pixels, then channels), one full image
/// per sample. Perturbed values are clipped to `[0, 1]`.
pub fn smoothgrad(
    net: &ClassifierNet,
    image: &Image,
    class_id: usize,
    config: &SmoothGradConfig,
) -> Result<SaliencyMap> {
    config.validate()?;
    if config.noise_sigma == 0.0 {
        // Every noisy copy equals the input.
        return vanilla_saliency_with(net, image, class_id, config.reduction);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sum = vec![0.0f64; image.pixel_count()];
    for _ in 0..config.samples {
        let noisy: Vec<f64> = image
            .data()
            .iter()
            .map(|&v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + config.noise_sigma * z
            })
            .collect();
        let noisy = Image::from_clipped(image.width(), image.height(), image.channels(), noisy)?;
        for (acc, s) in sum
            .iter_mut()
            .zip(reduced_gradient(net, &noisy, class_id, config.reduction)?)
        {
            *acc += s;
        }
    }
    let n = config.samples as f64;
    to_map(image, sum.into_iter().map(|s| s / n))
}

/// Rescales scores to `[0, 1]`. A constant map becomes all zeros and is
/// flagged degenerate.
pub fn minmax_normalize(map: &SaliencyMap) -> SaliencyMap {
    let (min, max) = map
        .scores
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    if max == min {
        return SaliencyMap::normalized_from_parts(map.width, map.height, vec![0.0; map.len()], true);
    }
    let (min, span) = (f64::from(min), f64::from(max) - f64::from(min));
    let scores = map
        .scores
        .iter()
        .map(|&s| ((f64::from(s) - min) / span) as f32)
        .collect();
    SaliencyMap::normalized_from_parts(map.width, map.height, scores, false)
}

/// Index of the largest logit: the class the model itself predicts.
pub fn predicted_class(net: &ClassifierNet, image: &Image) -> Result<usize> {
    net.predict(image)
}

/// Raw grid: width and height as `u32` LE, then `f32` LE scores row-major.
pub fn encode_saliency_raw(map: &SaliencyMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * map.len());
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    for s in &map.scores {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode_saliency_raw(bytes: &[u8]) -> Result<SaliencyMap> {
    if bytes.len() < 8 {
        return Err(Error::format("header", "saliency grid shorter than its 8-byte header"));
    }
    let width = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let height = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let expected = 8 + 4 * width * height;
    if bytes.len() != expected {
        return Err(Error::format(
            "payload",
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let scores = bytes[8..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    SaliencyMap::new(width, height, scores)
}

pub fn save_saliency_raw(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_saliency_raw(map)).map_err(|e| Error::io(path, e))
}

pub fn load_saliency_raw(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    decode_saliency_raw(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
