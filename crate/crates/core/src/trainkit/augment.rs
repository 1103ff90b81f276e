//! Paired geometric augmentation of an image and its label mask.
//!
//! Transforms apply in the order scale, crop, horizontal flip. Both image and
//! mask are resampled nearest-neighbor so labels stay aligned with pixels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imagery::{GroundTruthMask, Image};
use crate::psslgen::PseudoLabelMask;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Mirror left-right with probability 1/2.
    pub hflip: bool,
    /// Side of a random square crop.
    pub crop: Option<usize>,
    /// Uniform range of the rescale factor.
    pub scale: Option<(f64, f64)>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            hflip: true,
            crop: None,
            scale: None,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            hflip: false,
            crop: None,
            scale: None,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.hflip && self.crop.is_none() && self.scale.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop == Some(0) {
            return Err(Error::Config("crop size must be positive".into()));
        }
        if let Some((lo, hi)) = self.scale {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!("bad scale range ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

/// Concrete transform drawn from an [`AugmentConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentParams {
    pub resize: Option<(usize, usize)>,
    /// `(x0, y0, side)`
    pub crop: Option<(usize, usize, usize)>,
    pub flip: bool,
}

/// Anything that is a grid of class labels.
pub trait LabelGrid: Sized {
    fn grid_width(&self) -> usize;
    fn grid_height(&self) -> usize;
    fn grid_labels(&self) -> &[u8];
    fn with_labels(&self, width: usize, height: usize, labels: Vec<u8>) -> Self;
}

impl LabelGrid for GroundTruthMask {
    fn grid_width(&self) -> usize {
        self.width()
    }
    fn grid_height(&self) -> usize {
        self.height()
    }
    fn grid_labels(&self) -> &[u8] {
        self.labels()
    }
    fn with_labels(&self, width: usize, height: usize, labels: Vec<u8>) -> Self {
        GroundTruthMask::new(width, height, labels).expect("resampled dimensions")
    }
}

impl LabelGrid for PseudoLabelMask {
    fn grid_width(&self) -> usize {
        self.width()
    }
    fn grid_height(&self) -> usize {
        self.height()
    }
    fn grid_labels(&self) -> &[u8] {
        self.labels()
    }
    fn with_labels(&self, width: usize, height: usize, labels: Vec<u8>) -> Self {
        PseudoLabelMask::from_parts(width, height, self.num_classes(), labels)
    }
}

/// Draws transform parameters for an image of the given size.
pub fn sample_params(config: &AugmentConfig, width: usize, height: usize, seed: u64) -> Result<AugmentParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resize = config.scale.map(|(lo, hi)| {
        let s = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        let scaled = |n: usize| ((n as f64 * s).round() as usize).max(1);
        (scaled(width), scaled(height))
    });
    let (w, h) = resize.unwrap_or((width, height));
    let crop = match config.crop {
        Some(side) if side > w || side > h => {
            return Err(Error::Config(format!("crop {side} larger than {w}x{h} image")));
        }
        Some(side) => Some((rng.gen_range(0..=w - side), rng.gen_range(0..=h - side), side)),
        None => None,
    };
    let flip = config.hflip && rng.gen_bool(0.5);
    Ok(AugmentParams { resize, crop, flip })
}

/// Remaps a `width x height` grid of `channels`-wide cells through `source`,
/// which maps each output coordinate to an input coordinate.
fn remap<T: Copy>(
    data: &[T],
    width: usize,
    channels: usize,
    out_w: usize,
    out_h: usize,
    source: impl Fn(usize, usize) -> (usize, usize),
) -> Vec<T> {
    let mut out = Vec::with_capacity(out_w * out_h * channels);
    for y in 0..out_h {
        for x in 0..out_w {
            let (sx, sy) = source(x, y);
            let p = (sy * width + sx) * channels;
            out.extend_from_slice(&data[p..p + channels]);
        }
    }
    out
}

fn transform<T: Copy>(
    data: &[T],
    width: usize,
    height: usize,
    channels: usize,
    params: &AugmentParams,
) -> (Vec<T>, usize, usize) {
    let (mut cur, mut w, mut h) = (data.to_vec(), width, height);
    if let Some((nw, nh)) = params.resize {
        let (ow, oh) = (w, h);
        cur = remap(&cur, w, channels, nw, nh, |x, y| {
            let sx = (((x as f64 + 0.5) * ow as f64 / nw as f64) as usize).min(ow - 1);
            let sy = (((y as f64 + 0.5) * oh as f64 / nh as f64) as usize).min(oh - 1);
            (sx, sy)
        });
        (w, h) = (nw, nh);
    }
    if let Some((x0, y0, side)) = params.crop {
        cur = remap(&cur, w, channels, side, side, |x, y| (x0 + x, y0 + y));
        (w, h) = (side, side);
    }
    if params.flip {
        cur = remap(&cur, w, channels, w, h, |x, y| (w - 1 - x, y));
    }
    (cur, w, h)
}

/// Applies one concrete transform to an image and its mask.
pub fn apply_augment<M: LabelGrid>(image: &Image, mask: &M, params: &AugmentParams) -> Result<(Image, M)> {
    if (mask.grid_width(), mask.grid_height()) != (image.width(), image.height()) {
        return Err(Error::Shape(format!(
            "mask {}x{} does not match image {}x{}",
            mask.grid_width(),
            mask.grid_height(),
            image.width(),
            image.height()
        )));
    }
    if let Some((x0, y0, side)) = params.crop {
        let (w, h) = params.resize.unwrap_or((image.width(), image.height()));
        if x0 + side > w || y0 + side > h {
            return Err(Error::Config(format!(
                "crop {side} at ({x0}, {y0}) exceeds {w}x{h} image"
            )));
        }
    }
    let (data, w, h) = transform(image.data(), image.width(), image.height(), image.channels(), params);
    let (labels, _, _) = transform(mask.grid_labels(), image.width(), image.height(), 1, params);
    Ok((
        Image::new(w, h, image.channels(), data)?,
        mask.with_labels(w, h, labels),
    ))
}

/// Draws a transform from `config` with `seed` and applies it.
pub fn augment<M: LabelGrid>(image: &Image, mask: &M, config: &AugmentConfig, seed: u64) -> Result<(Image, M)> {
    let params = sample_params(config, image.width(), image.height(), seed)?;
    apply_augment(image, mask, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::{synth_blob_dataset, BlobConfig};

    fn blob(seed: u64) -> (Image, GroundTruthMask, usize) {
        let s = synth_blob_dataset(&BlobConfig::new(16, 3, 0.0, 1), seed)
            .unwrap()
            .remove(0);
        (s.image, s.mask, s.class_id)
    }

    #[test]
    fn flip_twice_is_identity() {
        let (img, mask, _) = blob(1);
        let p = AugmentParams {
            resize: None,
            crop: None,
            flip: true,
        };
        let (a, m) = apply_augment(&img, &mask, &p).unwrap();
        assert_ne!(m, mask);
        let (b, m2) = apply_augment(&a, &m, &p).unwrap();
        assert_eq!((b, m2), (img, mask));
    }

    #[test]
    fn full_size_crop_is_identity() {
        let (img, mask, _) = blob(2);
        let cfg = AugmentConfig {
            hflip: false,
            crop: Some(16),
            scale: None,
        };
        assert_eq!(augment(&img, &mask, &cfg, 5).unwrap(), (img, mask));
    }

    #[test]
    fn oversize_crop_rejected() {
        let (img, mask, _) = blob(3);
        let cfg = AugmentConfig {
            hflip: false,
            crop: Some(17),
            scale: None,
        };
        assert!(augment(&img, &mask, &cfg, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let (img, mask, _) = blob(4);
        let cfg = AugmentConfig {
            hflip: true,
            crop: Some(10),
            scale: Some((0.8, 1.2)),
        };
        assert_eq!(
            augment(&img, &mask, &cfg, 9).unwrap(),
            augment(&img, &mask, &cfg, 9).unwrap()
        );
    }

    #[test]
    fn masks_follow_the_object_under_any_transform() {
        // On noise-free blobs the object is exactly the pixels lit in its
        // class channel, so the transformed mask must label exactly those.
        let cfg = AugmentConfig {
            hflip: true,
            crop: Some(12),
            scale: Some((0.8, 1.3)),
        };
        let style_cfg = BlobConfig::new(16, 3, 0.0, 1);
        for seed in 0..40 {
            let (img, mask, class_id) = blob(seed);
            let lit = style_cfg.styles[class_id].lit_channels.iter().position(|&b| b).unwrap();
            let (ai, am) = augment(&img, &mask, &cfg, seed * 7 + 1).unwrap();
            for y in 0..ai.height() {
                for x in 0..ai.width() {
                    let object = ai.get(x, y, lit) > 0.5;
                    assert_eq!(object, am.get(x, y) as usize == class_id, "seed {seed} at ({x}, {y})");
                }
            }
        }
    }
}
