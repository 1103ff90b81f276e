//! Synthetic single-object images with exact ground-truth masks.
//!
//! Every image holds one filled shape whose class fixes both its outline and
//! the color channels it lights up. Classes are assigned round-robin so any
//! `count` divisible by `num_classes` is perfectly balanced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GroundTruthMask, Image};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Disk,
    Square,
    Diamond,
    Cross,
}

impl ShapeFamily {
    const ALL: [ShapeFamily; 4] = [
        ShapeFamily::Disk,
        ShapeFamily::Square,
        ShapeFamily::Diamond,
        ShapeFamily::Cross,
    ];

    /// Whether an offset `(dx, dy)` from the center lies inside a shape of radius `r`.
    pub fn contains(self, dx: f64, dy: f64, r: f64) -> bool {
        let (ax, ay) = (dx.abs(), dy.abs());
        match self {
            ShapeFamily::Disk => dx * dx + dy * dy <= r * r,
            ShapeFamily::Square => ax.max(ay) <= 0.85 * r,
            ShapeFamily::Diamond => ax + ay <= 1.2 * r,
            ShapeFamily::Cross => {
                let arm = r / 3.0;
                (ax <= arm && ay <= r) || (ay <= arm && ax <= r)
            }
        }
    }
}

/// Shape and color of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStyle {
    pub shape: ShapeFamily,
    /// Which color channels the object lights up. Ignored for gray images.
    pub lit_channels: [bool; 3],
    /// Range of the lit-channel intensity.
    pub intensity: (f64, f64),
}

const PALETTE: [[bool; 3]; 6] = [
    [true, false, false],
    [false, true, false],
    [false, false, true],
    [true, true, false],
    [true, false, true],
    [false, true, true],
];

/// Background levels stay below this; object intensities stay above `FOREGROUND_FLOOR`.
const BACKGROUND_CEIL: f64 = 0.3;
const FOREGROUND_FLOOR: f64 = 0.75;

impl ClassStyle {
    pub fn default_for(class_id: usize) -> Self {
        Self {
            shape: ShapeFamily::ALL[class_id % ShapeFamily::ALL.len()],
            lit_channels: PALETTE[class_id % PALETTE.len()],
            intensity: (FOREGROUND_FLOOR, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobConfig {
    pub image_size: usize,
    pub num_classes: usize,
    /// Amplitude of uniform per-value noise added to every pixel.
    pub noise_level: f64,
    pub channels: usize,
    pub styles: Vec<ClassStyle>,
    pub count: usize,
}

impl BlobConfig {
    /// Color blobs with the default style of each class.
    pub fn new(image_size: usize, num_classes: usize, noise_level: f64, count: usize) -> Self {
        Self {
            image_size,
            num_classes,
            noise_level,
            channels: 3,
            styles: (0..num_classes).map(ClassStyle::default_for).collect(),
            count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 {
            return Err(Error::Config(format!(
                "image_size must be >= 8, got {}",
                self.image_size
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        // The background label is stored as a byte equal to num_classes.
        if self.num_classes > 254 {
            return Err(Error::Config(format!(
                "num_classes must be <= 254, got {}",
                self.num_classes
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(Error::Config(format!(
                "noise_level must lie in [0, 1], got {}",
                self.noise_level
            )));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Config(format!("channels must be 1 or 3, got {}", self.channels)));
        }
        if self.styles.len() != self.num_classes {
            return Err(Error::Config(format!(
                "{} class styles for {} classes",
                self.styles.len(),
                self.num_classes
            )));
        }
        for style in &self.styles {
            let (lo, hi) = style.intensity;
            if !(BACKGROUND_CEIL < lo && lo <= hi && hi <= 1.0) {
                return Err(Error::Config(format!(
                    "object intensity range ({lo}, {hi}) must sit inside ({BACKGROUND_CEIL}, 1]"
                )));
            }
            if self.channels == 3 && !style.lit_channels.iter().any(|&b| b) {
                return Err(Error::Config("a class style lights no channel".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSample {
    pub image: Image,
    pub mask: GroundTruthMask,
    pub class_id: usize,
}

/// Generates `config.count` samples; a pure function of `(config, seed)`.
pub fn synth_blob_dataset(config: &BlobConfig, seed: u64) -> Result<Vec<BlobSample>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..config.count)
        .map(|i| synth_one(config, i % config.num_classes, &mut rng))
        .collect()
}

fn synth_one(config: &BlobConfig, class_id: usize, rng: &mut ChaCha8Rng) -> Result<BlobSample> {
    let size = config.image_size;
    let sizef = size as f64;
    let style = &config.styles[class_id];
    let radius = rng.gen_range(0.15 * sizef..=0.25 * sizef);
    let cx = rng.gen_range(radius..=sizef - radius);
    let cy = rng.gen_range(radius..=sizef - radius);
    let (lo, hi) = style.intensity;
    let object_level = rng.gen_range(lo..=hi);
    let background_level = rng.gen_range(0.15..=BACKGROUND_CEIL);

    let channels = config.channels;
    let background = config.num_classes as u8;
    let mut labels = Vec::with_capacity(size * size);
    let mut data = Vec::with_capacity(size * size * channels);
    for y in 0..size {
        for x in 0..size {
            let inside = style.shape.contains(x as f64 + 0.5 - cx, y as f64 + 0.5 - cy, radius);
            labels.push(if inside { class_id as u8 } else { background });
            for c in 0..channels {
                let lit = inside && (channels == 1 || style.lit_channels[c]);
                let base = if lit { object_level } else { background_level };
                let noise = config.noise_level * rng.gen_range(-1.0..=1.0);
                data.push(base + noise);
            }
        }
    }
    Ok(BlobSample {
        image: Image::from_clipped(size, size, channels, data)?,
        mask: GroundTruthMask::new(size, size, labels)?,
        class_id,
    })
}
