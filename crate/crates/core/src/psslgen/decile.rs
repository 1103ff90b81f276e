use crate::explain::SaliencyMap;
use crate::imagery::GroundTruthMask;
use crate::{Error, Result};

/// Index of the top decile, the one used as pseudo foreground.
pub const TOP_DECILE: u8 = 9;

/// Per-pixel decile rank in `0..=9`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecileMap {
    width: usize,
    height: usize,
    deciles: Vec<u8>,
}

impl DecileMap {
    pub fn new(width: usize, height: usize, deciles: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || deciles.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} decile map needs {} values, got {}",
                width * height,
                deciles.len()
            )));
        }
        if let Some(bad) = deciles.iter().find(|&&d| d > TOP_DECILE) {
            return Err(Error::Shape(format!("decile {bad} out of 0..=9")));
        }
        Ok(Self { width, height, deciles })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.deciles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deciles.is_empty()
    }

    pub fn deciles(&self) -> &[u8] {
        &self.deciles
    }

    /// Pixel count of each decile.
    pub fn histogram(&self) -> [usize; 10] {
        let mut h = [0; 10];
        for &d in &self.deciles {
            h[d as usize] += 1;
        }
        h
    }

    pub fn top_decile_count(&self) -> usize {
        self.deciles.iter().filter(|&&d| d == TOP_DECILE).count()
    }
}

/// `D(x) = floor(10 * Z(x) / N)` where `Z(x)` counts pixels with a strictly
/// smaller score. Ties share a decile; a constant map is all zeros.
pub fn decile_quantize(map: &SaliencyMap) -> DecileMap {
    let scores = map.scores();
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut deciles = vec![0u8; n];
    let mut first_of_run = 0;
    for (rank, &idx) in order.iter().enumerate() {
        // Group on numeric equality so -0.0 and 0.0 tie.
        if rank > 0 && scores[order[rank - 1]] != scores[idx] {
            first_of_run = rank;
        }
        let d = first_of_run * 10 / n;
        assert!(d <= 9, "decile {d} from Z={first_of_run}, N={n}");
        deciles[idx] = d as u8;
    }
    DecileMap {
        width: map.width(),
        height: map.height(),
        deciles,
    }
}

/// Per-pixel labels where `num_classes` marks background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabelMask {
    width: usize,
    height: usize,
    num_classes: usize,
    labels: Vec<u8>,
}

impl PseudoLabelMask {
    pub(crate) fn from_parts(width: usize, height: usize, num_classes: usize, labels: Vec<u8>) -> Self {
        debug_assert_eq!(labels.len(), width * height);
        Self {
            width,
            height,
            num_classes,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn background(&self) -> u8 {
        self.num_classes as u8
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Same labels in ground-truth form, for code that accepts either mask.
    pub fn to_ground_truth(&self) -> GroundTruthMask {
        GroundTruthMask::new(self.width, self.height, self.labels.clone()).expect("dimensions already checked")
    }
}

/// Top-decile pixels take `class_id`; every other pixel is background.
pub fn extract_mask(dmap: &DecileMap, class_id: usize, num_classes: usize) -> Result<PseudoLabelMask> {
    if class_id >= num_classes || num_classes > 254 {
        return Err(Error::ClassOutOfRange { class_id, num_classes });
    }
    let background = num_classes as u8;
    let labels = dmap
        .deciles
        .iter()
        .map(|&d| if d == TOP_DECILE { class_id as u8 } else { background })
        .collect();
    Ok(PseudoLabelMask {
        width: dmap.width,
        height: dmap.height,
        num_classes,
        labels,
    })
}
