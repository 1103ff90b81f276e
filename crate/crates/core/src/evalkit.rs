//! Segmentation and classification metrics.

use serde::{Deserialize, Serialize};

use crate::imagery::{GroundTruthMask, Image};
use crate::psslgen::{DecileMap, TOP_DECILE};
use crate::toynets::{Network, SegmenterNet};
use crate::trainkit::{softmax_rows, SegSample};
use crate::{Error, Result};

/// `(K+1) x (K+1)` counts; rows are truth, columns prediction, index `K` is background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        let side = num_classes + 1;
        Self {
            num_classes,
            counts: vec![0; side * side],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn side(&self) -> usize {
        self.num_classes + 1
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.side() + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn pixel_accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| (0..self.side()).map(|c| self.get(c, c)).sum::<u64>() as f64 / total as f64)
    }

    /// Elementwise sum; partial matrices over disjoint pixels merge this way.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::Shape(format!(
                "cannot merge {}-class and {}-class matrices",
                self.num_classes, other.num_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Adds one image worth of pixels.
    pub fn accumulate(&mut self, preds: &[u8], truth: &[u8], ignore_index: Option<u8>) -> Result<()> {
        if preds.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} labels",
                preds.len(),
                truth.len()
            )));
        }
        let side = self.side();
        for (&p, &t) in preds.iter().zip(truth) {
            if Some(t) == ignore_index {
                continue;
            }
            for v in [t, p] {
                if v as usize >= side {
                    return Err(Error::ClassOutOfRange {
                        class_id: v as usize,
                        num_classes: self.num_classes,
                    });
                }
            }
            self.counts[t as usize * side + p as usize] += 1;
        }
        Ok(())
    }
}

pub fn confusion(preds: &[u8], truth: &[u8], num_classes: usize, ignore_index: Option<u8>) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::zeros(num_classes);
    cm.accumulate(preds, truth, ignore_index)?;
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouReport {
    pub mean_iou: f64,
    /// `None` for classes absent from both truth and prediction.
    pub per_class: Vec<Option<f64>>,
    pub pixel_accuracy: f64,
}

impl MiouReport {
    /// One JSON object per line: the mean, pixel accuracy, then each present class.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        let mut line = |v: serde_json::Value| {
            out.push_str(&v.to_string());
            out.push('\n');
        };
        line(serde_json::json!({ "metric": "miou", "value": self.mean_iou }));
        line(serde_json::json!({ "metric": "pixel_accuracy", "value": self.pixel_accuracy }));
        for (c, iou) in self.per_class.iter().enumerate() {
            if let Some(iou) = iou {
                line(serde_json::json!({ "metric": "iou", "class": c, "value": iou }));
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let last = self.per_class.len().saturating_sub(1);
        let mut out = String::from("class        IoU\n");
        for (c, iou) in self.per_class.iter().enumerate() {
            let name = if c == last {
                "background".to_string()
            } else {
                format!("{c}")
            };
            match iou {
                Some(v) => out.push_str(&format!("{name:<10} {v:>6.4}\n")),
                None => out.push_str(&format!("{name:<10} {:>6}\n", "-")),
            }
        }
        out.push_str(&format!("{:<10} {:>6.4}\n", "mIoU", self.mean_iou));
        out.push_str(&format!("{:<10} {:>6.4}\n", "pixel acc", self.pixel_accuracy));
        out
    }
}

/// IoU per class as `diag / (row + col - diag)`, averaged over present classes.
pub fn miou(cm: &ConfusionMatrix) -> Result<MiouReport> {
    let side = cm.side();
    let per_class: Vec<Option<f64>> = (0..side)
        .map(|c| {
            let diag = cm.get(c, c);
            let row: u64 = (0..side).map(|p| cm.get(c, p)).sum();
            let col: u64 = (0..side).map(|t| cm.get(t, c)).sum();
            let union = row + col - diag;
            (union > 0).then(|| diag as f64 / union as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::UndefinedMetric("no class present in truth or prediction".into()));
    }
    Ok(MiouReport {
        mean_iou: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
        pixel_accuracy: cm.pixel_accuracy().unwrap_or(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Compares the top-decile pixels with the pixels labeled `class_id`.
/// Two empty sets agree perfectly; one empty set scores zero.
pub fn pseudo_quality(dmap: &DecileMap, truth: &GroundTruthMask, class_id: usize) -> Result<QualityReport> {
    if (dmap.width(), dmap.height()) != (truth.width(), truth.height()) {
        return Err(Error::Shape("decile map and mask sizes differ".into()));
    }
    let (mut pred, mut gt, mut both) = (0usize, 0usize, 0usize);
    for (&d, &t) in dmap.deciles().iter().zip(truth.labels()) {
        let a = d == TOP_DECILE;
        let b = t as usize == class_id;
        pred += a as usize;
        gt += b as usize;
        both += (a && b) as usize;
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (num == 0) as u8 as f64
        } else {
            num as f64 / den as f64
        }
    };
    if pred == 0 && gt == 0 {
        return Ok(QualityReport {
            iou: 1.0,
            precision: 1.0,
            recall: 1.0,
        });
    }
    Ok(QualityReport {
        iou: ratio(both, pred + gt - both),
        precision: if pred == 0 { 0.0 } else { ratio(both, pred) },
        recall: if gt == 0 { 0.0 } else { ratio(both, gt) },
    })
}

/// Mean of per-pixel probability rows (`outputs` wide), then argmax over the
/// first `candidates` entries, ties to the smaller index.
pub fn classify_by_average_probs(probs: &[f64], outputs: usize, candidates: usize) -> Result<(usize, Vec<f64>)> {
    if outputs == 0
        || probs.is_empty()
        || !probs.len().is_multiple_of(outputs)
        || candidates == 0
        || candidates > outputs
    {
        return Err(Error::Shape(format!(
            "{} probabilities cannot be split into rows of {outputs} with {candidates} candidates",
            probs.len()
        )));
    }
    let rows = probs.len() / outputs;
    let mut mean = vec![0.0; outputs];
    for row in probs.chunks(outputs) {
        for (m, p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut best = 0;
    for c in 1..candidates {
        if mean[c] > mean[best] {
            best = c;
        }
    }
    Ok((best, mean))
}

/// Image-level class from a segmenter: per-pixel softmax averaged over the image.
/// Background competes only when `include_background` is set.
pub fn classify_by_pixel_average_with(
    net: &SegmenterNet,
    image: &Image,
    include_background: bool,
) -> Result<(usize, Vec<f64>)> {
    let outputs = net.num_classes() + 1;
    let (logits, _) = net.net().forward(image)?;
    let candidates = if include_background { outputs } else { net.num_classes() };
    classify_by_average_probs(&softmax_rows(&logits, outputs), outputs, candidates)
}

pub fn classify_by_pixel_average(net: &SegmenterNet, image: &Image) -> Result<(usize, Vec<f64>)> {
    classify_by_pixel_average_with(net, image, false)
}

/// Confusion over a labeled set using the network's per-pixel argmax.
pub fn evaluate_segmenter(
    net: &SegmenterNet,
    samples: &[SegSample],
    ignore_index: Option<u8>,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::zeros(net.num_classes());
    for s in samples {
        if !s.mask.matches(&s.image) {
            return Err(Error::Shape("mask and image sizes differ".into()));
        }
        cm.accumulate(&net.predict_mask(&s.image)?, s.mask.labels(), ignore_index)?;
    }
    Ok(cm)
}

/// Image-level top-1 accuracy of [`classify_by_pixel_average`].
pub fn pixel_average_accuracy(net: &SegmenterNet, samples: &[(Image, usize)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("no samples to classify".into()));
    }
    let mut correct = 0;
    for (image, class_id) in samples {
        if classify_by_pixel_average(net, image)?.0 == *class_id {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}
