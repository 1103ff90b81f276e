use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::augment;
use super::loss::{softmax_rows, weighted_ce, ClassWeights};
use super::schedule::{lr_at, Schedule, TrainConfig};
use crate::evalkit::{evaluate_segmenter, miou};
use crate::imagery::{GroundTruthMask, Image};
use crate::psslgen::{extract_mask, DecileMap};
use crate::toynets::{ClassifierNet, GradRequest, Network, SegmenterNet};
use crate::{Error, Result};

/// A labeled segmentation example; background is label `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegSample {
    pub image: Image,
    pub mask: GroundTruthMask,
}

/// An image paired with its PSSL record.
#[derive(Debug, Clone, PartialEq)]
pub struct PsslSample {
    pub image: Image,
    pub deciles: DecileMap,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// CRC-32 of the final parameters as little-endian `f64`, in hex.
    pub checksum: String,
}

impl TrainLog {
    /// One JSON object per epoch, then a closing checksum line.
    pub fn to_jsonl(&self) -> String {
        let mut out: String = self
            .epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect();
        out.push_str(&serde_json::json!({ "final_checksum": self.checksum }).to_string());
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.loss)
    }
}

pub fn param_checksum(params: &[f64]) -> String {
    let mut hasher = crc32fast::Hasher::new();
    for p in params {
        hasher.update(&p.to_le_bytes());
    }
    format!("{:08x}", hasher.finalize())
}

/// SGD with momentum and L2 weight decay:
/// `v = momentum * v + (g + decay * w)`, `w -= lr * v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    velocity: Vec<f64>,
    momentum: f64,
    weight_decay: f64,
}

impl Sgd {
    pub fn new(len: usize, momentum: f64, weight_decay: f64) -> Self {
        Self {
            velocity: vec![0.0; len],
            momentum,
            weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        for ((w, v), &g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + (g + self.weight_decay * *w);
            *w -= lr * *v;
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for one (epoch, sample) pair of a run.
pub(crate) fn stream_seed(seed: u64, epoch: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ epoch) ^ index)
}

/// Mini-batch loop shared by every trainer. `per_sample` returns the loss and
/// parameter gradient of one sample; batches average them.
fn run_loop<N, F>(mut net: N, samples: usize, config: &TrainConfig, per_sample: F) -> Result<(N, TrainLog)>
where
    N: Network,
    F: Fn(&N, usize, u64) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    if samples == 0 {
        return Err(Error::Precondition("training set is empty".into()));
    }
    let mut sgd = Sgd::new(net.params().len(), config.momentum, config.weight_decay);
    let mut order: Vec<usize> = (0..samples).collect();
    let batches = samples.div_ceil(config.batch_size);
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, epoch as u64, u64::MAX));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut first_lr = None;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let lr = lr_at(config, epoch, b as f64 / batches as f64);
            first_lr.get_or_insert(lr);
            let mut grad = vec![0.0; net.params().len()];
            let mut batch_loss = 0.0;
            for &idx in batch {
                let (loss, g) = per_sample(&net, idx, stream_seed(config.seed, epoch as u64, idx as u64))?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b, loss });
                }
                batch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            sgd.step(net.params_mut(), &grad, lr);
            epoch_loss += batch_loss;
        }
        log.push(EpochRecord {
            epoch,
            loss: epoch_loss / samples as f64,
            lr: first_lr.unwrap_or(0.0),
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    let checksum = param_checksum(net.params());
    Ok((net, TrainLog { epochs: log, checksum }))
}

/// Loss and parameter gradient of one segmentation example.
pub fn segmenter_sample_grad(
    net: &SegmenterNet,
    image: &Image,
    labels: &[u8],
    weights: &ClassWeights,
) -> Result<(f64, Vec<f64>)> {
    let (logits, cache) = net.net().forward(image)?;
    let probs = softmax_rows(&logits, weights.len());
    let (loss, dlogits) = weighted_ce(&probs, labels, weights)?;
    let grads = net.net().backward_raw(&cache, &dlogits, GradRequest::PARAMS)?;
    Ok((loss, grads.params.expect("params requested")))
}

fn train_segmenter(
    net: SegmenterNet,
    samples: &[SegSample],
    weights: &ClassWeights,
    config: &TrainConfig,
) -> Result<(SegmenterNet, TrainLog)> {
    let outputs = net.num_classes() + 1;
    if weights.len() != outputs {
        return Err(Error::Shape(format!(
            "{} class weights for {outputs} outputs",
            weights.len()
        )));
    }
    for s in samples {
        if !s.mask.matches(&s.image) {
            return Err(Error::Shape("mask and image sizes differ".into()));
        }
    }
    run_loop(net, samples.len(), config, |net, idx, seed| {
        let sample = &samples[idx];
        if config.augment.is_identity() {
            segmenter_sample_grad(net, &sample.image, sample.mask.labels(), weights)
        } else {
            let (image, mask) = augment(&sample.image, &sample.mask, &config.augment, seed)?;
            segmenter_sample_grad(net, &image, mask.labels(), weights)
        }
    })
}

/// Pseudo masks (top decile = class, rest = background) for a PSSL dataset.
pub fn pssl_to_seg_samples(dataset: &[PsslSample], num_classes: usize) -> Result<Vec<SegSample>> {
    dataset
        .iter()
        .map(|s| {
            if (s.deciles.width(), s.deciles.height()) != (s.image.width(), s.image.height()) {
                return Err(Error::Shape("record and image sizes differ".into()));
            }
            let mask = extract_mask(&s.deciles, s.class_id, num_classes)?;
            Ok(SegSample {
                image: s.image.clone(),
                mask: mask.to_ground_truth(),
            })
        })
        .collect()
}

/// Weighted-cross-entropy pre-training on pseudo labels for exactly `config.epochs` epochs.
pub fn pretrain(
    net: SegmenterNet,
    dataset: &[PsslSample],
    weights: &ClassWeights,
    config: &TrainConfig,
) -> Result<(SegmenterNet, TrainLog)> {
    let samples = pssl_to_seg_samples(dataset, net.num_classes())?;
    train_segmenter(net, &samples, weights, config)
}

/// Fine-tuning on true labels: uniform class weights, polynomial decay.
pub fn finetune(init: SegmenterNet, dataset: &[SegSample], config: &TrainConfig) -> Result<(SegmenterNet, TrainLog)> {
    let config = TrainConfig {
        schedule: Schedule::Polynomial,
        ..config.clone()
    };
    let weights = ClassWeights::uniform(init.num_classes() + 1);
    train_segmenter(init, dataset, &weights, &config)
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best_lr: f64,
    pub best_miou: f64,
    pub net: SegmenterNet,
    pub log: TrainLog,
    /// `(lr, validation mIoU)` for every candidate, ascending in lr.
    pub scores: Vec<(f64, f64)>,
}

/// Fine-tunes once per learning rate and keeps the peak validation mIoU;
/// ties go to the smaller rate.
pub fn finetune_grid(
    init: &SegmenterNet,
    train: &[SegSample],
    val: &[SegSample],
    config: &TrainConfig,
    grid: &[f64],
) -> Result<GridSearch> {
    let mut lrs = grid.to_vec();
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    let mut best: Option<GridSearch> = None;
    let mut scores = Vec::with_capacity(lrs.len());
    for lr in lrs {
        let cfg = TrainConfig {
            base_lr: lr,
            ..config.clone()
        };
        let (net, log) = finetune(init.clone(), train, &cfg)?;
        let score = miou(&evaluate_segmenter(&net, val, None)?)?.mean_iou;
        scores.push((lr, score));
        if best.as_ref().is_none_or(|b| score > b.best_miou) {
            best = Some(GridSearch {
                best_lr: lr,
                best_miou: score,
                net,
                log,
                scores: Vec::new(),
            });
        }
    }
    let mut best = best.ok_or_else(|| Error::Config("empty learning-rate grid".into()))?;
    best.scores = scores;
    Ok(best)
}

/// Cross-entropy training of an image classifier.
pub fn train_classifier(
    net: ClassifierNet,
    samples: &[(Image, usize)],
    config: &TrainConfig,
) -> Result<(ClassifierNet, TrainLog)> {
    let k = net.num_classes();
    if let Some((_, c)) = samples.iter().find(|(_, c)| *c >= k) {
        return Err(Error::ClassOutOfRange {
            class_id: *c,
            num_classes: k,
        });
    }
    let weights = ClassWeights::uniform(k);
    run_loop(net, samples.len(), config, |net, idx, seed| {
        let (image, class_id) = &samples[idx];
        let image = if config.augment.is_identity() {
            image.clone()
        } else {
            let blank = GroundTruthMask::new(image.width(), image.height(), vec![0; image.pixel_count()])?;
            augment(image, &blank, &config.augment, seed)?.0
        };
        let (logits, cache) = net.net().forward(&image)?;
        let (loss, dlogits) = weighted_ce(&softmax_rows(&logits, k), &[*class_id as u8], &weights)?;
        let grads = net.net().backward_raw(&cache, &dlogits, GradRequest::PARAMS)?;
        Ok((loss, grads.params.expect("params requested")))
    })
}

/// Fraction of samples whose predicted class matches the label.
pub fn classification_accuracy(net: &ClassifierNet, samples: &[(Image, usize)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("no samples to score".into()));
    }
    let mut correct = 0;
    for (image, class_id) in samples {
        if net.predict(image)? == *class_id {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}
