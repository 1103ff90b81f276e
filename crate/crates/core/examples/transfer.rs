//! Pre-trains a segmenter on pseudo labels, then fine-tunes it and a random
//! start on a small labeled set.

use pssl_forge::evalkit::{evaluate_segmenter, miou, pixel_average_accuracy};
use pssl_forge::explain::SmoothGradConfig;
use pssl_forge::imagery::{synth_blob_dataset, BlobConfig};
use pssl_forge::psslgen::pseudo_deciles;
use pssl_forge::toynets::{transplant_backbone, ClassifierNet, SegmenterNet, TransplantMode, TrunkArch};
use pssl_forge::trainkit::{
    finetune, pretrain, train_classifier, ClassWeights, PsslSample, Schedule, SegSample, TrainConfig,
};

const K: usize = 4;

fn main() -> pssl_forge::Result<()> {
    let trunk = TrunkArch::new(3, [8, 16]);
    let blobs = |count, seed| synth_blob_dataset(&BlobConfig::new(16, K, 0.2, count), seed);
    let pool = blobs(200, 1)?;
    let labeled: Vec<_> = pool.iter().map(|s| (s.image.clone(), s.class_id)).collect();
    let cls_cfg = TrainConfig {
        epochs: 8,
        base_lr: 0.05,
        step_decay_epoch: 6,
        ..TrainConfig::default()
    };
    let models = (0..3u64)
        .map(|seed| Ok(train_classifier(ClassifierNet::init(trunk.clone(), K, seed)?, &labeled, &cls_cfg)?.0))
        .collect::<pssl_forge::Result<Vec<_>>>()?;

    // Pseudo labels only: the pool's masks are never read.
    let sg = SmoothGradConfig {
        samples: 10,
        ..SmoothGradConfig::default()
    };
    let pssl = pool
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(PsslSample {
                image: s.image.clone(),
                deciles: pseudo_deciles(&models, &s.image, &sg.for_image(i as u64))?,
                class_id: s.class_id,
            })
        })
        .collect::<pssl_forge::Result<Vec<_>>>()?;
    let start = transplant_backbone(
        &models[0],
        &SegmenterNet::init(trunk.clone(), K, 9)?,
        TransplantMode::BackboneOnly,
    )?;
    let pre_cfg = TrainConfig {
        epochs: 6,
        base_lr: 0.05,
        step_decay_epoch: 4,
        ..TrainConfig::default()
    };
    let (pretrained, _) = pretrain(start, &pssl, &ClassWeights::with_background(K, 1.0)?, &pre_cfg)?;

    let to_seg = |v: Vec<_>| -> Vec<SegSample> {
        v.into_iter()
            .map(|s: pssl_forge::imagery::BlobSample| SegSample {
                image: s.image,
                mask: s.mask,
            })
            .collect()
    };
    let val_blobs = blobs(100, 22)?;
    let held_out: Vec<_> = val_blobs.iter().map(|s| (s.image.clone(), s.class_id)).collect();
    let train = to_seg(blobs(50, 21)?);
    let val = to_seg(val_blobs);
    println!(
        "pre-trained: val mIoU {:.3}, top-1 by pixel average {:.3}",
        miou(&evaluate_segmenter(&pretrained, &val, None)?)?.mean_iou,
        pixel_average_accuracy(&pretrained, &held_out)?
    );

    let ft_cfg = TrainConfig {
        epochs: 5,
        base_lr: 0.01,
        schedule: Schedule::Polynomial,
        ..TrainConfig::default()
    };
    let fresh = SegmenterNet::init(trunk, K, 10)?;
    let full = transplant_backbone(&pretrained, &fresh, TransplantMode::Full)?;
    for (name, init) in [("random", fresh), ("pseudo-label pre-trained", full)] {
        let (net, _) = finetune(init, &train, &ft_cfg)?;
        println!(
            "{name}: val mIoU {:.3}",
            miou(&evaluate_segmenter(&net, &val, None)?)?.mean_iou
        );
    }
    Ok(())
}
