//! Several classifiers explain the same image; their normalized maps are
//! averaged and ranked into deciles.

use pssl_forge::consensus::{ensemble, EnsembleConfig};
use pssl_forge::evalkit::pseudo_quality;
use pssl_forge::explain::SmoothGradConfig;
use pssl_forge::imagery::{synth_blob_dataset, BlobConfig};
use pssl_forge::psslgen::{decile_quantize, per_model_saliency};
use pssl_forge::toynets::{ClassifierNet, TrunkArch};
use pssl_forge::trainkit::{train_classifier, TrainConfig};

const MODELS: usize = 3;

fn main() -> pssl_forge::Result<()> {
    let samples = synth_blob_dataset(&BlobConfig::new(16, 4, 0.2, 200), 2)?;
    let labeled: Vec<_> = samples.iter().map(|s| (s.image.clone(), s.class_id)).collect();
    let models = (0..MODELS as u64)
        .map(|seed| {
            let cfg = TrainConfig {
                epochs: 8,
                base_lr: 0.05,
                step_decay_epoch: 6,
                seed,
                ..TrainConfig::default()
            };
            Ok(train_classifier(
                ClassifierNet::init(TrunkArch::new(3, [8, 16]), 4, seed)?,
                &labeled,
                &cfg,
            )?
            .0)
        })
        .collect::<pssl_forge::Result<Vec<_>>>()?;

    let sg = SmoothGradConfig::default();
    let shown = &samples[..20];
    let mut single = [0.0; MODELS];
    let mut combined = 0.0;
    for (i, sample) in shown.iter().enumerate() {
        let maps = per_model_saliency(&models, &sample.image, &sg.for_image(i as u64))?;
        // Fewer models than recommended, so this logs a warning when logging is on.
        let deciles = decile_quantize(&ensemble(&maps, &EnsembleConfig::new(MODELS)?)?);
        if i == 0 {
            println!("decile histogram of image 0: {:?}", deciles.histogram());
        }
        for (acc, m) in single.iter_mut().zip(&maps) {
            *acc += pseudo_quality(&decile_quantize(m), &sample.mask, sample.class_id)?.iou / shown.len() as f64;
        }
        combined += pseudo_quality(&deciles, &sample.mask, sample.class_id)?.iou / shown.len() as f64;
    }
    for (i, q) in single.iter().enumerate() {
        println!("model {i}: mean top-decile IoU {q:.3}");
    }
    println!("ensemble: mean top-decile IoU {combined:.3}");
    Ok(())
}
