//! Vanilla gradients against SmoothGrad on one trained classifier, scored by
//! how well the top decile covers the true blob.

use pssl_forge::evalkit::pseudo_quality;
use pssl_forge::explain::{minmax_normalize, smoothgrad, vanilla_saliency, SmoothGradConfig};
use pssl_forge::imagery::{synth_blob_dataset, BlobConfig};
use pssl_forge::psslgen::decile_quantize;
use pssl_forge::toynets::{ClassifierNet, TrunkArch};
use pssl_forge::trainkit::{classification_accuracy, train_classifier, TrainConfig};

fn main() -> pssl_forge::Result<()> {
    let samples = synth_blob_dataset(&BlobConfig::new(16, 4, 0.2, 200), 1)?;
    let labeled: Vec<_> = samples.iter().map(|s| (s.image.clone(), s.class_id)).collect();
    let cfg = TrainConfig {
        epochs: 8,
        base_lr: 0.05,
        step_decay_epoch: 6,
        ..TrainConfig::default()
    };
    let (net, _) = train_classifier(ClassifierNet::init(TrunkArch::new(3, [8, 16]), 4, 0)?, &labeled, &cfg)?;
    println!("train accuracy {:.3}", classification_accuracy(&net, &labeled)?);

    let sg = SmoothGradConfig::default();
    let (mut vanilla, mut smooth) = (0.0, 0.0);
    let shown = &samples[..20];
    for (i, s) in shown.iter().enumerate() {
        let v = decile_quantize(&minmax_normalize(&vanilla_saliency(&net, &s.image, s.class_id)?));
        let g = smoothgrad(&net, &s.image, s.class_id, &sg.for_image(i as u64))?;
        let g = decile_quantize(&minmax_normalize(&g));
        vanilla += pseudo_quality(&v, &s.mask, s.class_id)?.iou / shown.len() as f64;
        smooth += pseudo_quality(&g, &s.mask, s.class_id)?.iou / shown.len() as f64;
    }
    println!("mean top-decile IoU: vanilla {vanilla:.3}, smoothgrad {smooth:.3}");
    Ok(())
}
