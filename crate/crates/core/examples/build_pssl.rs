//! Builds a pseudo-labeled dataset from a handful of quickly trained classifiers.

use pssl_forge::explain::SmoothGradConfig;
use pssl_forge::imagery::{synth_blob_dataset, BlobConfig};
use pssl_forge::psslgen::{build_dataset, BuildInput, BuildOptions};
use pssl_forge::toynets::{ClassifierNet, TrunkArch};
use pssl_forge::trainkit::{train_classifier, TrainConfig};

fn main() -> pssl_forge::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let samples = synth_blob_dataset(&BlobConfig::new(16, 4, 0.2, 120), 3)?;
    let labeled: Vec<_> = samples.iter().map(|s| (s.image.clone(), s.class_id)).collect();
    let models = (0..3u64)
        .map(|seed| {
            let cfg = TrainConfig {
                epochs: 6,
                base_lr: 0.05,
                step_decay_epoch: 4,
                seed,
                ..TrainConfig::default()
            };
            Ok(train_classifier(ClassifierNet::init(TrunkArch::new(3, [8]), 4, seed)?, &labeled, &cfg)?.0)
        })
        .collect::<pssl_forge::Result<Vec<_>>>()?;

    let inputs: Vec<BuildInput> = samples
        .into_iter()
        .enumerate()
        .map(|(i, s)| BuildInput {
            name: format!("img_{i:05}"),
            image: s.image,
            class_id: s.class_id,
        })
        .collect();
    let options = BuildOptions {
        smoothgrad: SmoothGradConfig {
            samples: 10,
            ..SmoothGradConfig::default()
        },
        workers: 2,
    };
    let out = std::env::temp_dir().join("pssl_build_example");
    let report = build_dataset(&inputs, &models, &options, &out)?;
    println!(
        "{} records in {}, {} skipped, top-decile fraction {:.4}, per class {:?}",
        report.emitted,
        out.display(),
        report.degenerate_skipped,
        report.d9_pixel_fraction,
        report.per_class_counts
    );
    Ok(())
}
