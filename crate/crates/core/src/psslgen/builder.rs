//! Parallel construction of a PSSL dataset directory.
//!
//! Output layout:
//!
//! ```text
//! out_dir/<name>.pssl        one record per emitted image
//! out_dir/manifest.tsv       <name>.pssl \t class_id, in input order
//! out_dir/build_report.json  counts and statistics (no timings)
//! out_dir/.pssl-incomplete   present only while a build runs or after it failed
//! ```

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decile::{decile_quantize, DecileMap};
use super::record::{pack_record, unpack_record};
use crate::consensus::{average_maps, EnsembleConfig, MINIMUM_RECOMMENDED_MODELS};
use crate::explain::{minmax_normalize, smoothgrad, SaliencyMap, SmoothGradConfig};
use crate::imagery::{load_manifest, save_manifest, Image, ManifestEntry};
use crate::toynets::{ClassifierNet, Network};
use crate::{Error, Result};

pub const INCOMPLETE_MARKER: &str = ".pssl-incomplete";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const REPORT_FILE: &str = "build_report.json";

/// One source image and its image-level label.
#[derive(Debug, Clone)]
pub struct BuildInput {
    /// File stem of the emitted record.
    pub name: String,
    pub image: Image,
    pub class_id: usize,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Base SmoothGrad settings; image `i` uses seed `smoothgrad.seed ^ i`.
    pub smoothgrad: SmoothGradConfig,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub images_processed: usize,
    pub emitted: usize,
    pub degenerate_skipped: usize,
    pub skipped_names: Vec<String>,
    /// Mean over emitted records of the top-decile pixel fraction.
    pub d9_pixel_fraction: f64,
    pub per_class_counts: Vec<usize>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Normalized SmoothGrad map of each model for its own predicted class.
pub fn per_model_saliency(
    models: &[ClassifierNet],
    image: &Image,
    config: &SmoothGradConfig,
) -> Result<Vec<SaliencyMap>> {
    models
        .iter()
        .map(|m| {
            let predicted = m.predict(image)?;
            Ok(minmax_normalize(&smoothgrad(m, image, predicted, config)?))
        })
        .collect()
}

/// Ensemble of per-model explanations followed by decile ranking.
pub fn pseudo_deciles(models: &[ClassifierNet], image: &Image, config: &SmoothGradConfig) -> Result<DecileMap> {
    let maps = per_model_saliency(models, image, config)?;
    let consensus = average_maps(&maps, &EnsembleConfig::new(models.len())?)?;
    Ok(decile_quantize(&consensus))
}

enum Outcome {
    Emitted { class_id: usize, d9_fraction: f64 },
    Skipped,
}

pub fn build_dataset(
    inputs: &[BuildInput],
    models: &[ClassifierNet],
    options: &BuildOptions,
    out_dir: impl AsRef<Path>,
) -> Result<BuildReport> {
    let started = Instant::now();
    let out_dir = out_dir.as_ref();
    if models.is_empty() {
        return Err(Error::Precondition("at least one model is required".into()));
    }
    options.smoothgrad.validate()?;
    let num_classes = models[0].num_classes();
    if models.iter().any(|m| m.num_classes() != num_classes) {
        return Err(Error::Precondition("models disagree on the class count".into()));
    }
    if let Some(bad) = inputs.iter().find(|i| i.class_id >= num_classes) {
        return Err(Error::ClassOutOfRange {
            class_id: bad.class_id,
            num_classes,
        });
    }
    if models.len() < MINIMUM_RECOMMENDED_MODELS {
        log::warn!(
            "building with {} models; at least {MINIMUM_RECOMMENDED_MODELS} are recommended",
            models.len()
        );
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let marker = out_dir.join(INCOMPLETE_MARKER);
    fs::write(&marker, b"").map_err(|e| Error::io(&marker, e))?;
    // Stale manifests from earlier builds must not survive a failed rebuild.
    let _ = fs::remove_file(out_dir.join(MANIFEST_FILE));
    let _ = fs::remove_file(out_dir.join(REPORT_FILE));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, input)| {
                let config = options.smoothgrad.for_image(i as u64);
                let dmap = pseudo_deciles(models, &input.image, &config)?;
                let top = dmap.top_decile_count();
                if top == 0 {
                    return Ok(Outcome::Skipped);
                }
                let path = out_dir.join(format!("{}.pssl", input.name));
                fs::write(&path, pack_record(&dmap, input.class_id)?).map_err(|e| Error::io(&path, e))?;
                Ok(Outcome::Emitted {
                    class_id: input.class_id,
                    d9_fraction: top as f64 / dmap.len() as f64,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut report = BuildReport {
        images_processed: inputs.len(),
        emitted: 0,
        degenerate_skipped: 0,
        skipped_names: Vec::new(),
        d9_pixel_fraction: 0.0,
        per_class_counts: vec![0; num_classes],
        wall_time_s: 0.0,
    };
    let mut manifest = Vec::new();
    let mut fraction_sum = 0.0;
    for (input, outcome) in inputs.iter().zip(&outcomes) {
        match *outcome {
            Outcome::Emitted { class_id, d9_fraction } => {
                report.emitted += 1;
                report.per_class_counts[class_id] += 1;
                fraction_sum += d9_fraction;
                manifest.push(ManifestEntry::new(format!("{}.pssl", input.name), class_id));
            }
            Outcome::Skipped => {
                report.degenerate_skipped += 1;
                report.skipped_names.push(input.name.clone());
            }
        }
    }
    if report.emitted > 0 {
        report.d9_pixel_fraction = fraction_sum / report.emitted as f64;
    }
    save_manifest(&manifest, out_dir.join(MANIFEST_FILE))?;
    let report_path = out_dir.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&report_path, json + "\n").map_err(|e| Error::io(&report_path, e))?;
    fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

/// A record read back from a built dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PsslEntry {
    /// Record file stem, which names the source image.
    pub name: String,
    pub deciles: DecileMap,
    pub class_id: usize,
}

/// Reads every record listed in `dir/manifest.tsv`.
pub fn read_pssl_dir(dir: impl AsRef<Path>) -> Result<Vec<PsslEntry>> {
    let dir = dir.as_ref();
    if dir.join(INCOMPLETE_MARKER).exists() {
        return Err(Error::Precondition(format!(
            "{} holds an incomplete build",
            dir.display()
        )));
    }
    load_manifest(dir.join(MANIFEST_FILE))?
        .into_iter()
        .map(|entry| {
            let path = dir.join(&entry.record_path);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let (deciles, class_id) = unpack_record(&bytes)?;
            if class_id != entry.class_id {
                return Err(Error::format(
                    "class_id",
                    format!(
                        "{} stores class {class_id}, manifest says {}",
                        entry.record_path, entry.class_id
                    ),
                ));
            }
            let name = entry
                .record_path
                .strip_suffix(".pssl")
                .unwrap_or(&entry.record_path)
                .to_string();
            Ok(PsslEntry {
                name,
                deciles,
                class_id,
            })
        })
        .collect()
}
