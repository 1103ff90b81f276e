//! Labeled dataset directories.
//!
//! ```text
//! dir/manifest.tsv      img_00000.ppm \t class_id
//! dir/img_00000.ppm     image
//! dir/mask_00000.pgm    per-pixel labels, background = K
//! dir/dataset.json      generator settings, when synthesized
//! ```

use std::path::Path;

use serde::Serialize;

use crate::imagery::{load_image, load_manifest, load_mask, save_image, save_manifest, save_mask, BlobSample};
use crate::imagery::{GroundTruthMask, Image, ManifestEntry};
use crate::psslgen::MANIFEST_FILE;
use crate::trainkit::SegSample;
use crate::{Error, Result};

pub const DATASET_FILE: &str = "dataset.json";

#[derive(Debug, Clone)]
pub struct LabeledItem {
    /// Image file stem; PSSL records built from the image reuse it.
    pub name: String,
    pub image: Image,
    pub mask: Option<GroundTruthMask>,
    pub class_id: usize,
}

impl LabeledItem {
    pub fn seg_sample(&self) -> Result<SegSample> {
        let mask = self
            .mask
            .clone()
            .ok_or_else(|| Error::Precondition(format!("{} has no mask", self.name)))?;
        Ok(SegSample {
            image: self.image.clone(),
            mask,
        })
    }
}

/// `img_XXXX.ppm` pairs with `mask_XXXX.pgm`; any other `stem.ext` with `stem_mask.pgm`.
pub fn mask_name_for(image_file: &str) -> String {
    let stem = image_file.rsplit_once('.').map_or(image_file, |(s, _)| s);
    match stem.strip_prefix("img_") {
        Some(rest) => format!("mask_{rest}.pgm"),
        None => format!("{stem}_mask.pgm"),
    }
}

fn stem(file: &str) -> &str {
    let base = file.rsplit('/').next().unwrap_or(file);
    base.rsplit_once('.').map_or(base, |(s, _)| s)
}

pub fn write_labeled_dir(dir: &Path, samples: &[BlobSample], meta: &impl Serialize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let image_file = format!("img_{i:05}.ppm");
        save_image(&s.image, dir.join(&image_file))?;
        save_mask(&s.mask, dir.join(mask_name_for(&image_file)))?;
        manifest.push(ManifestEntry::new(image_file, s.class_id));
    }
    save_manifest(&manifest, dir.join(MANIFEST_FILE))?;
    let path = dir.join(DATASET_FILE);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

/// Loads every manifest entry; masks are read when `with_masks` is set.
pub fn load_labeled_dir(dir: &Path, with_masks: bool) -> Result<Vec<LabeledItem>> {
    let manifest = dir.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(Error::Config(format!(
            "{} is not a dataset: no {MANIFEST_FILE}",
            dir.display()
        )));
    }
    let items = load_manifest(&manifest)?
        .into_iter()
        .map(|entry| {
            let image = load_image(dir.join(&entry.record_path))?;
            let mask = if with_masks {
                let mask = load_mask(dir.join(mask_name_for(&entry.record_path)))?;
                if !mask.matches(&image) {
                    return Err(Error::Shape(format!(
                        "mask of {} has the wrong size",
                        entry.record_path
                    )));
                }
                Some(mask)
            } else {
                None
            };
            Ok(LabeledItem {
                name: stem(&entry.record_path).to_string(),
                image,
                mask,
                class_id: entry.class_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{} lists no images", manifest.display())));
    }
    Ok(items)
}
