use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::dataset::{load_labeled_dir, write_labeled_dir, LabeledItem, DATASET_FILE};
use super::visual::{bar_chart_svg, colorize_mask, d9_overlay, decile_heatmap, mask_legend, Bar, DECILE_PALETTE};
use super::{
    write_runspec, BuildArgs, EvalArgs, FinetuneArgs, InitSpec, InspectArgs, PretrainArgs, Status, SweepArgs,
    SynthArgs, TrainClassifiersArgs,
};
use crate::evalkit::{classify_by_pixel_average_with, evaluate_segmenter, miou};
use crate::explain::{ChannelReduction, SmoothGradConfig};
use crate::imagery::{load_image, save_image, synth_blob_dataset, BlobConfig, Image};
use crate::psslgen::{build_dataset, extract_mask, read_pssl_dir, unpack_record, BuildInput, BuildOptions};
use crate::toynets::{
    load_checkpoint, save_checkpoint, transplant_backbone, ClassifierNet, Net, NetKind, Network, SegmenterNet,
    TransplantMode, TrunkArch,
};
use crate::trainkit::{
    classification_accuracy, finetune_grid, softmax_rows, train_classifier, weighted_ce, ClassWeights, PsslSample,
    Schedule, SegSample, TrainConfig, BACKGROUND_WEIGHT_GRID,
};
use crate::{trainkit, Error, Result};

pub const SEGMENTER_FILE: &str = "segmenter.tnet";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const ACCURACY_REPORT_FILE: &str = "accuracy_report.jsonl";
pub const GRID_REPORT_FILE: &str = "grid_report.jsonl";
pub const SWEEP_REPORT_FILE: &str = "sweep_report.jsonl";
pub const SWEEP_TABLE_FILE: &str = "sweep_table.txt";
pub const SWEEP_PLOT_FILE: &str = "sweep.svg";
pub const METRICS_FILE: &str = "metrics.jsonl";

/// Published large-scale mIoU for each background weight of the default grid.
const REFERENCE_BG_MIOU: [(f64, f64); 4] = [(0.001, 72.7), (0.01, 73.9), (0.1, 74.1), (1.0, 73.7)];

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn jsonl(values: &[Value]) -> String {
    values.iter().map(|v| v.to_string() + "\n").collect()
}

fn load_net(path: &Path) -> Result<Net> {
    if !path.is_file() {
        return Err(Error::Config(format!("checkpoint {} does not exist", path.display())));
    }
    load_checkpoint(path)
}

fn load_segmenter(path: &Path) -> Result<SegmenterNet> {
    SegmenterNet::from_net(load_net(path)?)
}

/// Class count from `dataset.json` when present, else from the labels seen.
fn class_count(dir: &Path, items: &[LabeledItem]) -> Result<usize> {
    let path = dir.join(DATASET_FILE);
    if let Ok(text) = fs::read_to_string(&path) {
        let meta: Value = serde_json::from_str(&text).map_err(|e| Error::format("dataset.json", e.to_string()))?;
        if let Some(k) = meta.get("num_classes").and_then(Value::as_u64) {
            return Ok(k as usize);
        }
    }
    Ok(items.iter().map(|i| i.class_id).max().unwrap_or(0) + 1)
}

fn seg_samples(items: &[LabeledItem]) -> Result<Vec<SegSample>> {
    items.iter().map(LabeledItem::seg_sample).collect()
}

/// Starting segmenter for `init`. Checkpoint-based modes take the trunk shape
/// from the checkpoint; a random start uses `trunk`.
pub fn init_segmenter(init: &InitSpec, trunk: TrunkArch, num_classes: usize, seed: u64) -> Result<SegmenterNet> {
    match init {
        InitSpec::Random => SegmenterNet::init(trunk, num_classes, seed),
        InitSpec::Backbone(path) => {
            let src = load_net(path)?;
            let fresh = SegmenterNet::init(src.arch().trunk.clone(), num_classes, seed)?;
            match src.arch().kind {
                NetKind::Classifier => {
                    transplant_backbone(&ClassifierNet::from_net(src)?, &fresh, TransplantMode::BackboneOnly)
                }
                NetKind::Segmenter => {
                    transplant_backbone(&SegmenterNet::from_net(src)?, &fresh, TransplantMode::BackboneOnly)
                }
            }
        }
        InitSpec::Full(path) => {
            let src = SegmenterNet::from_net(load_net(path)?)?;
            if src.num_classes() != num_classes {
                return Err(Error::Architecture(format!(
                    "checkpoint has {} classes, dataset has {num_classes}",
                    src.num_classes()
                )));
            }
            let fresh = SegmenterNet::init(src.arch().trunk.clone(), num_classes, seed)?;
            transplant_backbone(&src, &fresh, TransplantMode::Full)
        }
    }
}

pub fn synth(a: &SynthArgs) -> Result<Status> {
    let cfg = BlobConfig::new(a.size, a.classes, a.noise, a.count);
    let samples = synth_blob_dataset(&cfg, a.seed)?;
    let meta = json!({
        "image_size": cfg.image_size,
        "num_classes": cfg.num_classes,
        "noise_level": cfg.noise_level,
        "channels": cfg.channels,
        "count": cfg.count,
        "seed": a.seed,
    });
    write_labeled_dir(&a.out, &samples, &meta)?;
    write_runspec(&a.out, "synth", a)?;
    println!("wrote {} image/mask pairs to {}", samples.len(), a.out.display());
    Ok(Status::Ok)
}

/// Seed of model `index` in a run seeded with `seed`.
pub fn model_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(1000).wrapping_add(index as u64)
}

pub fn train_classifiers(a: &TrainClassifiersArgs) -> Result<Status> {
    if a.models == 0 {
        return Err(Error::Config("--models must be >= 1".into()));
    }
    require_dir(&a.data, "dataset")?;
    let items = load_labeled_dir(&a.data, false)?;
    let k = class_count(&a.data, &items)?;
    let samples: Vec<(Image, usize)> = items.iter().map(|i| (i.image.clone(), i.class_id)).collect();
    let trunk = a.net.trunk(samples[0].0.channels());
    make_dir(&a.out)?;

    let results = (0..a.models)
        .into_par_iter()
        .map(|i| {
            let seed = model_seed(a.seed, i);
            let cfg = a.train.config(20, 15, a.lr, seed, Schedule::StepDecay);
            let (mut net, log) = train_classifier(ClassifierNet::init(trunk.clone(), k, seed)?, &samples, &cfg)?;
            // Score the weights exactly as they will be stored.
            net.net_mut().round_to_f32();
            let accuracy = classification_accuracy(&net, &samples)?;
            Ok((net, log, accuracy))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = Vec::with_capacity(results.len());
    let mut below = 0;
    for (i, (net, log, accuracy)) in results.iter().enumerate() {
        let file = format!("cls_{i:02}.tnet");
        save_checkpoint(net.net(), a.out.join(&file))?;
        log.save(a.out.join(format!("cls_{i:02}.log.jsonl")))?;
        below += usize::from(*accuracy < a.accuracy_floor);
        let line = json!({
            "model": i,
            "checkpoint": file,
            "seed": model_seed(a.seed, i),
            "train_accuracy": accuracy,
            "final_loss": log.final_loss(),
        });
        println!("{line}");
        report.push(line);
    }
    write_text(&a.out.join(ACCURACY_REPORT_FILE), &jsonl(&report))?;
    write_runspec(&a.out, "train-classifiers", a)?;
    if below > 0 {
        eprintln!(
            "{below} of {} models stayed below the accuracy floor {}",
            a.models, a.accuracy_floor
        );
        return Ok(Status::QualityFloorUnmet);
    }
    Ok(Status::Ok)
}

/// Classifier checkpoints in `dir`, ordered by file name.
pub fn load_classifiers(dir: &Path) -> Result<Vec<ClassifierNet>> {
    require_dir(dir, "models directory")?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tnet"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .tnet checkpoints in {}", dir.display())));
    }
    paths.iter().map(|p| ClassifierNet::from_net(load_net(p)?)).collect()
}

pub fn build(a: &BuildArgs) -> Result<Status> {
    require_dir(&a.data, "dataset")?;
    let models = load_classifiers(&a.models_dir)?;
    let inputs: Vec<BuildInput> = load_labeled_dir(&a.data, false)?
        .into_iter()
        .map(|i| BuildInput {
            name: i.name,
            image: i.image,
            class_id: i.class_id,
        })
        .collect();
    let options = BuildOptions {
        smoothgrad: SmoothGradConfig {
            samples: a.samples,
            noise_sigma: a.sigma,
            seed: a.seed,
            reduction: ChannelReduction::Max,
        },
        workers: a.workers,
    };
    let report = build_dataset(&inputs, &models, &options, &a.out)?;
    write_runspec(&a.out, "build", a)?;
    println!(
        "{} images, {} records, {} skipped, mean top-decile fraction {:.4}, {:.1}s",
        report.images_processed,
        report.emitted,
        report.degenerate_skipped,
        report.d9_pixel_fraction,
        report.wall_time_s
    );
    Ok(Status::Ok)
}

/// Pairs each record of a PSSL directory with its source image from `data`.
pub fn load_pssl_samples(data: &Path, pssl: &Path) -> Result<(Vec<PsslSample>, usize)> {
    require_dir(data, "dataset")?;
    require_dir(pssl, "PSSL directory")?;
    let items = load_labeled_dir(data, false)?;
    let k = class_count(data, &items)?;
    let by_name: HashMap<&str, &Image> = items.iter().map(|i| (i.name.as_str(), &i.image)).collect();
    let samples = read_pssl_dir(pssl)?
        .into_iter()
        .map(|e| {
            let image = by_name
                .get(e.name.as_str())
                .ok_or_else(|| Error::Config(format!("record {} has no image in {}", e.name, data.display())))?;
            Ok(PsslSample {
                image: (*image).clone(),
                deciles: e.deciles,
                class_id: e.class_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(Error::Config(format!("{} holds no records", pssl.display())));
    }
    Ok((samples, k))
}

pub fn pretrain(a: &PretrainArgs) -> Result<Status> {
    let (samples, k) = load_pssl_samples(&a.data, &a.pssl)?;
    let net = init_segmenter(&a.init, a.net.trunk(samples[0].image.channels()), k, a.seed)?;
    let weights = ClassWeights::with_background(k, a.bg_weight)?;
    let cfg = a.train.config(30, 20, a.lr, a.seed, Schedule::StepDecay);
    let (net, log) = trainkit::pretrain(net, &samples, &weights, &cfg)?;
    make_dir(&a.out)?;
    save_checkpoint(net.net(), a.out.join(SEGMENTER_FILE))?;
    log.save(a.out.join(TRAIN_LOG_FILE))?;
    write_runspec(&a.out, "pretrain", a)?;
    println!(
        "pre-trained {} epochs on {} records, final loss {:.5}",
        log.epochs.len(),
        samples.len(),
        log.final_loss().unwrap_or(f64::NAN)
    );
    Ok(Status::Ok)
}

pub fn finetune(a: &FinetuneArgs) -> Result<Status> {
    if a.lr.is_empty() {
        return Err(Error::Config("--lr needs at least one value".into()));
    }
    require_dir(&a.data, "dataset")?;
    let items = load_labeled_dir(&a.data, true)?;
    let k = class_count(&a.data, &items)?;
    let train = seg_samples(&items)?;
    let net = init_segmenter(&a.init, a.net.trunk(train[0].image.channels()), k, a.seed)?;
    let cfg = a.train.config(10, 10, a.lr[0], a.seed, Schedule::Polynomial);
    make_dir(&a.out)?;
    let (net, log) = if a.lr.len() == 1 {
        trainkit::finetune(net, &train, &cfg)?
    } else {
        let val_dir = a
            .val
            .as_ref()
            .ok_or_else(|| Error::Config("an lr grid needs --val".into()))?;
        require_dir(val_dir, "validation set")?;
        let val = seg_samples(&load_labeled_dir(val_dir, true)?)?;
        let search = finetune_grid(&net, &train, &val, &cfg, &a.lr)?;
        let lines: Vec<Value> = search
            .scores
            .iter()
            .map(|(lr, m)| json!({ "lr": lr, "val_miou": m, "selected": *lr == search.best_lr }))
            .collect();
        write_text(&a.out.join(GRID_REPORT_FILE), &jsonl(&lines))?;
        println!(
            "selected lr {} with validation mIoU {:.4}",
            search.best_lr, search.best_miou
        );
        (search.net, search.log)
    };
    save_checkpoint(net.net(), a.out.join(SEGMENTER_FILE))?;
    log.save(a.out.join(TRAIN_LOG_FILE))?;
    write_runspec(&a.out, "finetune", a)?;
    println!("fine-tuned {} epochs on {} images", log.epochs.len(), train.len());
    Ok(Status::Ok)
}

/// Largest |dL/dlogit| over background pixels with a zero background weight,
/// and the number of such pixels.
pub fn background_annihilation(net: &SegmenterNet, sample: &PsslSample) -> Result<(f64, usize)> {
    let k = net.num_classes();
    let mask = extract_mask(&sample.deciles, sample.class_id, k)?;
    let weights = ClassWeights::with_background(k, 0.0)?;
    let (logits, _) = net.net().forward(&sample.image)?;
    let (_, grad) = weighted_ce(&softmax_rows(&logits, k + 1), mask.labels(), &weights)?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (row, &label) in grad.chunks(k + 1).zip(mask.labels()) {
        if label as usize == k {
            count += 1;
            worst = row.iter().fold(worst, |m, g| m.max(g.abs()));
        }
    }
    Ok((worst, count))
}

pub struct SweepData<'a> {
    pub pssl: &'a [PsslSample],
    pub train: &'a [SegSample],
    pub val: &'a [SegSample],
    pub num_classes: usize,
}

/// Validation mIoU after pre-training with `bg_weight` and fine-tuning.
pub fn sweep_cell(a: &SweepArgs, data: &SweepData, bg_weight: f64, seed: u64) -> Result<f64> {
    let trunk = a.net.trunk(data.pssl[0].image.channels());
    let net = init_segmenter(&a.init, trunk, data.num_classes, seed)?;
    let weights = ClassWeights::with_background(data.num_classes, bg_weight)?;
    let pre = TrainConfig {
        epochs: a.pretrain_epochs,
        batch_size: a.batch_size,
        base_lr: a.lr,
        schedule: Schedule::StepDecay,
        step_decay_epoch: (a.pretrain_epochs * 2).div_ceil(3),
        seed,
        ..TrainConfig::default()
    };
    let (net, _) = trainkit::pretrain(net, data.pssl, &weights, &pre)?;
    let fine = TrainConfig {
        epochs: a.finetune_epochs,
        base_lr: a.finetune_lr,
        schedule: Schedule::Polynomial,
        ..pre
    };
    let (net, _) = trainkit::finetune(net, data.train, &fine)?;
    Ok(miou(&evaluate_segmenter(&net, data.val, None)?)?.mean_iou)
}

fn mean_spread(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn sweep_bgweight(a: &SweepArgs) -> Result<Status> {
    if a.seeds.is_empty() {
        return Err(Error::Config("--seeds needs at least one seed".into()));
    }
    if a.bg_weights.is_empty() {
        return Err(Error::Config("--bg-weights needs at least one value".into()));
    }
    let (pssl, k) = load_pssl_samples(&a.data, &a.pssl)?;
    require_dir(&a.train, "fine-tuning set")?;
    require_dir(&a.val, "validation set")?;
    let train = seg_samples(&load_labeled_dir(&a.train, true)?)?;
    let val = seg_samples(&load_labeled_dir(&a.val, true)?)?;
    let data = SweepData {
        pssl: &pssl,
        train: &train,
        val: &val,
        num_classes: k,
    };
    let cells: Vec<(f64, u64)> = a
        .bg_weights
        .iter()
        .flat_map(|&w| a.seeds.iter().map(move |&s| (w, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<f64>> =
        pool.install(|| cells.par_iter().map(|&(w, s)| sweep_cell(a, &data, w, s)).collect());

    let mut lines = Vec::new();
    for (&(w, s), r) in cells.iter().zip(&results) {
        lines.push(match r {
            Ok(m) => json!({ "bg_weight": w, "seed": s, "miou": m }),
            Err(e) => {
                eprintln!("cell bg_weight={w} seed={s} failed: {e}");
                json!({ "bg_weight": w, "seed": s, "error": e.to_string() })
            }
        });
    }
    let mut table = format!("{:>10}  {:>8}  {:>8}  {:>5}\n", "bg_weight", "mIoU", "spread", "cells");
    let mut bars = Vec::new();
    for &w in &a.bg_weights {
        let ok: Vec<f64> = cells
            .iter()
            .zip(&results)
            .filter(|((cw, _), _)| *cw == w)
            .filter_map(|(_, r)| r.as_ref().ok().copied())
            .collect();
        if ok.is_empty() {
            table.push_str(&format!("{w:>10}  {:>8}  {:>8}  {:>5}\n", "-", "-", 0));
            continue;
        }
        let (mean, spread) = mean_spread(&ok);
        lines.push(json!({ "bg_weight": w, "mean_miou": mean, "spread": spread, "cells": ok.len() }));
        table.push_str(&format!("{w:>10}  {mean:>8.4}  {spread:>8.4}  {:>5}\n", ok.len()));
        bars.push(Bar {
            label: format!("{w}"),
            value: mean,
            spread: Some(spread),
        });
    }
    let probe = SegmenterNet::init(a.net.trunk(pssl[0].image.channels()), k, a.seeds[0])?;
    let (worst, bg_pixels) = background_annihilation(&probe, &pssl[0])?;
    lines.push(json!({
        "check": "background_annihilation",
        "bg_weight": 0.0,
        "background_pixels": bg_pixels,
        "max_abs_background_grad": worst,
        "holds": worst == 0.0,
    }));
    table.push_str(&format!(
        "\nbackground weight 0: max |grad| over {bg_pixels} background pixels = {worst:e}\n"
    ));
    table.push_str("\nreference ranking, published large-scale run (bg_weight: mIoU %)\n");
    for (w, m) in REFERENCE_BG_MIOU {
        table.push_str(&format!("{w:>10}  {m:>8.1}\n"));
    }
    debug_assert_eq!(REFERENCE_BG_MIOU.map(|(w, _)| w), BACKGROUND_WEIGHT_GRID);

    make_dir(&a.out)?;
    write_text(&a.out.join(SWEEP_REPORT_FILE), &jsonl(&lines))?;
    write_text(&a.out.join(SWEEP_TABLE_FILE), &table)?;
    write_text(
        &a.out.join(SWEEP_PLOT_FILE),
        &bar_chart_svg("validation mIoU by background weight", &bars, 1.0),
    )?;
    write_runspec(&a.out, "sweep-bgweight", a)?;
    print!("{table}");
    Ok(Status::Ok)
}

pub fn eval(a: &EvalArgs) -> Result<Status> {
    let net = load_segmenter(&a.checkpoint)?;
    require_dir(&a.data, "dataset")?;
    let items = load_labeled_dir(&a.data, true)?;
    let samples = seg_samples(&items)?;
    let report = miou(&evaluate_segmenter(&net, &samples, a.ignore_index)?)?;
    print!("{}", report.to_table());
    let mut records = report.to_records();
    if a.classify {
        let mut correct = 0;
        for item in &items {
            let (class_id, _) = classify_by_pixel_average_with(&net, &item.image, a.include_background)?;
            correct += usize::from(class_id == item.class_id);
        }
        let accuracy = correct as f64 / items.len() as f64;
        println!("top1_accuracy\t{accuracy:.4}");
        records.push_str(&json!({ "metric": "top1_accuracy", "value": accuracy }).to_string());
        records.push('\n');
    }
    if let Some(out) = &a.out {
        make_dir(out)?;
        write_text(&out.join(METRICS_FILE), &records)?;
        write_text(&out.join("metrics.txt"), &report.to_table())?;
        write_runspec(out, "eval", a)?;
    }
    Ok(Status::Ok)
}

fn metric_bars(text: &str) -> Result<Vec<Bar>> {
    let mut bars = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            detail: e.to_string(),
        })?;
        let Some(value) = v.get("value").and_then(Value::as_f64) else {
            continue;
        };
        let label = match (v.get("metric").and_then(Value::as_str), v.get("class")) {
            (Some("iou"), Some(c)) => format!("class {c}"),
            (Some(name), _) => name.to_string(),
            _ => continue,
        };
        bars.push(Bar {
            label,
            value,
            spread: None,
        });
    }
    Ok(bars)
}

pub fn inspect(a: &InspectArgs) -> Result<Status> {
    if a.record.is_none() && a.checkpoint.is_none() && a.metrics.is_none() {
        return Err(Error::Config(
            "nothing to inspect: pass --record, --checkpoint or --metrics".into(),
        ));
    }
    let image = match &a.image {
        Some(p) if !p.is_file() => return Err(Error::Config(format!("image {} does not exist", p.display()))),
        Some(p) => Some(load_image(p)?),
        None => None,
    };
    make_dir(&a.out)?;
    if let Some(path) = &a.record {
        if !path.is_file() {
            return Err(Error::Config(format!("record {} does not exist", path.display())));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (dmap, class_id) = unpack_record(&bytes)?;
        save_image(&decile_heatmap(&dmap), a.out.join("deciles.ppm"))?;
        let legend: String = DECILE_PALETTE
            .iter()
            .enumerate()
            .map(|(d, [r, g, b])| format!("D{d}\t#{r:02x}{g:02x}{b:02x}\n"))
            .collect();
        write_text(&a.out.join("deciles_legend.txt"), &legend)?;
        if let Some(image) = &image {
            if dmap.top_decile_count() == 0 {
                eprintln!("warning: record has no top-decile pixels; overlay equals the input image");
            }
            save_image(&d9_overlay(image, &dmap)?, a.out.join("d9_overlay.ppm"))?;
        }
        println!(
            "record {}: {}x{}, class {class_id}",
            path.display(),
            dmap.width(),
            dmap.height()
        );
    }
    if let Some(path) = &a.checkpoint {
        let image = image
            .as_ref()
            .ok_or_else(|| Error::Config("--checkpoint needs --image".into()))?;
        let net = load_segmenter(path)?;
        let mask = net.predict_mask(image)?;
        let k = net.num_classes();
        save_image(
            &colorize_mask(&mask, image.width(), image.height(), k)?,
            a.out.join("predicted_mask.ppm"),
        )?;
        write_text(&a.out.join("predicted_mask_legend.txt"), &mask_legend(k))?;
    }
    if let Some(path) = &a.metrics {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bars = metric_bars(&text)?;
        write_text(&a.out.join("metrics.svg"), &bar_chart_svg("metrics", &bars, 1.0))?;
    }
    write_runspec(&a.out, "inspect", a)?;
    Ok(Status::Ok)
}
