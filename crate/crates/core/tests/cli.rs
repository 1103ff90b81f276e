use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pssl_forge::cli::{self, EXIT_CONFIG, EXIT_OK, EXIT_QUALITY};
use pssl_forge::imagery::{save_image, save_manifest, save_mask, GroundTruthMask, Image, ManifestEntry};
use pssl_forge::psslgen::{pack_record, DecileMap, MANIFEST_FILE};
use pssl_forge::toynets::{save_checkpoint, Net, NetArch, TrunkArch};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("pssl").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        out.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&path).unwrap(),
        );
    }
    out
}

fn synth(tmp: &TempDir, name: &str, count: &str, seed: &str) -> std::path::PathBuf {
    let dir = tmp.path().join(name);
    let code = run(&[
        "synth",
        "--size",
        "8",
        "--classes",
        "2",
        "--count",
        count,
        "--seed",
        seed,
        "--out",
        s(&dir),
    ]);
    assert_eq!(code, EXIT_OK);
    dir
}

fn classifiers(tmp: &TempDir, data: &Path, name: &str, floor: &str) -> (std::path::PathBuf, i32) {
    let dir = tmp.path().join(name);
    let code = run(&[
        "train-classifiers",
        "--data",
        s(data),
        "--models",
        "2",
        "--widths",
        "4",
        "--epochs",
        "2",
        "--accuracy-floor",
        floor,
        "--out",
        s(&dir),
    ]);
    (dir, code)
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = synth(&tmp, "a", "6", "3");
    let b = synth(&tmp, "b", "6", "3");
    let c = synth(&tmp, "c", "6", "4");
    assert_eq!(tree(&a), tree(&b));
    assert_ne!(tree(&a), tree(&c));
    assert!(a.join(MANIFEST_FILE).is_file() && a.join("runspec.json").is_file());
}

#[test]
fn bad_arguments_exit_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(run(&["synth", "--classes", "1", "--out", s(&out)]), EXIT_CONFIG);
    assert_eq!(run(&["synth", "--bogus"]), EXIT_CONFIG);
    assert_eq!(
        run(&["eval", "--checkpoint", "missing.tnet", "--data", s(&out)]),
        EXIT_CONFIG
    );
    assert_eq!(run(&["inspect", "--out", s(&out)]), EXIT_CONFIG);
}

#[test]
fn classifier_floor_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let data = synth(&tmp, "data", "12", "1");
    let (a, code) = classifiers(&tmp, &data, "a", "0");
    assert_eq!(code, EXIT_OK);
    let (b, _) = classifiers(&tmp, &data, "b", "0");
    assert_eq!(tree(&a), tree(&b));
    assert!(a.join("cls_00.tnet").is_file() && a.join("cls_01.tnet").is_file());
    let report = fs::read_to_string(a.join("accuracy_report.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 2);

    let (_, code) = classifiers(&tmp, &data, "strict", "1.01");
    assert_eq!(code, EXIT_QUALITY);
}

#[test]
fn build_needs_models() {
    let tmp = TempDir::new().unwrap();
    let data = synth(&tmp, "data", "4", "1");
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = tmp.path().join("pssl");
    let code = run(&["build", "--data", s(&data), "--models-dir", s(&empty), "--out", s(&out)]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn build_pretrain_finetune_chain() {
    let tmp = TempDir::new().unwrap();
    let data = synth(&tmp, "data", "8", "1");
    let (cls, _) = classifiers(&tmp, &data, "cls", "0");
    let pssl = tmp.path().join("pssl");
    let code = run(&[
        "build",
        "--data",
        s(&data),
        "--models-dir",
        s(&cls),
        "--samples",
        "2",
        "--out",
        s(&pssl),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        fs::read_dir(&pssl)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pssl"))
            .count(),
        8
    );

    let backbone = format!("backbone:{}", s(&cls.join("cls_00.tnet")));
    let pre = tmp.path().join("pre");
    let code = run(&[
        "pretrain",
        "--data",
        s(&data),
        "--pssl",
        s(&pssl),
        "--init",
        &backbone,
        "--epochs",
        "1",
        "--out",
        s(&pre),
    ]);
    assert_eq!(code, EXIT_OK);
    let log = fs::read_to_string(pre.join("train_log.jsonl")).unwrap();
    assert!(log.contains("final_checksum"));

    let full = format!("full:{}", s(&pre.join("segmenter.tnet")));
    let ft = tmp.path().join("ft");
    let code = run(&[
        "finetune",
        "--data",
        s(&data),
        "--val",
        s(&data),
        "--init",
        &full,
        "--lr",
        "0.01,0.02",
        "--epochs",
        "1",
        "--out",
        s(&ft),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        fs::read_to_string(ft.join("grid_report.jsonl"))
            .unwrap()
            .lines()
            .count(),
        2
    );

    // A classifier has no segmentation head to copy.
    let wrong = format!("full:{}", s(&cls.join("cls_00.tnet")));
    let code = run(&[
        "finetune",
        "--data",
        s(&data),
        "--init",
        &wrong,
        "--epochs",
        "1",
        "--out",
        s(&ft),
    ]);
    assert_eq!(code, EXIT_CONFIG);

    let sweep = tmp.path().join("sweep");
    let base = [
        "sweep-bgweight",
        "--data",
        s(&data),
        "--pssl",
        s(&pssl),
        "--train",
        s(&data),
        "--val",
        s(&data),
        "--out",
        s(&sweep),
    ];
    assert_eq!(run(&[&base[..], &["--seeds", ""]].concat()), EXIT_CONFIG);
    assert_eq!(run(&[&base[..], &["--bg-weights", "-1"]].concat()), EXIT_CONFIG);
}

/// One-class segmenter keyed on the red channel: class 0 where red is 1,
/// background where it is 0.
fn oracle_checkpoint(path: &Path) {
    let arch = NetArch::segmenter(TrunkArch::new(3, [1]), 1);
    let layout = arch.layout();
    let mut params = vec![0.0; layout.total];
    // Centre tap of the red input channel.
    params[layout.get("conv0.weight").unwrap().offset + 12] = 1.0;
    let head = layout.get("head.weight").unwrap().offset;
    params[head] = 10.0;
    params[layout.get("head.bias").unwrap().offset + 1] = 5.0;
    save_checkpoint(&Net::from_params(arch, params).unwrap(), path).unwrap();
}

fn oracle_dataset(dir: &Path, mask_label: Option<u8>) {
    fs::create_dir_all(dir).unwrap();
    let mut manifest = Vec::new();
    for i in 0..3usize {
        let on: Vec<bool> = (0..16).map(|p| (p + i) % 3 == 0).collect();
        let data = on.iter().flat_map(|&b| [f64::from(u8::from(b)), 0.5, 0.5]).collect();
        let labels = on.iter().map(|&b| mask_label.unwrap_or(u8::from(!b))).collect();
        let name = format!("img_{i:05}.ppm");
        save_image(&Image::new(4, 4, 3, data).unwrap(), dir.join(&name)).unwrap();
        save_mask(
            &GroundTruthMask::new(4, 4, labels).unwrap(),
            dir.join(format!("mask_{i:05}.pgm")),
        )
        .unwrap();
        manifest.push(ManifestEntry::new(name, 0));
    }
    save_manifest(&manifest, dir.join(MANIFEST_FILE)).unwrap();
}

#[test]
fn eval_scores_a_perfect_segmenter() {
    let tmp = TempDir::new().unwrap();
    let ckpt = tmp.path().join("oracle.tnet");
    oracle_checkpoint(&ckpt);
    let data = tmp.path().join("data");
    oracle_dataset(&data, None);
    let out = tmp.path().join("eval");
    let code = run(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&data),
        "--classify",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let metrics = fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    let miou = metrics
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|v| v["metric"] == "miou")
        .unwrap();
    assert_eq!(miou["value"], 1.0);

    let ignored = tmp.path().join("ignored");
    oracle_dataset(&ignored, Some(1));
    let code = run(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&ignored),
        "--ignore-index",
        "1",
    ]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn inspect_renders_records() {
    let tmp = TempDir::new().unwrap();
    let image_path = tmp.path().join("img.ppm");
    let data = (0..20 * 3).map(|v| f64::from(v as u8 % 7) / 7.0).collect();
    save_image(&Image::new(5, 4, 3, data).unwrap(), &image_path).unwrap();

    let ranked = DecileMap::new(5, 4, (0..20).map(|p| (p / 2) as u8).collect()).unwrap();
    let record = tmp.path().join("r.pssl");
    fs::write(&record, pack_record(&ranked, 1).unwrap()).unwrap();
    let out = tmp.path().join("a");
    let code = run(&[
        "inspect",
        "--record",
        s(&record),
        "--image",
        s(&image_path),
        "--out",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let legend = fs::read_to_string(out.join("deciles_legend.txt")).unwrap();
    assert_eq!(legend.lines().count(), 10);
    assert_ne!(
        fs::read(out.join("d9_overlay.ppm")).unwrap(),
        fs::read(&image_path).unwrap()
    );

    let flat = DecileMap::new(5, 4, vec![0; 20]).unwrap();
    fs::write(&record, pack_record(&flat, 1).unwrap()).unwrap();
    let out = tmp.path().join("b");
    let code = run(&[
        "inspect",
        "--record",
        s(&record),
        "--image",
        s(&image_path),
        "--out",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        fs::read(out.join("d9_overlay.ppm")).unwrap(),
        fs::read(&image_path).unwrap()
    );
}
