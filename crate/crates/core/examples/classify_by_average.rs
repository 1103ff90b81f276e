//! Image-level classification with a segmenter: average the per-pixel softmax
//! over the image and take the best foreground class.
//!
//! cargo run --example classify_by_average -- <segmenter.tnet> <dataset dir>

use std::path::PathBuf;

use pssl_forge::evalkit::classify_by_pixel_average;
use pssl_forge::imagery::{load_image, load_manifest};
use pssl_forge::psslgen::MANIFEST_FILE;
use pssl_forge::toynets::{load_checkpoint, Network, SegmenterNet};

fn main() -> pssl_forge::Result<()> {
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let [ckpt, dir] = args.as_slice() else {
        eprintln!("usage: classify_by_average <segmenter.tnet> <dataset dir>");
        std::process::exit(2);
    };
    let net = SegmenterNet::from_net(load_checkpoint(ckpt)?)?;
    let k = net.num_classes();

    // confusion[truth][predicted]
    let mut confusion = vec![vec![0usize; k]; k];
    let mut mean_probs = vec![0.0; k + 1];
    let entries = load_manifest(dir.join(MANIFEST_FILE))?;
    for e in &entries {
        let (pred, probs) = classify_by_pixel_average(&net, &load_image(dir.join(&e.record_path))?)?;
        confusion[e.class_id][pred] += 1;
        mean_probs
            .iter_mut()
            .zip(&probs)
            .for_each(|(m, p)| *m += p / entries.len() as f64);
    }

    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    println!(
        "top-1 {:.3} over {} images",
        correct as f64 / entries.len() as f64,
        entries.len()
    );
    println!("truth \\ predicted");
    for (c, row) in confusion.iter().enumerate() {
        println!("{c:>5}  {row:?}");
    }
    println!("mean probability per output (background last): {mean_probs:.3?}");
    Ok(())
}
