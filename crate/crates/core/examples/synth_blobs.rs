//! Generates a small blob dataset and prints what each sample looks like.

use pssl_forge::imagery::{save_image, save_mask, synth_blob_dataset, BlobConfig};

fn main() -> pssl_forge::Result<()> {
    let config = BlobConfig::new(16, 4, 0.2, 8);
    let samples = synth_blob_dataset(&config, 7)?;
    let out = std::env::temp_dir().join("pssl_synth_blobs");
    std::fs::create_dir_all(&out).map_err(|e| pssl_forge::Error::io(&out, e))?;

    for (i, s) in samples.iter().enumerate() {
        let background = config.num_classes as u8;
        let fg = s.mask.labels().iter().filter(|&&l| l != background).count();
        println!(
            "sample {i}: class {}, {fg} of {} pixels foreground",
            s.class_id,
            s.mask.labels().len()
        );
        save_image(&s.image, out.join(format!("img_{i}.ppm")))?;
        save_mask(&s.mask, out.join(format!("mask_{i}.pgm")))?;
    }
    println!("images and masks in {}", out.display());
    Ok(())
}
