//! Renders a decile heatmap, a top-decile overlay and a colorized mask.

use pssl_forge::cli::visual::{colorize_mask, d9_overlay, decile_heatmap, mask_legend};
use pssl_forge::imagery::{save_image, synth_blob_dataset, BlobConfig};
use pssl_forge::psslgen::DecileMap;

fn main() -> pssl_forge::Result<()> {
    let sample = synth_blob_dataset(&BlobConfig::new(24, 3, 0.1, 1), 4)?.remove(0);
    let (w, h) = (sample.image.width(), sample.image.height());
    // Rank by distance from the centre, nearest pixels in the top decile.
    let mut order: Vec<usize> = (0..w * h).collect();
    let dist = |p: usize| (p % w).abs_diff(w / 2).pow(2) + (p / w).abs_diff(h / 2).pow(2);
    order.sort_by_key(|&p| std::cmp::Reverse(dist(p)));
    let mut deciles = vec![0u8; w * h];
    for (rank, &p) in order.iter().enumerate() {
        deciles[p] = (rank * 10 / (w * h)) as u8;
    }
    let dmap = DecileMap::new(w, h, deciles)?;

    let out = std::env::temp_dir().join("pssl_render_example");
    std::fs::create_dir_all(&out).map_err(|e| pssl_forge::Error::io(&out, e))?;
    save_image(&decile_heatmap(&dmap), out.join("deciles.ppm"))?;
    save_image(&d9_overlay(&sample.image, &dmap)?, out.join("d9_overlay.ppm"))?;
    save_image(&colorize_mask(sample.mask.labels(), w, h, 3)?, out.join("mask.ppm"))?;
    print!("{}", mask_legend(3));
    println!("renderings in {}", out.display());
    Ok(())
}
