//! Pixel renderings (PPM) and bar charts (SVG) for `inspect` and sweeps.

use std::fmt::Write as _;

use crate::imagery::Image;
use crate::psslgen::{DecileMap, TOP_DECILE};
use crate::{Error, Result};

/// Decile colors, dark blue for decile 0 through red for decile 9.
pub const DECILE_PALETTE: [[u8; 3]; 10] = [
    [48, 18, 59],
    [65, 69, 171],
    [62, 115, 238],
    [33, 164, 225],
    [26, 209, 171],
    [100, 243, 101],
    [181, 246, 52],
    [240, 203, 58],
    [250, 138, 36],
    [215, 40, 10],
];

/// Foreground class colors, reused cyclically past eight classes.
pub const CLASS_PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [255, 225, 25],
    [240, 50, 230],
    [70, 240, 240],
    [245, 130, 48],
    [145, 30, 180],
];

pub const BACKGROUND_COLOR: [u8; 3] = [0, 0, 0];

/// Blend color for top-decile pixels in overlays.
pub const OVERLAY_COLOR: [f64; 3] = [1.0, 0.0, 0.0];

fn from_rgb_bytes(width: usize, height: usize, bytes: impl Iterator<Item = [u8; 3]>) -> Image {
    let data = bytes.flat_map(|c| c.map(|v| f64::from(v) / 255.0)).collect();
    Image::new(width, height, 3, data).expect("palette values are in range")
}

pub fn decile_heatmap(dmap: &DecileMap) -> Image {
    from_rgb_bytes(
        dmap.width(),
        dmap.height(),
        dmap.deciles().iter().map(|&d| DECILE_PALETTE[d as usize]),
    )
}

/// Top-decile pixels blended half way toward red; other pixels untouched.
pub fn d9_overlay(image: &Image, dmap: &DecileMap) -> Result<Image> {
    if (image.width(), image.height()) != (dmap.width(), dmap.height()) {
        return Err(Error::Shape("image and record sizes differ".into()));
    }
    let rgb = image.to_rgb();
    let mut data = rgb.data().to_vec();
    for (px, &d) in data.chunks_mut(3).zip(dmap.deciles()) {
        if d == TOP_DECILE {
            for (v, o) in px.iter_mut().zip(OVERLAY_COLOR) {
                *v = 0.5 * *v + 0.5 * o;
            }
        }
    }
    Image::new(rgb.width(), rgb.height(), 3, data)
}

pub fn class_color(label: u8, num_classes: usize) -> [u8; 3] {
    if label as usize >= num_classes {
        BACKGROUND_COLOR
    } else {
        CLASS_PALETTE[label as usize % CLASS_PALETTE.len()]
    }
}

pub fn colorize_mask(labels: &[u8], width: usize, height: usize, num_classes: usize) -> Result<Image> {
    if labels.len() != width * height {
        return Err(Error::Shape(format!("{} labels for {width}x{height}", labels.len())));
    }
    Ok(from_rgb_bytes(
        width,
        height,
        labels.iter().map(|&l| class_color(l, num_classes)),
    ))
}

/// `label \t name \t #rrggbb`, one line per class then background.
pub fn mask_legend(num_classes: usize) -> String {
    let mut out = String::new();
    for label in 0..=num_classes {
        let [r, g, b] = class_color(label as u8, num_classes);
        let name = if label == num_classes {
            "background".to_string()
        } else {
            format!("class_{label}")
        };
        let _ = writeln!(out, "{label}\t{name}\t#{r:02x}{g:02x}{b:02x}");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    /// Half-length of an error whisker.
    pub spread: Option<f64>,
}

/// Vertical bars on a 0..=`y_max` axis.
pub fn bar_chart_svg(title: &str, bars: &[Bar], y_max: f64) -> String {
    const W: f64 = 520.0;
    const H: f64 = 320.0;
    const LEFT: f64 = 50.0;
    const BOTTOM: f64 = 40.0;
    const TOP: f64 = 36.0;
    let plot_h = H - BOTTOM - TOP;
    let slot = (W - LEFT - 20.0) / bars.len().max(1) as f64;
    let y = |v: f64| H - BOTTOM - plot_h * (v / y_max).clamp(0.0, 1.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    for tick in 0..=4 {
        let v = y_max * tick as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#ddd"/><text x="{2}" y="{3:.2}" text-anchor="end">{v:.2}</text>"##,
            y(v),
            W - 20.0,
            LEFT - 4.0,
            y(v) + 4.0
        );
    }
    for (i, bar) in bars.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let w = slot * 0.7;
        let top = y(bar.value);
        let [r, g, b] = CLASS_PALETTE[i % CLASS_PALETTE.len()];
        let _ = writeln!(
            svg,
            r##"<rect x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
            H - BOTTOM - top
        );
        if let Some(s) = bar.spread {
            let cx = x + w / 2.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                y(bar.value - s),
                y(bar.value + s)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3}</text><text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x + w / 2.0,
            top - 4.0,
            bar.value,
            x + w / 2.0,
            H - BOTTOM + 16.0,
            escape(&bar.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::encode_image as pnm_bytes;
    use std::collections::BTreeSet;

    #[test]
    fn all_deciles_get_distinct_colors() {
        let d = DecileMap::new(10, 1, (0..10).collect()).unwrap();
        let bytes = pnm_bytes(&decile_heatmap(&d));
        let pixels: BTreeSet<&[u8]> = bytes[bytes.len() - 30..].chunks(3).collect();
        assert_eq!(pixels.len(), 10);
        assert_eq!(&bytes[bytes.len() - 3..], &DECILE_PALETTE[9]);
    }

    #[test]
    fn overlay_without_top_decile_is_identity() {
        let img = Image::filled(3, 2, 3, 0.4).unwrap();
        let d = DecileMap::new(3, 2, vec![0; 6]).unwrap();
        assert_eq!(d9_overlay(&img, &d).unwrap(), img);
        let d = DecileMap::new(3, 2, vec![0, 9, 0, 0, 0, 0]).unwrap();
        let o = d9_overlay(&img, &d).unwrap();
        for (v, want) in o.pixel(1, 0).iter().zip([0.7, 0.2, 0.2]) {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn legend_lists_background_last() {
        let l = mask_legend(2);
        assert_eq!(l.lines().count(), 3);
        assert!(l.ends_with("2\tbackground\t#000000\n"));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = bar_chart_svg(
            "a<b",
            &[Bar {
                label: "x".into(),
                value: 0.5,
                spread: Some(0.1),
            }],
            1.0,
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<rect").count(), 2);
    }
}
