//! Binary PGM (P5) and PPM (P6) with max value 255.

use std::fs;
use std::path::Path;

use super::{GroundTruthMask, Image};
use crate::{Error, Result};

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    payload_offset: usize,
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_number(bytes: &[u8], pos: usize, field: &'static str) -> Result<(usize, usize)> {
    let start = skip_space_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::format(field, "expected a decimal number"));
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("ascii digits");
    let value = text.parse::<usize>().map_err(|e| Error::format(field, e.to_string()))?;
    Ok((value, end))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::format("magic", "file shorter than the magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::format(
                "magic",
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let (width, pos) = read_number(bytes, 2, "width")?;
    let (height, pos) = read_number(bytes, pos, "height")?;
    let (maxval, pos) = read_number(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format("width", format!("degenerate size {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::format("maxval", format!("only 255 is supported, got {maxval}")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format("maxval", "missing whitespace before payload"));
    }
    Ok(Header {
        channels,
        width,
        height,
        payload_offset: pos + 1,
    })
}

fn payload<'a>(bytes: &'a [u8], header: &Header) -> Result<&'a [u8]> {
    let expected = header.width * header.height * header.channels;
    let actual = bytes.len() - header.payload_offset;
    if actual < expected {
        return Err(Error::format(
            "payload",
            format!("truncated: expected {expected} bytes, found {actual}"),
        ));
    }
    Ok(&bytes[header.payload_offset..header.payload_offset + expected])
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let header = parse_header(bytes)?;
    let data = payload(bytes, &header)?.iter().map(|&b| f64::from(b) / 255.0).collect();
    Image::new(header.width, header.height, header.channels, data)
}

/// Quantizes a `[0, 1]` value to a byte, rounding halves up.
pub(crate) fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn encode_image(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| to_byte(v)));
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&read(path.as_ref())?)
}

/// Writes a P5 for gray images and a P6 for color images.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_image(image))
}

/// Masks are stored as P5 files whose bytes are the raw class labels.
pub fn save_mask(mask: &GroundTruthMask, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend_from_slice(mask.labels());
    write(path.as_ref(), &out)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<GroundTruthMask> {
    let bytes = read(path.as_ref())?;
    let header = parse_header(&bytes)?;
    if header.channels != 1 {
        return Err(Error::format("magic", "label masks must be P5"));
    }
    GroundTruthMask::new(header.width, header.height, payload(&bytes, &header)?.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5(w: usize, h: usize, px: &[u8]) -> Vec<u8> {
        let mut v = format!("P5\n{w} {h}\n255\n").into_bytes();
        v.extend_from_slice(px);
        v
    }

    #[test]
    fn decodes_gray_bytes_by_scaling() {
        let img = decode_image(&p5(2, 2, &[0, 255, 128, 64])).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn decodes_color_pixel() {
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bitmap_magic() {
        let err = decode_image(b"P4\n1 1\n\x00").unwrap_err();
        assert!(matches!(err, Error::Format { field: "magic", .. }), "{err}");
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode_image(b"P5\n# made by hand\n1 # width done\n1\n255\n\x80").unwrap();
        assert_eq!(img.data(), &[128.0 / 255.0]);
    }

    #[test]
    fn rejects_16_bit_maxval() {
        let err = decode_image(b"P5\n1 1\n65535\n\x00\x00").unwrap_err();
        assert!(matches!(err, Error::Format { field: "maxval", .. }), "{err}");
    }

    #[test]
    fn truncated_payload_reports_lengths() {
        let err = decode_image(&p5(2, 2, &[1, 2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 4") && msg.contains("found 3"), "{msg}");
    }

    #[test]
    fn round_trip_preserves_bytes() {
        let bytes = p5(2, 2, &[0, 255, 128, 64]);
        assert_eq!(encode_image(&decode_image(&bytes).unwrap()), bytes);
    }

    #[test]
    fn half_rounds_up() {
        let img = Image::new(1, 1, 1, vec![0.5]).unwrap();
        assert_eq!(*encode_image(&img).last().unwrap(), 128);
    }

    #[test]
    fn color_images_write_p6() {
        let img = Image::filled(2, 1, 3, 0.25).unwrap();
        assert!(encode_image(&img).starts_with(b"P6\n"));
    }

    #[test]
    fn mask_round_trip_keeps_raw_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mask = GroundTruthMask::new(3, 1, vec![0, 4, 2]).unwrap();
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let img = Image::filled(1, 1, 1, 0.0).unwrap();
        let err = save_image(&img, "/nonexistent-dir/x.pgm").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    proptest::proptest! {
        #[test]
        fn save_load_within_one_quantum(
            w in 1usize..6, h in 1usize..6, color in proptest::bool::ANY,
            seed in proptest::collection::vec(0.0f64..=1.0, 75)
        ) {
            let c = if color { 3 } else { 1 };
            let data: Vec<f64> = seed.into_iter().take(w * h * c).collect();
            let img = Image::new(w, h, c, data).unwrap();
            let back = decode_image(&encode_image(&img)).unwrap();
            for (a, b) in img.data().iter().zip(back.data()) {
                proptest::prop_assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
    }
}
