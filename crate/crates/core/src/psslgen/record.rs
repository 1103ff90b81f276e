//! Packed PSSL records: 4 bits per pixel.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PSSL"
//! 4       2     width  (u16 LE)
//! 6       2     height (u16 LE)
//! 8       2     tag    (u16 LE): low 12 bits class id, high 4 bits format version
//! 10      ...   deciles, row-major, two per byte, first pixel in the low nibble;
//!               an odd pixel count pads the last high nibble with 0xF
//! ```

use super::decile::DecileMap;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PSSL";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 10;
pub const MAX_CLASS_ID: usize = 0x0FFF;
const PAD: u8 = 0xF;

/// Total size of a record holding `pixels` deciles.
pub fn record_len(pixels: usize) -> usize {
    HEADER_LEN + pixels.div_ceil(2)
}

pub fn pack_record(dmap: &DecileMap, class_id: usize) -> Result<Vec<u8>> {
    let (w, h) = (dmap.width(), dmap.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::format("width", format!("{w}x{h} exceeds 65535 per side")));
    }
    if class_id > MAX_CLASS_ID {
        return Err(Error::format("class_id", format!("{class_id} exceeds {MAX_CLASS_ID}")));
    }
    let mut out = Vec::with_capacity(record_len(dmap.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&((VERSION << 12) | class_id as u16).to_le_bytes());
    for pair in dmap.deciles().chunks(2) {
        let hi = pair.get(1).copied().unwrap_or(PAD);
        out.push(pair[0] | (hi << 4));
    }
    Ok(out)
}

pub fn unpack_record(bytes: &[u8]) -> Result<(DecileMap, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            "header",
            format!("truncated: expected at least {HEADER_LEN} bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "not a PSSL record"));
    }
    let word = |i: usize| usize::from(u16::from_le_bytes([bytes[i], bytes[i + 1]]));
    let (w, h, tag) = (word(4), word(6), word(8));
    let version = (tag >> 12) as u16;
    if version != VERSION {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let class_id = tag & MAX_CLASS_ID;
    let n = w * h;
    if n == 0 {
        return Err(Error::format("width", format!("degenerate size {w}x{h}")));
    }
    let expected = record_len(n);
    if bytes.len() != expected {
        return Err(Error::format(
            "payload",
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let mut deciles = Vec::with_capacity(n);
    for (i, &b) in bytes[HEADER_LEN..].iter().enumerate() {
        for (k, nibble) in [b & 0xF, b >> 4].into_iter().enumerate() {
            let pixel = 2 * i + k;
            if pixel >= n {
                break;
            }
            if nibble > 9 {
                return Err(Error::format(
                    "payload",
                    format!("pixel {pixel} holds nibble {nibble:#x}, outside 0..=9"),
                ));
            }
            deciles.push(nibble);
        }
    }
    Ok((DecileMap::new(w, h, deciles)?, class_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn payload(deciles: Vec<u8>) -> Vec<u8> {
        let n = deciles.len();
        pack_record(&DecileMap::new(n, 1, deciles).unwrap(), 0).unwrap()[HEADER_LEN..].to_vec()
    }

    #[test]
    fn nibble_order() {
        assert_eq!(payload(vec![9, 3]), vec![0x39]);
    }

    #[test]
    fn odd_count_pads_high_nibble() {
        assert_eq!(payload(vec![7]), vec![0xF7]);
    }

    #[test]
    fn sixteen_square_is_128_payload_bytes() {
        let d = DecileMap::new(16, 16, vec![4; 256]).unwrap();
        assert_eq!(pack_record(&d, 3).unwrap().len(), HEADER_LEN + 128);
    }

    #[test]
    fn header_layout() {
        let d = DecileMap::new(3, 2, vec![0, 1, 2, 3, 4, 5]).unwrap();
        let bytes = pack_record(&d, 999).unwrap();
        assert_eq!(&bytes[..4], b"PSSL");
        assert_eq!(&bytes[4..10], &[3, 0, 2, 0, 0xE7, 0x13]);
    }

    #[test]
    fn rejects_out_of_range_nibble() {
        let mut bytes = pack_record(&DecileMap::new(2, 1, vec![1, 2]).unwrap(), 1).unwrap();
        bytes[HEADER_LEN] = 0x2A;
        let err = unpack_record(&bytes).unwrap_err();
        assert!(err.to_string().contains("pixel 0"), "{err}");
    }

    #[test]
    fn truncation_reports_lengths() {
        let bytes = pack_record(&DecileMap::new(4, 4, vec![1; 16]).unwrap(), 1).unwrap();
        let err = unpack_record(&bytes[..bytes.len() - 3]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 18") && msg.contains("found 15"), "{msg}");
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = pack_record(&DecileMap::new(1, 1, vec![1]).unwrap(), 1).unwrap();
        bytes[9] = 0x20;
        assert!(matches!(
            unpack_record(&bytes),
            Err(Error::Format { field: "version", .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(
            unpack_record(&bytes),
            Err(Error::Format { field: "magic", .. })
        ));
    }

    #[test]
    fn oversized_inputs_rejected() {
        let wide = DecileMap::new(65_536, 1, vec![0; 65_536]).unwrap();
        assert!(pack_record(&wide, 0).is_err());
        assert!(pack_record(&DecileMap::new(1, 1, vec![0]).unwrap(), 4096).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_bijection(
            w in 1usize..20, h in 1usize..20, class_id in 0usize..=MAX_CLASS_ID,
            seed in proptest::collection::vec(0u8..10, 400),
        ) {
            let d = DecileMap::new(w, h, seed[..w * h].to_vec()).unwrap();
            let bytes = pack_record(&d, class_id).unwrap();
            prop_assert_eq!(bytes.len(), record_len(w * h));
            let (back, c) = unpack_record(&bytes).unwrap();
            prop_assert_eq!(back, d);
            prop_assert_eq!(c, class_id);
        }
    }
}
