//! Packs a decile map into the on-disk record and reads it back.

use pssl_forge::psslgen::{extract_mask, pack_record, record_len, unpack_record, DecileMap, HEADER_LEN};

fn main() -> pssl_forge::Result<()> {
    let (w, h) = (5, 3);
    let dmap = DecileMap::new(w, h, (0..w * h).map(|p| (p * 10 / (w * h)) as u8).collect())?;
    let bytes = pack_record(&dmap, 3)?;
    println!(
        "{} pixels -> {} bytes ({} header + nibbles)",
        w * h,
        bytes.len(),
        HEADER_LEN
    );
    assert_eq!(bytes.len(), record_len(w * h));
    println!("header {:02x?}", &bytes[..HEADER_LEN]);

    let (back, class_id) = unpack_record(&bytes)?;
    assert_eq!(back, dmap);
    let mask = extract_mask(&back, class_id, 4)?;
    for row in mask.labels().chunks(w) {
        println!("{row:?}");
    }
    Ok(())
}
