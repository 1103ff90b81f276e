//! Decile ranking, pseudo masks, packed records and the dataset builder.

mod builder;
mod decile;
mod record;

pub use builder::{
    build_dataset, per_model_saliency, pseudo_deciles, read_pssl_dir, BuildInput, BuildOptions, BuildReport, PsslEntry,
    INCOMPLETE_MARKER, MANIFEST_FILE, REPORT_FILE,
};
pub use decile::{decile_quantize, extract_mask, DecileMap, PseudoLabelMask, TOP_DECILE};
pub use record::{pack_record, record_len, unpack_record, HEADER_LEN, MAX_CLASS_ID};
