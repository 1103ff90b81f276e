use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// One `<record_path>\t<class_id>` line of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub record_path: String,
    pub class_id: usize,
}

impl ManifestEntry {
    pub fn new(record_path: impl Into<String>, class_id: usize) -> Self {
        Self {
            record_path: record_path.into(),
            class_id,
        }
    }
}

/// Parses manifest text. Blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let line_no = idx + 1;
        let (path, class) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            detail: "expected <record_path>\\t<class_id>".into(),
        })?;
        if path.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                detail: "empty record path".into(),
            });
        }
        let class_id = class.trim().parse::<usize>().map_err(|_| Error::Parse {
            line: line_no,
            detail: format!("class id {class:?} is not a non-negative integer"),
        })?;
        entries.push(ManifestEntry::new(path, class_id));
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{}\t{}\n", e.record_path, e.class_id))
        .collect()
}

pub fn save_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_manifest(entries)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        assert_eq!(
            parse_manifest("a.pssl\t3\n").unwrap(),
            vec![ManifestEntry::new("a.pssl", 3)]
        );
    }

    #[test]
    fn comments_and_blanks_skipped() {
        assert!(parse_manifest("# comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn space_delimiter_rejected_with_line_number() {
        let err = parse_manifest("a.pssl 3").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn non_integer_class_reports_its_line() {
        let err = parse_manifest("# hdr\na\t1\nb\tx\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn format_then_parse_is_identity() {
        let entries = vec![ManifestEntry::new("x/y.pssl", 0), ManifestEntry::new("z.ppm", 12)];
        assert_eq!(parse_manifest(&format_manifest(&entries)).unwrap(), entries);
    }
}
