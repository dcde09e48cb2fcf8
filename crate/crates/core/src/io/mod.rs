//! File formats: binary arrays, recording bundles, feature files, label and
//! vote CSVs, threshold JSON and the key = value training configuration.
//!
//! Every writer goes through [`atomic_write`], so a failed command never
//! leaves a partial output behind.

mod arrays;
mod bundle;
mod config;
mod feature_file;
mod tables;

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

pub use arrays::{read_array, read_array_from, write_array, write_array_to, ARRAY_MAGIC, ARRAY_VERSION};
pub use bundle::{read_recording_bundle, write_recording_bundle, BundleManifest, RecordingBundle, BUNDLE_FORMAT};
pub use config::{format_train_config, parse_train_config, read_train_config};
pub use feature_file::{
    read_feature_file, read_features_from, write_feature_file, write_features_to, ExtractionParams, FeatureBundle,
    Provenance, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use tables::{
    read_labels, read_thresholds, read_votes, write_json, write_labels, write_table, write_thresholds, write_votes, LABEL_COLUMNS,
    VOTE_HEADER,
};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn atomic_write(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    let mut w = BufWriter::new(tmp);
    f(&mut w)?;
    w.flush()?;
    let tmp = w.into_inner().map_err(|e| e.into_error())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut dyn std::io::Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_exact(r: &mut dyn std::io::Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => crate::Error::Format(format!("file truncated while reading {what}")),
        _ => crate::Error::Io(e),
    })
}

pub(crate) fn read_f32s(r: &mut dyn std::io::Read, n: usize, what: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn expect_end(r: &mut dyn std::io::Read) -> Result<()> {
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(crate::Error::Format("trailing bytes at end of file".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_write_leaves_old_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        std::fs::write(&path, "old").unwrap();
        let r = atomic_write(&path, |w| {
            w.write_all(b"partial")?;
            Err(crate::Error::Format("boom".into()))
        });
        assert!(r.is_err());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "old");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
