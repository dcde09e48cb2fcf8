//! Recording bundles: a directory holding `manifest.json` and one array
//! file each for the channel data (channels x samples), electrode positions
//! (channels x 3), mixing matrix (channels x components) and component
//! activity (components x samples).

use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::arrays::{read_array, write_array};
use super::write_json;
use crate::error::{Error, Result};
use crate::features::Recording;

pub const BUNDLE_FORMAT: &str = "icclass-recording";
const BUNDLE_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub recording_id: String,
    pub sample_rate: f64,
    pub channel_data: String,
    pub electrode_positions: String,
    pub mixing_matrix: String,
    pub component_activity: String,
    /// Defaults to `ic1`, `ic2`, ... when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct RecordingBundle {
    pub recording_id: String,
    pub recording: Recording,
    pub component_ids: Vec<String>,
}

fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("ic{i}")).collect()
}

pub fn read_recording_bundle(dir: &Path) -> Result<RecordingBundle> {
    let manifest_path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::InvalidRecording(format!("{}: {e}", manifest_path.display())))?;
    let m: BundleManifest = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidRecording(format!("{}: {e}", manifest_path.display())))?;
    if m.format != BUNDLE_FORMAT {
        return Err(Error::InvalidRecording(format!("unknown bundle format {:?}", m.format)));
    }
    if m.version != BUNDLE_VERSION {
        return Err(Error::InvalidRecording(format!("unsupported bundle version {}", m.version)));
    }
    let positions = read_array(&dir.join(&m.electrode_positions))?;
    if positions.ncols() != 3 {
        return Err(Error::InvalidRecording(format!(
            "electrode positions must have 3 columns, got {}",
            positions.ncols()
        )));
    }
    let positions: Vec<[f64; 3]> = positions.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect();
    let recording = Recording::new(
        read_array(&dir.join(&m.channel_data))?,
        m.sample_rate,
        positions,
        read_array(&dir.join(&m.mixing_matrix))?,
        read_array(&dir.join(&m.component_activity))?,
    )?;
    let component_ids = m.component_ids.unwrap_or_else(|| default_ids(recording.n_components()));
    if component_ids.len() != recording.n_components() {
        return Err(Error::InvalidRecording(format!(
            "{} component ids for {} components",
            component_ids.len(),
            recording.n_components()
        )));
    }
    let unique: HashSet<&String> = component_ids.iter().collect();
    if unique.len() != component_ids.len() || component_ids.iter().any(|c| c.is_empty()) {
        return Err(Error::InvalidRecording("component ids must be unique and non-empty".into()));
    }
    Ok(RecordingBundle {
        recording_id: m.recording_id,
        recording,
        component_ids,
    })
}

/// Writes the arrays first and the manifest last.
pub fn write_recording_bundle(dir: &Path, bundle: &RecordingBundle) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let r = &bundle.recording;
    let positions = Array2::from_shape_fn((r.electrode_positions().len(), 3), |(i, j)| r.electrode_positions()[i][j]);
    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        recording_id: bundle.recording_id.clone(),
        sample_rate: r.sample_rate(),
        channel_data: "channel_data.bin".into(),
        electrode_positions: "electrode_positions.bin".into(),
        mixing_matrix: "mixing_matrix.bin".into(),
        component_activity: "component_activity.bin".into(),
        component_ids: (bundle.component_ids != default_ids(r.n_components())).then(|| bundle.component_ids.clone()),
    };
    write_array(&dir.join(&manifest.channel_data), r.channel_data())?;
    write_array(&dir.join(&manifest.electrode_positions), &positions)?;
    write_array(&dir.join(&manifest.mixing_matrix), r.mixing_matrix())?;
    write_array(&dir.join(&manifest.component_activity), r.component_activity())?;
    write_json(&dir.join(MANIFEST), &manifest)
}
