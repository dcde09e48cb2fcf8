//! Feature files.
//!
//! Layout (little-endian): magic `ICLF`, `u32` version, `u32` component
//! count, `u32` values per component (1224), a `u32`-length-prefixed JSON
//! provenance record, then per component a `u32`-length-prefixed UTF-8 id,
//! 1024 `f32` topography pixels (row-major), 1024 mask bytes, 100 `f32`
//! spectrum values and 100 `f32` autocorrelation values.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{atomic_write, expect_end, read_exact, read_f32s, read_u32};
use crate::error::{Error, Result};
use crate::features::{IcFeatures, ScalpTopography, ACF_LEN, FEATURE_SCALE, PSD_LEN, TOPO_SIZE};

pub const FEATURE_MAGIC: [u8; 4] = *b"ICLF";
pub const FEATURE_VERSION: u32 = 1;
const PIXELS: usize = TOPO_SIZE * TOPO_SIZE;
const VALUES_PER_COMPONENT: usize = PIXELS + PSD_LEN + ACF_LEN;
const MAX_TEXT: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub reference: String,
    pub topo_size: usize,
    pub psd_window_seconds: f64,
    pub psd_overlap: f64,
    pub psd_frequencies_hz: (usize, usize),
    pub autocorr_lags: usize,
    pub normalization_scale: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            reference: "common_average".into(),
            topo_size: TOPO_SIZE,
            psd_window_seconds: 1.0,
            psd_overlap: 0.5,
            psd_frequencies_hz: (1, PSD_LEN),
            autocorr_lags: ACF_LEN,
            normalization_scale: FEATURE_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub recording_id: String,
    pub sample_rate: Option<f64>,
    pub extraction: ExtractionParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub provenance: Provenance,
    pub components: Vec<(String, IcFeatures)>,
}

impl FeatureBundle {
    pub fn ids(&self) -> Vec<&str> {
        self.components.iter().map(|(id, _)| id.as_str()).collect()
    }

    pub fn features(&self) -> Vec<IcFeatures> {
        self.components.iter().map(|(_, f)| f.clone()).collect()
    }
}

fn put_u32(w: &mut dyn Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f32s<'a>(buf: &mut Vec<u8>, values: impl Iterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

pub fn write_features_to(bundle: &FeatureBundle, w: &mut dyn Write) -> Result<()> {
    let mut seen = HashSet::new();
    for (id, _) in &bundle.components {
        if id.is_empty() || !seen.insert(id) {
            return Err(Error::Format(format!("component id {id:?} is empty or repeated")));
        }
    }
    w.write_all(&FEATURE_MAGIC)?;
    put_u32(w, FEATURE_VERSION as usize)?;
    put_u32(w, bundle.components.len())?;
    put_u32(w, VALUES_PER_COMPONENT)?;
    let json = serde_json::to_vec(&bundle.provenance)?;
    put_u32(w, json.len())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(VALUES_PER_COMPONENT * 4 + PIXELS);
    for (id, f) in &bundle.components {
        put_u32(w, id.len())?;
        w.write_all(id.as_bytes())?;
        buf.clear();
        put_f32s(&mut buf, f.topo.pixels().iter());
        buf.extend(f.topo.mask().iter().map(|&m| m as u8));
        put_f32s(&mut buf, f.psd.iter());
        put_f32s(&mut buf, f.autocorr.iter());
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_text(r: &mut dyn Read, what: &str) -> Result<String> {
    let len = read_u32(r, what)?;
    if len > MAX_TEXT {
        return Err(Error::Format(format!("{what} length {len} is implausible")));
    }
    let mut bytes = vec![0u8; len as usize];
    read_exact(r, &mut bytes, what)?;
    String::from_utf8(bytes).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
}

pub fn read_features_from(r: &mut dyn Read) -> Result<FeatureBundle> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if magic != FEATURE_MAGIC {
        return Err(Error::Format("not a feature file (bad magic)".into()));
    }
    let version = read_u32(r, "version")?;
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!("unsupported feature file version {version}")));
    }
    let n = read_u32(r, "component count")? as usize;
    let per = read_u32(r, "values per component")? as usize;
    if per != VALUES_PER_COMPONENT {
        return Err(Error::Shape(format!("{per} values per component, expected {VALUES_PER_COMPONENT}")));
    }
    let provenance: Provenance = serde_json::from_str(&read_text(r, "provenance")?)?;
    let mut components = Vec::with_capacity(n.min(1 << 16));
    let mut seen = HashSet::new();
    for _ in 0..n {
        let id = read_text(r, "component id")?;
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(Error::Format(format!("component id {id:?} is empty or repeated")));
        }
        let pixels = read_f32s(r, PIXELS, "topography")?;
        let mut mask = vec![0u8; PIXELS];
        read_exact(r, &mut mask, "mask")?;
        if mask.iter().any(|&m| m > 1) {
            return Err(Error::Format(format!("component {id}: mask bytes must be 0 or 1")));
        }
        let psd = read_f32s(r, PSD_LEN, "spectrum")?;
        let acf = read_f32s(r, ACF_LEN, "autocorrelation")?;
        let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
        let topo = ScalpTopography::new(
            Array2::from_shape_vec((TOPO_SIZE, TOPO_SIZE), widen(pixels)).expect("sized"),
            Array2::from_shape_vec((TOPO_SIZE, TOPO_SIZE), mask.into_iter().map(|m| m == 1).collect()).expect("sized"),
        );
        let f = IcFeatures::new(topo, widen(psd), widen(acf))?;
        if f.psd.iter().chain(&f.autocorr).chain(f.topo.pixels().iter()).any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("component {id} has non-finite features")));
        }
        components.push((id, f));
    }
    expect_end(r)?;
    Ok(FeatureBundle { provenance, components })
}

pub fn write_feature_file(path: &Path, bundle: &FeatureBundle) -> Result<()> {
    atomic_write(path, |w| write_features_to(bundle, w))
}

pub fn read_feature_file(path: &Path) -> Result<FeatureBundle> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_features_from(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_features;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundle() -> FeatureBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        FeatureBundle {
            provenance: Provenance {
                recording_id: "rec".into(),
                sample_rate: Some(250.0),
                extraction: ExtractionParams::default(),
            },
            components: (0..3).map(|i| (format!("ic{i}"), random_features(&mut rng))).collect(),
        }
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let mut a = Vec::new();
        write_features_to(&bundle(), &mut a).unwrap();
        let back = read_features_from(&mut a.as_slice()).unwrap();
        assert_eq!(back.ids(), vec!["ic0", "ic1", "ic2"]);
        let mut b = Vec::new();
        write_features_to(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_and_duplicates() {
        let mut a = Vec::new();
        write_features_to(&bundle(), &mut a).unwrap();
        for cut in [3, 20, a.len() - 7] {
            assert!(read_features_from(&mut &a[..cut]).is_err());
        }
        let mut dup = bundle();
        dup.components[1].0 = "ic0".into();
        assert!(write_features_to(&dup, &mut Vec::new()).is_err());
    }
}
