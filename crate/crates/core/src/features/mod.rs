//! Per-component feature sets: scalp topography, log power spectrum and
//! autocorrelation, each normalised for the classifier.

mod reference;
mod spectral;
mod topo;

use ndarray::{Array2, Axis};

pub use reference::common_average_reference;
pub use spectral::{
    autocorrelation, biased_autocorrelation, hamming, median_welch_psd, resampled_autocorrelation,
    sample_integer_hz, welch_periodograms, WelchLayout, DB_EPSILON,
};
pub use topo::{azimuthal_equidistant, head_mask, pixel_center, scalp_topography, TopoInterpolator};

use crate::error::{Error, Result};
use crate::labels::LabelVector;

/// Side length of the topography image.
pub const TOPO_SIZE: usize = 32;
pub const PSD_LEN: usize = 100;
pub const ACF_LEN: usize = 100;
/// Maximum absolute value after normalisation.
pub const FEATURE_SCALE: f64 = 0.99;

/// Channel data plus its ICA decomposition.
#[derive(Debug, Clone)]
pub struct Recording {
    channel_data: Array2<f64>,
    sample_rate: f64,
    electrode_positions: Vec<[f64; 3]>,
    mixing_matrix: Array2<f64>,
    component_activity: Array2<f64>,
}

impl Recording {
    pub fn new(
        channel_data: Array2<f64>,
        sample_rate: f64,
        electrode_positions: Vec<[f64; 3]>,
        mixing_matrix: Array2<f64>,
        component_activity: Array2<f64>,
    ) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidRecording(m));
        let (n_channels, n_samples) = channel_data.dim();
        if n_channels < 2 {
            return invalid(format!("need at least 2 channels, got {n_channels}"));
        }
        if n_samples < 1 {
            return invalid("no samples".into());
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        if electrode_positions.len() != n_channels {
            return invalid(format!(
                "{} electrode positions for {n_channels} channels",
                electrode_positions.len()
            ));
        }
        for (i, p) in electrode_positions.iter().enumerate() {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if !(0.8..=1.2).contains(&norm) {
                return invalid(format!("electrode {i} has radius {norm}, expected within [0.8, 1.2]"));
            }
        }
        let n_components = mixing_matrix.ncols();
        if n_components < 1 {
            return invalid("no components".into());
        }
        if mixing_matrix.nrows() != n_channels {
            return invalid(format!(
                "mixing matrix has {} rows for {n_channels} channels",
                mixing_matrix.nrows()
            ));
        }
        if component_activity.dim() != (n_components, n_samples) {
            return invalid(format!(
                "component activity is {:?}, expected ({n_components}, {n_samples})",
                component_activity.dim()
            ));
        }
        Ok(Recording {
            channel_data,
            sample_rate,
            electrode_positions,
            mixing_matrix,
            component_activity,
        })
    }

    pub fn channel_data(&self) -> &Array2<f64> {
        &self.channel_data
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn electrode_positions(&self) -> &[[f64; 3]] {
        &self.electrode_positions
    }

    pub fn mixing_matrix(&self) -> &Array2<f64> {
        &self.mixing_matrix
    }

    pub fn component_activity(&self) -> &Array2<f64> {
        &self.component_activity
    }

    pub fn n_components(&self) -> usize {
        self.mixing_matrix.ncols()
    }

    /// Re-references the channel data and the scalp projections. Component
    /// time courses are unchanged since the reference operator is linear.
    pub fn average_referenced(&self) -> Result<Recording> {
        Ok(Recording {
            channel_data: common_average_reference(self.channel_data.view())?,
            sample_rate: self.sample_rate,
            electrode_positions: self.electrode_positions.clone(),
            mixing_matrix: common_average_reference(self.mixing_matrix.view())?,
            component_activity: self.component_activity.clone(),
        })
    }
}

/// 32x32 image over the head disk; masked pixels are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalpTopography {
    pixels: Array2<f64>,
    mask: Array2<bool>,
}

impl ScalpTopography {
    /// Builds a topography, zeroing every pixel outside `mask`.
    pub fn new(mut pixels: Array2<f64>, mask: Array2<bool>) -> Self {
        assert_eq!(pixels.dim(), (TOPO_SIZE, TOPO_SIZE), "topography must be 32x32");
        assert_eq!(mask.dim(), (TOPO_SIZE, TOPO_SIZE), "mask must be 32x32");
        pixels.zip_mut_with(&mask, |p, &m| {
            if !m {
                *p = 0.0
            }
        });
        ScalpTopography { pixels, mask }
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.pixels.iter())
    }

    /// Left-right reflection (column reversal).
    pub fn mirrored(&self) -> Self {
        let mut pixels = self.pixels.clone();
        pixels.invert_axis(Axis(1));
        let mut mask = self.mask.clone();
        mask.invert_axis(Axis(1));
        ScalpTopography {
            pixels: pixels.as_standard_layout().into_owned(),
            mask: mask.as_standard_layout().into_owned(),
        }
    }

    pub fn negated(&self) -> Self {
        ScalpTopography {
            pixels: self.pixels.mapv(|v| -v),
            mask: self.mask.clone(),
        }
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut Array2<f64> {
        &mut self.pixels
    }
}

/// The classifier's input for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct IcFeatures {
    pub topo: ScalpTopography,
    /// Log power at 1..=100 Hz.
    pub psd: Vec<f64>,
    /// Autocorrelation at lags 0.01..=1 s.
    pub autocorr: Vec<f64>,
}

impl IcFeatures {
    pub fn new(topo: ScalpTopography, psd: Vec<f64>, autocorr: Vec<f64>) -> Result<Self> {
        if psd.len() != PSD_LEN || autocorr.len() != ACF_LEN {
            return Err(Error::Shape(format!(
                "feature vectors must have {PSD_LEN}/{ACF_LEN} elements, got {}/{}",
                psd.len(),
                autocorr.len()
            )));
        }
        Ok(IcFeatures { topo, psd, autocorr })
    }

    pub fn mirrored(&self) -> Self {
        IcFeatures {
            topo: self.topo.mirrored(),
            ..self.clone()
        }
    }

    pub fn negated(&self) -> Self {
        IcFeatures {
            topo: self.topo.negated(),
            ..self.clone()
        }
    }

    /// The four members of the mirror/negation orbit, identity first.
    pub fn orbit(&self) -> [IcFeatures; 4] {
        let m = self.mirrored();
        let n = self.negated();
        let mn = m.negated();
        [self.clone(), m, n, mn]
    }
}

fn max_abs<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    values.fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Scales topography and spectrum to a maximum absolute value of 0.99.
/// Identically zero inputs pass through; the autocorrelation is already
/// normalised and is left alone.
pub fn normalize_features(mut raw: IcFeatures) -> IcFeatures {
    let m = raw.topo.max_abs();
    if m > 0.0 {
        let s = FEATURE_SCALE / m;
        raw.topo.pixels_mut().mapv_inplace(|v| v * s);
    }
    let m = max_abs(raw.psd.iter());
    if m > 0.0 {
        let s = FEATURE_SCALE / m;
        raw.psd.iter_mut().for_each(|v| *v *= s);
    }
    raw
}

/// Identity, mirror, negation and mirror+negation of the topography, each
/// paired with the unchanged label.
pub fn augment(features: &IcFeatures, label: LabelVector) -> [(IcFeatures, LabelVector); 4] {
    features.orbit().map(|f| (f, label))
}

/// Full feature pipeline for one component of an average-referenced recording.
pub fn extract_component(
    interpolator: &TopoInterpolator,
    projection: &[f64],
    activity: &[f64],
    sample_rate: f64,
) -> Result<IcFeatures> {
    let topo = interpolator.interpolate(projection)?;
    let psd = median_welch_psd(activity, sample_rate)?;
    let autocorr = autocorrelation(activity, sample_rate)?;
    Ok(normalize_features(IcFeatures::new(topo, psd, autocorr)?))
}
