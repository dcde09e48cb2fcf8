//! Deterministic synthetic data: electrode montages, recordings and toy
//! labelled feature sets. Used by the demo commands, benches and tests.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::error::Result;
use crate::features::{
    head_mask, normalize_features, pixel_center, IcFeatures, Recording, ScalpTopography, ACF_LEN,
    PSD_LEN, TOPO_SIZE,
};
use crate::crowdlabel::{RawSubmission, Response};
use crate::labels::{Category, LabelVector, NUM_CLASSES};

/// `n` electrodes spread over the upper part of the unit sphere (z >= -0.3)
/// along a golden-angle spiral.
pub fn montage(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 1.3 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

fn smooth_topography(rng: &mut impl Rng) -> ScalpTopography {
    let blobs: Vec<([f64; 2], f64, f64)> = (0..3)
        .map(|_| {
            let c = [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)];
            (c, rng.gen_range(0.15..0.5), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let pixels = Array2::from_shape_fn((TOPO_SIZE, TOPO_SIZE), |(r, col)| {
        let p = pixel_center(r, col);
        blobs
            .iter()
            .map(|(c, w, a)| a * (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (w * w)).exp())
            .sum()
    });
    ScalpTopography::new(pixels, head_mask())
}

/// A normalised feature set with smooth random content.
pub fn random_features(rng: &mut impl Rng) -> IcFeatures {
    let topo = smooth_topography(rng);
    let slope = rng.gen_range(0.2..1.5);
    let peak = rng.gen_range(5.0..40.0);
    let psd: Vec<f64> = (1..=PSD_LEN)
        .map(|f| {
            let f = f as f64;
            -10.0 * slope * f.log10() + 6.0 * (-(f - peak).powi(2) / 8.0).exp() + 0.3 * rng.gen_range(-1.0..1.0)
        })
        .collect();
    let freq = rng.gen_range(2.0..20.0);
    let decay = rng.gen_range(0.5..5.0);
    let autocorr: Vec<f64> = (1..=ACF_LEN)
        .map(|j| {
            let lag = j as f64 / ACF_LEN as f64;
            0.99 * (-decay * lag).exp() * (2.0 * PI * freq * lag).cos()
        })
        .collect();
    normalize_features(IcFeatures::new(topo, psd, autocorr).expect("fixed lengths"))
}

/// Linearly separable three-category toy problem. The category is encoded
/// in the spectrum and autocorrelation (which augmentation leaves alone);
/// the topography is uninformative noise.
pub fn separable_toy(n: usize, seed: u64) -> Vec<(IcFeatures, LabelVector)> {
    let categories = [Category::Brain, Category::Muscle, Category::Eye];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = i % categories.len();
            let topo = smooth_topography(&mut rng);
            let centre = 15.0 + 30.0 * k as f64;
            let psd: Vec<f64> = (1..=PSD_LEN)
                .map(|f| {
                    let d = f as f64 - centre;
                    (-d * d / 50.0).exp() + 0.1 * rng.gen_range(-1.0..1.0)
                })
                .collect();
            let freq = 3.0 + 6.0 * k as f64;
            let autocorr: Vec<f64> = (1..=ACF_LEN)
                .map(|j| {
                    let lag = j as f64 / ACF_LEN as f64;
                    0.99 * (-lag).exp() * (2.0 * PI * freq * lag).cos() + 0.05 * rng.gen_range(-1.0..1.0)
                })
                .collect();
            let f = normalize_features(IcFeatures::new(topo, psd, autocorr).expect("fixed lengths"));
            (f, LabelVector::one_hot(categories[k]))
        })
        .collect()
}

/// Synthetic recording: each component is a mixture of a characteristic
/// oscillation and 1/f-ish noise, projected through a random mixing matrix.
pub fn recording(n_channels: usize, n_components: usize, seconds: f64, sample_rate: f64, seed: u64) -> Result<Recording> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * sample_rate).round() as usize;
    let positions = montage(n_channels);
    let mixing = Array2::from_shape_fn((n_channels, n_components), |_| rng.gen_range(-1.0..1.0));
    let mut activity = Array2::<f64>::zeros((n_components, n));
    for mut row in activity.rows_mut() {
        let freq = rng.gen_range(4.0..40.0);
        let amp = rng.gen_range(0.5..3.0);
        let mut brown = 0.0;
        for (t, v) in row.iter_mut().enumerate() {
            let white: f64 = StandardNormal.sample(&mut rng);
            brown = 0.98 * brown + 0.2 * white;
            *v = amp * (2.0 * PI * freq * t as f64 / sample_rate).sin() + brown + 0.3 * white;
        }
    }
    let channel_data = mixing.dot(&activity);
    Recording::new(channel_data, sample_rate, positions, mixing, activity)
}

/// Crowd submissions over `n_components` components with planted true
/// categories. Each labeler answers every component, correctly with
/// probability `accuracy` and otherwise uniformly among the other seven
/// responses. Returns the submissions and the planted categories.
pub fn planted_submissions(
    n_components: usize,
    n_labelers: usize,
    accuracy: f64,
    seed: u64,
) -> (Vec<RawSubmission>, Vec<Category>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<usize> = (0..n_components).map(|_| rng.gen_range(0..NUM_CLASSES)).collect();
    let mut subs = Vec::with_capacity(n_components * n_labelers);
    for l in 0..n_labelers {
        for (i, &t) in truth.iter().enumerate() {
            let r = if rng.gen::<f64>() < accuracy {
                t
            } else {
                let other = rng.gen_range(0..NUM_CLASSES);
                if other >= t {
                    other + 1
                } else {
                    other
                }
            };
            subs.push(RawSubmission {
                labeler_id: format!("labeler{}", l + 1),
                component_id: format!("ic{}", i + 1),
                selections: vec![Response::from_index(r).expect("index below 8")],
                is_expert: false,
            });
        }
    }
    let truth = truth.into_iter().map(|t| Category::from_index(t).expect("index below 7")).collect();
    (subs, truth)
}
