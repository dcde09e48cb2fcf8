//! Adam with global-norm gradient clipping.

use ndarray::Zip;

use super::model::{Gradients, NetworkWeights};
use super::{real, Real, TrainConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    first: Gradients<T>,
    second: Gradients<T>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(weights: &NetworkWeights<T>) -> Self {
        AdamState {
            first: Gradients::zeros_like(weights),
            second: Gradients::zeros_like(weights),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Diagnostics of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub gradient_norm: f64,
    /// Factor applied to the gradient by clipping (1 when unclipped).
    pub clip_scale: f64,
}

/// Clips the gradient to `config.gradient_clip` global L2 norm, then applies
/// a bias-corrected Adam update. Non-finite gradients leave weights and
/// state untouched.
pub fn adam_step<T: Real>(
    weights: &mut NetworkWeights<T>,
    gradients: &Gradients<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<StepInfo> {
    if let Some(i) = gradients.first_non_finite() {
        return Err(Error::NonFiniteGradient {
            layer: weights.layers()[i].spec.name.to_string(),
        });
    }
    let norm = gradients.global_norm();
    let clip_scale = if norm > config.gradient_clip { config.gradient_clip / norm } else { 1.0 };

    state.step += 1;
    let t = state.step as i32;
    let b1 = config.adam_beta1;
    let b2 = config.adam_beta2;
    let lr_t = config.learning_rate * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
    let (g_scale, b1t, b2t, one_b1, one_b2, lr, eps) = (
        real::<T>(clip_scale),
        real::<T>(b1),
        real::<T>(b2),
        real::<T>(1.0 - b1),
        real::<T>(1.0 - b2),
        real::<T>(lr_t),
        // epsilon applies to the bias-corrected second moment
        real::<T>(config.adam_epsilon * (1.0 - b2.powi(t)).sqrt()),
    );

    for (li, layer) in weights.layers_mut().iter_mut().enumerate() {
        let (gk, gb) = &gradients.tensors[li];
        let (mk, mb) = &mut state.first.tensors[li];
        let (vk, vb) = &mut state.second.tensors[li];
        let update = |w: &mut T, &g: &T, m: &mut T, v: &mut T| {
            let g = g * g_scale;
            *m = b1t * *m + one_b1 * g;
            *v = b2t * *v + one_b2 * g * g;
            *w = *w - lr * *m / (v.sqrt() + eps);
        };
        Zip::from(&mut layer.kernel).and(gk).and(mk).and(vk).for_each(update);
        Zip::from(&mut layer.bias).and(gb).and(mb).and(vb).for_each(update);
    }
    Ok(StepInfo {
        gradient_norm: norm,
        clip_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(fill: f64) -> (NetworkWeights<f64>, Gradients<f64>, AdamState<f64>) {
        let w = NetworkWeights::<f64>::zeros();
        let mut g = Gradients::zeros_like(&w);
        for (k, b) in &mut g.tensors {
            k.fill(fill);
            b.fill(fill);
        }
        let s = AdamState::new(&w);
        (w, g, s)
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut w, mut g, mut s) = setup(0.0);
        g.tensors[9].1[0] = 1.0;
        let cfg = TrainConfig::default();
        adam_step(&mut w, &g, &mut s, &cfg).unwrap();
        let delta = w.layers()[9].bias[0];
        assert!((delta + cfg.learning_rate).abs() < 1e-9 * cfg.learning_rate.max(1.0), "{delta}");
        assert_eq!(w.layers()[9].bias[1], 0.0);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn zero_gradient_leaves_weights_and_counts_step() {
        let (mut w, g, mut s) = setup(0.0);
        let before = w.clone();
        adam_step(&mut w, &g, &mut s, &TrainConfig::default()).unwrap();
        assert_eq!(w, before);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn clipping_halves_a_norm_forty_gradient() {
        let (mut w, mut g, mut s) = setup(0.0);
        g.tensors[9].1[0] = 40.0;
        let info = adam_step(&mut w, &g, &mut s, &TrainConfig::default()).unwrap();
        assert!((info.gradient_norm - 40.0).abs() < 1e-12);
        assert!((info.clip_scale - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let (mut w, mut g, mut s) = setup(0.0);
        g.tensors[4].0[(0, 0)] = f64::NAN;
        let before = w.clone();
        let err = adam_step(&mut w, &g, &mut s, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref layer } if layer == "psd2"));
        assert_eq!(w, before);
        assert_eq!(s.step(), 0);
    }
}
