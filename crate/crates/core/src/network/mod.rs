//! The three-branch convolutional classifier.
//!
//! The topography (32x32x1) goes through three stride-2 4x4 convolutions
//! (128, 256, 512 filters) down to 4x4x512. The spectrum and autocorrelation
//! (100 samples each) go through three stride-2 1-D convolutions of width 3
//! (128, 256, 1 filters) down to 13 samples, which are zero-padded to 16 and
//! laid out as 4x4 single-channel maps. The 514-channel concatenation feeds a
//! 4x4 valid convolution with 7 filters and a softmax.
//!
//! Everything is generic over [`Real`] so the same code trains in `f32` and
//! is gradient-checked in `f64`.

mod adam;
mod arch;
mod conv;
mod loss;
mod model;
mod train;
mod weights_file;

use std::fmt::{Debug, Display};

pub use adam::{adam_step, AdamState, StepInfo};
pub use arch::{
    architecture, axis_geometry, Activation, Branch, Geometry, LayerKind, LayerSpec, Padding, ARCHITECTURE,
    BRANCH_1D_OUTPUT, FUSED_CHANNELS, LEAKY_SLOPE,
};
pub use conv::{col2im, im2col};
pub use loss::{weighted_cross_entropy, DEFAULT_CLASS_WEIGHTS, PROB_FLOOR};
pub use model::{ForwardOutput, Gradients, InputBatch, InputGradient, Layer, NetworkWeights, CHUNK};
pub use train::{
    sample_batch, train, train_with_monitor, validation_loss, Checkpoint, ClassBalancedSampler, Example, LogRecord,
    StopReason, TrainOutcome,
};
pub use weights_file::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::labels::NUM_CLASSES;

/// Floating-point type the network computes in.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("representable")
}

/// Optimisation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Maximum global L2 norm of the gradient.
    pub gradient_clip: f64,
    pub batch_size: usize,
    /// Stop when the best validation loss is this many batches old.
    pub early_stop_window: u64,
    /// Batches between validation evaluations.
    pub validation_interval: u64,
    pub class_weights: [f64; NUM_CLASSES],
    /// Standard deviation of the additive Gaussian input noise.
    pub input_noise_sigma: f64,
    pub seed: u64,
    /// Hard cap on the number of batches; `None` runs until early stopping.
    pub max_batches: Option<u64>,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            gradient_clip: 20.0,
            batch_size: 128,
            early_stop_window: 5000,
            validation_interval: 100,
            class_weights: DEFAULT_CLASS_WEIGHTS,
            input_noise_sigma: 0.05,
            seed: 0,
            max_batches: None,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !positive(self.adam_epsilon) {
            return bad("adam_epsilon must be positive");
        }
        if !positive(self.gradient_clip) {
            return bad("gradient_clip must be positive");
        }
        if self.batch_size == 0 || self.early_stop_window == 0 || self.validation_interval == 0 {
            return bad("batch_size, early_stop_window and validation_interval must be positive");
        }
        if self.class_weights.iter().any(|&w| !positive(w)) {
            return bad("class weights must be strictly positive");
        }
        if !(self.input_noise_sigma.is_finite() && self.input_noise_sigma >= 0.0) {
            return bad("input_noise_sigma must be non-negative");
        }
        if self.max_batches == Some(0) {
            return bad("max_batches must be positive");
        }
        Ok(())
    }
}
