//! Parameters, forward pass, reverse-mode gradients and test-time averaging.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::arch::{Geometry, LayerSpec, ARCHITECTURE, BRANCH_1D_OUTPUT, FUSED_CHANNELS, LEAKY_SLOPE};
use super::conv::{affine, col2im, im2col, leaky_relu, leaky_relu_backward};
use super::{real, Real};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::features::{IcFeatures, ACF_LEN, PSD_LEN, TOPO_SIZE};
use crate::labels::{LabelVector, NUM_CLASSES};

/// Examples per forward/backward work unit. Fixed so that gradient sums
/// are reduced in the same order however many threads run.
pub const CHUNK: usize = 16;

const TOPO_PIXELS: usize = TOPO_SIZE * TOPO_SIZE;
const FUSED_POSITIONS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    /// `[kh * kw * cin, cout]`, rows ordered `(ky, kx, ci)`.
    pub kernel: Array2<T>,
    pub bias: Array1<T>,
}

/// All kernels and biases of the classifier, in [`ARCHITECTURE`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Real> NetworkWeights<T> {
    /// Format version written to weights files.
    pub const VERSION: u32 = 1;

    pub fn zeros() -> Self {
        NetworkWeights {
            layers: ARCHITECTURE
                .iter()
                .map(|spec| {
                    let g = spec.geometry();
                    Layer {
                        spec: *spec,
                        kernel: Array2::zeros((g.patch_len(), g.cout)),
                        bias: Array1::zeros(g.cout),
                    }
                })
                .collect(),
        }
    }

    /// Truncated normal kernels (two standard deviations, std `sqrt(2 / fan_in)`)
    /// and zero biases.
    pub fn init(rng: &mut impl Rng) -> Self {
        let mut w = Self::zeros();
        for layer in &mut w.layers {
            let fan_in = layer.kernel.nrows() as f64;
            let std = (2.0 / fan_in).sqrt();
            layer.kernel.mapv_inplace(|_| loop {
                let x: f64 = StandardNormal.sample(rng);
                if x.abs() <= 2.0 {
                    break real(x * std);
                }
            });
        }
        w
    }

    /// Validates layer names and shapes against the architecture.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.len() != ARCHITECTURE.len() {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                ARCHITECTURE.len(),
                layers.len()
            )));
        }
        for (layer, spec) in layers.iter().zip(ARCHITECTURE.iter()) {
            let g = spec.geometry();
            if layer.spec != *spec {
                return Err(Error::Shape(format!("layer {} does not match {}", layer.spec.name, spec.name)));
            }
            if layer.kernel.dim() != (g.patch_len(), g.cout) || layer.bias.len() != g.cout {
                return Err(Error::Shape(format!(
                    "layer {}: kernel {:?} / bias {} but expected {:?} / {}",
                    spec.name,
                    layer.kernel.dim(),
                    layer.bias.len(),
                    (g.patch_len(), g.cout),
                    g.cout
                )));
            }
        }
        Ok(NetworkWeights { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&Layer<T>> {
        self.layers.iter().find(|l| l.spec.name == name)
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.kernel.len() + l.bias.len()).sum()
    }

    /// Name of the first layer holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.layers
            .iter()
            .find(|l| l.kernel.iter().chain(l.bias.iter()).any(|v| !v.is_finite()))
            .map(|l| l.spec.name)
    }

    pub fn cast<U: Real>(&self) -> NetworkWeights<U> {
        NetworkWeights {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    kernel: l.kernel.mapv(|v| real(v.to_f64().expect("finite"))),
                    bias: l.bias.mapv(|v| real(v.to_f64().expect("finite"))),
                })
                .collect(),
        }
    }
}

/// Per-layer `(kernel, bias)` gradients, same layout as [`NetworkWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(w: &NetworkWeights<T>) -> Self {
        Gradients {
            tensors: w
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.kernel.dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for ((k, b), (ok, ob)) in self.tensors.iter_mut().zip(&other.tensors) {
            *k += ok;
            *b += ob;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (k, b) in &mut self.tensors {
            k.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }

    /// Global L2 norm, accumulated in f64.
    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|(k, b)| k.iter().chain(b.iter()))
            .map(|v| {
                let x = v.to_f64().unwrap_or(f64::NAN);
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.tensors
            .iter()
            .position(|(k, b)| k.iter().chain(b.iter()).any(|v| !v.is_finite()))
    }
}

/// Network inputs for a batch, flattened NHWC.
#[derive(Debug, Clone)]
pub struct InputBatch<T> {
    pub n: usize,
    pub topo: Vec<T>,
    pub psd: Vec<T>,
    pub autocorr: Vec<T>,
}

impl<T: Real> InputBatch<T> {
    pub fn from_features<'a>(features: impl IntoIterator<Item = &'a IcFeatures>) -> Self {
        let mut batch = InputBatch {
            n: 0,
            topo: Vec::new(),
            psd: Vec::new(),
            autocorr: Vec::new(),
        };
        for f in features {
            batch.n += 1;
            batch.topo.extend(f.topo.pixels().iter().map(|&v| real::<T>(v)));
            batch.psd.extend(f.psd.iter().map(|&v| real::<T>(v)));
            batch.autocorr.extend(f.autocorr.iter().map(|&v| real::<T>(v)));
        }
        batch
    }

    /// Adds independent Gaussian noise with standard deviation `sigma` to
    /// every input value.
    pub fn add_noise(&mut self, sigma: f64, rng: &mut impl Rng) {
        if sigma == 0.0 {
            return;
        }
        for v in self.topo.iter_mut().chain(self.psd.iter_mut()).chain(self.autocorr.iter_mut()) {
            let e: f64 = StandardNormal.sample(rng);
            *v = *v + real::<T>(sigma * e);
        }
    }

    fn chunk(&self, start: usize, end: usize) -> InputBatch<T> {
        InputBatch {
            n: end - start,
            topo: self.topo[start * TOPO_PIXELS..end * TOPO_PIXELS].to_vec(),
            psd: self.psd[start * PSD_LEN..end * PSD_LEN].to_vec(),
            autocorr: self.autocorr[start * ACF_LEN..end * ACF_LEN].to_vec(),
        }
    }
}

/// Stored activations of one layer for the backward pass.
struct LayerTrace<T> {
    patches: Array2<T>,
    pre_activation: Array2<T>,
}

struct Trace<T> {
    layers: Vec<LayerTrace<T>>,
}

/// Output of a traced forward pass.
pub struct ForwardOutput<T> {
    /// `[n, 7]` class probabilities.
    pub probs: Array2<f64>,
    /// Per layer `(name, [height, width, channels])` of the produced activations.
    pub layer_shapes: Vec<(&'static str, [usize; 3])>,
    /// Shape of the concatenated map entering the final layer.
    pub fused_shape: [usize; 3],
    trace: Option<Trace<T>>,
}

impl<T> ForwardOutput<T> {
    /// Pre-activation values `[n * positions, channels]` of every layer in
    /// [`ARCHITECTURE`] order; `None` unless the pass was traced.
    pub fn pre_activations(&self) -> Option<Vec<&Array2<T>>> {
        self.trace
            .as_ref()
            .map(|t| t.layers.iter().map(|l| &l.pre_activation).collect())
    }
}

fn check_finite<T: Real>(z: &Array2<T>, layer: &LayerSpec) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericInstability {
            layer: layer.name.to_string(),
        })
    }
}

fn softmax_rows<T: Real>(logits: &Array2<T>) -> Array2<f64> {
    let mut p = logits.mapv(|v| v.to_f64().expect("finite logits"));
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

fn shape_of(rows: usize, cols: usize, n: usize, g: &Geometry) -> [usize; 3] {
    debug_assert_eq!(rows, n * g.out_positions());
    [g.out_h, g.out_w, cols]
}

impl<T: Real> NetworkWeights<T> {
    fn branch_forward(
        &self,
        range: std::ops::Range<usize>,
        input: &[T],
        n: usize,
        trace: &mut Option<Trace<T>>,
        shapes: &mut Vec<(&'static str, [usize; 3])>,
    ) -> Result<Array2<T>> {
        let slope = real::<T>(LEAKY_SLOPE);
        let mut x = input.to_vec();
        let mut out = Array2::zeros((0, 0));
        for layer in &self.layers[range] {
            let g = layer.spec.geometry();
            let patches = im2col(&x, n, &g);
            let z = affine(&patches, &layer.kernel, &layer.bias);
            check_finite(&z, &layer.spec)?;
            let a = leaky_relu(&z, slope);
            shapes.push((layer.spec.name, shape_of(a.nrows(), a.ncols(), n, &g)));
            x = a.as_slice().expect("contiguous").to_vec();
            out = a;
            if let Some(t) = trace.as_mut() {
                t.layers.push(LayerTrace {
                    patches,
                    pre_activation: z,
                });
            }
        }
        Ok(out)
    }

    /// Runs the network on a batch, optionally keeping activations for
    /// [`NetworkWeights::backward_traced`].
    pub fn forward_batch_traced(&self, batch: &InputBatch<T>, keep: bool) -> Result<ForwardOutput<T>> {
        let n = batch.n;
        if batch.topo.len() != n * TOPO_PIXELS || batch.psd.len() != n * PSD_LEN || batch.autocorr.len() != n * ACF_LEN {
            return Err(Error::Shape("input batch has inconsistent lengths".into()));
        }
        let mut trace = keep.then(|| Trace { layers: Vec::with_capacity(ARCHITECTURE.len()) });
        let mut shapes = Vec::with_capacity(ARCHITECTURE.len());
        let topo = self.branch_forward(0..3, &batch.topo, n, &mut trace, &mut shapes)?;
        let psd = self.branch_forward(3..6, &batch.psd, n, &mut trace, &mut shapes)?;
        let acf = self.branch_forward(6..9, &batch.autocorr, n, &mut trace, &mut shapes)?;
        if topo.dim() != (n * FUSED_POSITIONS, 512) || psd.dim() != (n * BRANCH_1D_OUTPUT, 1) || acf.dim() != psd.dim() {
            return Err(Error::Shape(format!(
                "branch outputs {:?}, {:?}, {:?} cannot be fused",
                topo.dim(),
                psd.dim(),
                acf.dim()
            )));
        }

        // 13-vectors are zero-padded to 16 and laid out as 4x4 single-channel maps
        let mut fused = vec![T::zero(); n * FUSED_POSITIONS * FUSED_CHANNELS];
        for b in 0..n {
            for p in 0..FUSED_POSITIONS {
                let base = (b * FUSED_POSITIONS + p) * FUSED_CHANNELS;
                let src = topo.row(b * FUSED_POSITIONS + p);
                for (d, s) in fused[base..base + 512].iter_mut().zip(src.iter()) {
                    *d = *s;
                }
                if p < BRANCH_1D_OUTPUT {
                    fused[base + 512] = psd[(b * BRANCH_1D_OUTPUT + p, 0)];
                    fused[base + 513] = acf[(b * BRANCH_1D_OUTPUT + p, 0)];
                }
            }
        }

        let last = &self.layers[9];
        let g = last.spec.geometry();
        let patches = im2col(&fused, n, &g);
        let logits = affine(&patches, &last.kernel, &last.bias);
        check_finite(&logits, &last.spec)?;
        shapes.push((last.spec.name, shape_of(logits.nrows(), logits.ncols(), n, &g)));
        let probs = softmax_rows(&logits);
        if let Some(t) = trace.as_mut() {
            t.layers.push(LayerTrace {
                patches,
                pre_activation: logits,
            });
        }
        Ok(ForwardOutput {
            probs,
            layer_shapes: shapes,
            fused_shape: [4, 4, FUSED_CHANNELS],
            trace,
        })
    }

    fn branch_backward(
        &self,
        range: std::ops::Range<usize>,
        trace: &Trace<T>,
        mut grad: Array2<T>,
        n: usize,
        grads: &mut Gradients<T>,
        need_input: bool,
    ) -> Option<Vec<T>> {
        let slope = real::<T>(LEAKY_SLOPE);
        let first = range.start;
        for li in range.rev() {
            let layer = &self.layers[li];
            let t = &trace.layers[li];
            leaky_relu_backward(&mut grad, &t.pre_activation, slope);
            grads.tensors[li].0 = t.patches.t().dot(&grad);
            grads.tensors[li].1 = grad.sum_axis(Axis(0));
            if li == first && !need_input {
                return None;
            }
            let g = layer.spec.geometry();
            let dpatches = grad.dot(&layer.kernel.t());
            let dx = col2im(dpatches.view(), n, &g);
            if li == first {
                return Some(dx);
            }
            grad = Array2::from_shape_vec((n * g.in_h * g.in_w, g.cin), dx).expect("shape");
        }
        None
    }

    /// Gradients of `sum_n loss_n` given `d loss / d logits` (`[n, 7]`).
    fn backward_traced(
        &self,
        trace: &Trace<T>,
        dlogits: ArrayView2<'_, T>,
        need_input: bool,
    ) -> (Gradients<T>, Option<[Vec<T>; 3]>) {
        let n = dlogits.nrows();
        let mut grads = Gradients::zeros_like(self);
        let last = &self.layers[9];
        let t = &trace.layers[9];
        grads.tensors[9].0 = t.patches.t().dot(&dlogits);
        grads.tensors[9].1 = dlogits.sum_axis(Axis(0));
        let dpatches = dlogits.dot(&last.kernel.t());
        let dfused = col2im(dpatches.view(), n, &last.spec.geometry());

        let mut dtopo = Array2::<T>::zeros((n * FUSED_POSITIONS, 512));
        let mut dpsd = Array2::<T>::zeros((n * BRANCH_1D_OUTPUT, 1));
        let mut dacf = Array2::<T>::zeros((n * BRANCH_1D_OUTPUT, 1));
        for b in 0..n {
            for p in 0..FUSED_POSITIONS {
                let base = (b * FUSED_POSITIONS + p) * FUSED_CHANNELS;
                dtopo
                    .row_mut(b * FUSED_POSITIONS + p)
                    .iter_mut()
                    .zip(&dfused[base..base + 512])
                    .for_each(|(d, s)| *d = *s);
                if p < BRANCH_1D_OUTPUT {
                    dpsd[(b * BRANCH_1D_OUTPUT + p, 0)] = dfused[base + 512];
                    dacf[(b * BRANCH_1D_OUTPUT + p, 0)] = dfused[base + 513];
                }
            }
        }
        let a = self.branch_backward(0..3, trace, dtopo, n, &mut grads, need_input);
        let b = self.branch_backward(3..6, trace, dpsd, n, &mut grads, need_input);
        let c = self.branch_backward(6..9, trace, dacf, n, &mut grads, need_input);
        let inputs = match (a, b, c) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        (grads, inputs)
    }

    /// Class probabilities for one component (no test-time averaging).
    pub fn forward(&self, features: &IcFeatures) -> Result<LabelVector> {
        let out = self.forward_batch_traced(&InputBatch::from_features([features]), false)?;
        row_to_label(out.probs.row(0).to_vec())
    }

    /// [`NetworkWeights::forward`] over many components, in input order.
    pub fn forward_many(&self, features: &[IcFeatures], exec: Execution) -> Result<Vec<LabelVector>> {
        let chunks: Vec<&[IcFeatures]> = features.chunks(CHUNK).collect();
        let parts = exec::map(exec, &chunks, |_, chunk| -> Result<Vec<LabelVector>> {
            let out = self.forward_batch_traced(&InputBatch::from_features(chunk.iter()), false)?;
            out.probs.rows().into_iter().map(|r| row_to_label(r.to_vec())).collect()
        });
        let mut labels = Vec::with_capacity(features.len());
        for p in parts {
            labels.extend(p?);
        }
        Ok(labels)
    }

    /// Mean of the forward pass over the four mirror/negation variants of the
    /// topography. The four outputs are summed in a canonical (sorted) order,
    /// so every member of an orbit gets a bitwise-identical result.
    pub fn classify(&self, features: &IcFeatures) -> Result<LabelVector> {
        Ok(self.classify_chunk(std::slice::from_ref(features))?.remove(0))
    }

    pub fn classify_many(&self, features: &[IcFeatures], exec: Execution) -> Result<Vec<LabelVector>> {
        let chunks: Vec<&[IcFeatures]> = features.chunks(CHUNK / 4).collect();
        let parts = exec::map(exec, &chunks, |_, chunk| self.classify_chunk(chunk));
        let mut labels = Vec::with_capacity(features.len());
        for p in parts {
            labels.extend(p?);
        }
        Ok(labels)
    }

    /// All orbit variants of a chunk go through one batched forward pass.
    fn classify_chunk(&self, features: &[IcFeatures]) -> Result<Vec<LabelVector>> {
        let variants: Vec<IcFeatures> = features.iter().flat_map(|f| f.orbit()).collect();
        let out = self.forward_batch_traced(&InputBatch::from_features(&variants), false)?;
        out.probs
            .outer_iter()
            .collect::<Vec<_>>()
            .chunks(4)
            .map(|rows| {
                let mut outs: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
                outs.sort_by(|a, b| {
                    a.iter()
                        .zip(b.iter())
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                let mut mean = [0.0; NUM_CLASSES];
                for o in &outs {
                    for (m, v) in mean.iter_mut().zip(o) {
                        *m += v;
                    }
                }
                row_to_label(mean.iter().map(|m| m / 4.0).collect())
            })
            .collect()
    }

    /// Gradient of the weighted cross entropy of one example with respect to
    /// every parameter.
    pub fn backward(&self, features: &IcFeatures, target: &LabelVector, class_weights: &[f64; NUM_CLASSES]) -> Result<Gradients<T>> {
        let batch = InputBatch::from_features([features]);
        let (_, grads, _) = self.loss_and_gradient(&batch, std::slice::from_ref(target), class_weights, false)?;
        Ok(grads)
    }

    /// Gradient of one example's loss with respect to its inputs.
    pub fn input_gradient(
        &self,
        features: &IcFeatures,
        target: &LabelVector,
        class_weights: &[f64; NUM_CLASSES],
    ) -> Result<InputGradient> {
        let batch = InputBatch::from_features([features]);
        let (_, _, inputs) = self.loss_and_gradient(&batch, std::slice::from_ref(target), class_weights, true)?;
        let [topo, psd, acf] = inputs.expect("requested");
        let f = |v: Vec<T>| v.into_iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect::<Vec<f64>>();
        Ok(InputGradient {
            topo: Array2::from_shape_vec((TOPO_SIZE, TOPO_SIZE), f(topo)).expect("32x32"),
            psd: f(psd),
            autocorr: f(acf),
        })
    }

    /// Summed loss and summed gradients over a batch.
    fn loss_and_gradient(
        &self,
        batch: &InputBatch<T>,
        targets: &[LabelVector],
        class_weights: &[f64; NUM_CLASSES],
        need_input: bool,
    ) -> Result<(f64, Gradients<T>, Option<[Vec<T>; 3]>)> {
        let out = self.forward_batch_traced(batch, true)?;
        let mut loss = 0.0;
        let mut dlogits = Array2::<T>::zeros((batch.n, NUM_CLASSES));
        for (b, target) in targets.iter().enumerate() {
            let p = out.probs.row(b);
            let t = target.as_array();
            let mut weighted_mass = 0.0;
            for i in 0..NUM_CLASSES {
                let wt = class_weights[i] * t[i];
                weighted_mass += wt;
                if wt != 0.0 {
                    loss -= wt * p[i].max(super::loss::PROB_FLOOR).ln();
                }
            }
            for j in 0..NUM_CLASSES {
                dlogits[(b, j)] = real(p[j] * weighted_mass - class_weights[j] * t[j]);
            }
        }
        let trace = out.trace.expect("kept");
        let (grads, inputs) = self.backward_traced(&trace, dlogits.view(), need_input);
        Ok((loss, grads, inputs))
    }

    /// Mean loss and mean gradient over a batch, processed in fixed chunks of
    /// [`CHUNK`] examples and reduced in chunk order.
    pub fn batch_gradient(
        &self,
        batch: &InputBatch<T>,
        targets: &[LabelVector],
        class_weights: &[f64; NUM_CLASSES],
        exec: Execution,
    ) -> Result<(f64, Gradients<T>)> {
        if targets.len() != batch.n || batch.n == 0 {
            return Err(Error::Shape(format!("{} targets for a batch of {}", targets.len(), batch.n)));
        }
        let n_chunks = batch.n.div_ceil(CHUNK);
        let parts = exec::map_range(exec, n_chunks, |c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(batch.n);
            let chunk = batch.chunk(start, end);
            self.loss_and_gradient(&chunk, &targets[start..end], class_weights, false)
        });
        let mut total_loss = 0.0;
        let mut total: Option<Gradients<T>> = None;
        for part in parts {
            let (loss, grads, _) = part?;
            total_loss += loss;
            match total.as_mut() {
                Some(t) => t.add_assign(&grads),
                None => total = Some(grads),
            }
        }
        let mut grads = total.expect("at least one chunk");
        let inv = 1.0 / batch.n as f64;
        grads.scale(real(inv));
        Ok((total_loss * inv, grads))
    }
}

/// Gradient of a loss with respect to the network inputs.
#[derive(Debug, Clone)]
pub struct InputGradient {
    pub topo: Array2<f64>,
    pub psd: Vec<f64>,
    pub autocorr: Vec<f64>,
}

fn row_to_label(p: Vec<f64>) -> Result<LabelVector> {
    let arr: [f64; NUM_CLASSES] = p
        .try_into()
        .map_err(|_| Error::Shape("final layer must produce 7 outputs".into()))?;
    LabelVector::new(arr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Category;
    use crate::synthetic::random_features;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn weights<T: Real>(seed: u64) -> NetworkWeights<T> {
        NetworkWeights::init(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Initialised weights with small random biases. With zero biases every
    /// patch lying wholly outside the head mask sits exactly on the leaky
    /// ReLU kink, where finite differences are meaningless.
    fn generic_weights(seed: u64) -> NetworkWeights<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = NetworkWeights::<f64>::init(&mut rng);
        for layer in w.layers_mut() {
            layer.bias.mapv_inplace(|_| rng.gen_range(-0.05..0.05));
        }
        w
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let f = random_features(&mut ChaCha8Rng::seed_from_u64(0));
        let p = NetworkWeights::<f32>::zeros().forward(&f).unwrap();
        for v in p.as_array() {
            assert!((v - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn intermediate_shapes() {
        let f = random_features(&mut ChaCha8Rng::seed_from_u64(1));
        let out = weights::<f32>(1)
            .forward_batch_traced(&InputBatch::from_features([&f]), false)
            .unwrap();
        let expected: Vec<(&str, [usize; 3])> = vec![
            ("topo1", [16, 16, 128]),
            ("topo2", [8, 8, 256]),
            ("topo3", [4, 4, 512]),
            ("psd1", [1, 50, 128]),
            ("psd2", [1, 25, 256]),
            ("psd3", [1, 13, 1]),
            ("acf1", [1, 50, 128]),
            ("acf2", [1, 25, 256]),
            ("acf3", [1, 13, 1]),
            ("final", [1, 1, 7]),
        ];
        assert_eq!(out.layer_shapes, expected);
        assert_eq!(out.fused_shape, [4, 4, 514]);
    }

    #[test]
    fn batch_forward_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fs: Vec<IcFeatures> = (0..5).map(|_| random_features(&mut rng)).collect();
        let w = weights::<f64>(2);
        let many = w.forward_many(&fs, Execution::Sequential).unwrap();
        for (f, p) in fs.iter().zip(&many) {
            let single = w.forward(f).unwrap();
            for (a, b) in single.as_array().iter().zip(p.as_array()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_features(&mut rng);
        let target = LabelVector::normalized([0.5, 0.1, 0.1, 0.1, 0.05, 0.05, 0.1]).unwrap();
        let cw = super::super::DEFAULT_CLASS_WEIGHTS;
        let w = generic_weights(3);
        let grads = w.backward(&f, &target, &cw).unwrap();
        let loss = |w: &NetworkWeights<f64>| {
            super::super::weighted_cross_entropy(&w.forward(&f).unwrap(), &target, &cw)
        };
        let h = 1e-4;
        for li in 0..ARCHITECTURE.len() {
            for probe in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                let (analytic, idx) = if probe == 0 {
                    let j = rng.gen_range(0..w.layers[li].bias.len());
                    wp.layers[li].bias[j] += h;
                    wm.layers[li].bias[j] -= h;
                    (grads.tensors[li].1[j], (usize::MAX, j))
                } else {
                    let (r, c) = w.layers[li].kernel.dim();
                    let (i, j) = (rng.gen_range(0..r), rng.gen_range(0..c));
                    wp.layers[li].kernel[(i, j)] += h;
                    wm.layers[li].kernel[(i, j)] -= h;
                    (grads.tensors[li].0[(i, j)], (i, j))
                };
                let numeric = (loss(&wp) - loss(&wm)) / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-3, "layer {li} {idx:?}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_features(&mut rng);
        let target = LabelVector::one_hot(Category::Eye);
        let cw = super::super::DEFAULT_CLASS_WEIGHTS;
        let w = generic_weights(4);
        let g = w.input_gradient(&f, &target, &cw).unwrap();
        let loss = |f: &IcFeatures| super::super::weighted_cross_entropy(&w.forward(f).unwrap(), &target, &cw);
        let h = 1e-4;
        for k in [0, 37, 99] {
            let mut fp = f.clone();
            let mut fm = f.clone();
            fp.psd[k] += h;
            fm.psd[k] -= h;
            let numeric = (loss(&fp) - loss(&fm)) / (2.0 * h);
            assert!((g.psd[k] - numeric).abs() <= 1e-3 * g.psd[k].abs().max(numeric.abs()).max(1e-6));
        }
    }

    #[test]
    fn batch_gradient_is_mean_of_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fs: Vec<IcFeatures> = (0..CHUNK + 3).map(|_| random_features(&mut rng)).collect();
        let ts: Vec<LabelVector> = (0..fs.len()).map(|i| LabelVector::one_hot(Category::ALL[i % 7])).collect();
        let cw = super::super::DEFAULT_CLASS_WEIGHTS;
        let w = weights::<f64>(5);
        let (_, mean) = w
            .batch_gradient(&InputBatch::from_features(&fs), &ts, &cw, Execution::Sequential)
            .unwrap();
        let mut sum = Gradients::zeros_like(&w);
        for (f, t) in fs.iter().zip(&ts) {
            sum.add_assign(&w.backward(f, t, &cw).unwrap());
        }
        sum.scale(1.0 / fs.len() as f64);
        for ((a, b), (c, d)) in mean.tensors.iter().zip(&sum.tensors) {
            assert!(a.iter().zip(c).all(|(x, y)| (x - y).abs() < 1e-10));
            assert!(b.iter().zip(d).all(|(x, y)| (x - y).abs() < 1e-10));
        }
    }

    #[test]
    fn parallel_and_sequential_gradients_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fs: Vec<IcFeatures> = (0..2 * CHUNK + 1).map(|_| random_features(&mut rng)).collect();
        let ts = vec![LabelVector::one_hot(Category::Brain); fs.len()];
        let cw = super::super::DEFAULT_CLASS_WEIGHTS;
        let w = weights::<f32>(6);
        let batch = InputBatch::from_features(&fs);
        let a = w.batch_gradient(&batch, &ts, &cw, Execution::Sequential).unwrap();
        let b = w.batch_gradient(&batch, &ts, &cw, Execution::Parallel).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn classify_is_orbit_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = weights::<f32>(7);
        for _ in 0..5 {
            let f = random_features(&mut rng);
            let base = w.classify(&f).unwrap();
            for v in f.orbit() {
                assert_eq!(w.classify(&v).unwrap(), base);
            }
        }
    }

    #[test]
    fn non_finite_input_reports_layer() {
        let mut f = random_features(&mut ChaCha8Rng::seed_from_u64(8));
        f.autocorr[3] = f64::NAN;
        match weights::<f32>(8).forward(&f) {
            Err(Error::NumericInstability { layer }) => assert_eq!(layer, "acf1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cast_round_trip() {
        let w = weights::<f32>(9);
        assert_eq!(w.cast::<f64>().cast::<f32>(), w);
    }
}
