//! Layer table of the classifier.

use serde::Serialize;

/// Leak of the rectifier used by every hidden layer.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LayerKind {
    Conv2d,
    Conv1d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Padding {
    /// Output length `ceil(input / stride)`; zeros split evenly with any
    /// extra zero on the trailing edge.
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Activation {
    LeakyRelu,
    Softmax,
}

/// Which input a layer reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Topo,
    Psd,
    Autocorr,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerSpec {
    pub name: &'static str,
    pub branch: Branch,
    pub kind: LayerKind,
    pub in_channels: usize,
    pub filters: usize,
    /// Kernel size; 1-D layers report `kernel` with the unit height implied.
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Activation,
    /// Input spatial size `(height, width)`; 1-D layers have height 1.
    pub input: (usize, usize),
}

const fn layer(
    name: &'static str,
    branch: Branch,
    kind: LayerKind,
    in_channels: usize,
    filters: usize,
    kernel: usize,
    padding: Padding,
    activation: Activation,
    input: (usize, usize),
) -> LayerSpec {
    LayerSpec {
        name,
        branch,
        kind,
        in_channels,
        filters,
        kernel,
        stride: 2,
        padding,
        activation,
        input,
    }
}

use Activation::*;
use Branch::*;
use LayerKind::*;
use Padding::*;

/// Number of channels entering the final layer: 512 topography maps plus one
/// map each from the spectrum and autocorrelation branches.
pub const FUSED_CHANNELS: usize = 514;
/// Length of each 1-D branch output before zero padding to 16.
pub const BRANCH_1D_OUTPUT: usize = 13;

pub const ARCHITECTURE: [LayerSpec; 10] = [
    layer("topo1", Topo, Conv2d, 1, 128, 4, Same, LeakyRelu, (32, 32)),
    layer("topo2", Topo, Conv2d, 128, 256, 4, Same, LeakyRelu, (16, 16)),
    layer("topo3", Topo, Conv2d, 256, 512, 4, Same, LeakyRelu, (8, 8)),
    layer("psd1", Psd, Conv1d, 1, 128, 3, Same, LeakyRelu, (1, 100)),
    layer("psd2", Psd, Conv1d, 128, 256, 3, Same, LeakyRelu, (1, 50)),
    layer("psd3", Psd, Conv1d, 256, 1, 3, Same, LeakyRelu, (1, 25)),
    layer("acf1", Autocorr, Conv1d, 1, 128, 3, Same, LeakyRelu, (1, 100)),
    layer("acf2", Autocorr, Conv1d, 128, 256, 3, Same, LeakyRelu, (1, 50)),
    layer("acf3", Autocorr, Conv1d, 256, 1, 3, Same, LeakyRelu, (1, 25)),
    layer("final", Final, Conv2d, FUSED_CHANNELS, 7, 4, Valid, Softmax, (4, 4)),
];

pub fn architecture() -> &'static [LayerSpec] {
    &ARCHITECTURE
}

/// Output length and leading pad along one axis.
pub fn axis_geometry(input: usize, kernel: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            (out, total / 2)
        }
        Padding::Valid => ((input - kernel) / stride + 1, 0),
    }
}

/// Resolved convolution geometry for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub in_h: usize,
    pub in_w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub cout: usize,
}

impl Geometry {
    pub fn patch_len(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    pub fn out_positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

impl LayerSpec {
    pub fn geometry(&self) -> Geometry {
        let (in_h, in_w) = self.input;
        let (kh, sh) = match self.kind {
            LayerKind::Conv2d => (self.kernel, self.stride),
            LayerKind::Conv1d => (1, 1),
        };
        let (out_h, pad_top) = axis_geometry(in_h, kh, sh, self.padding);
        let (out_w, pad_left) = axis_geometry(in_w, self.kernel, self.stride, self.padding);
        Geometry {
            in_h,
            in_w,
            cin: self.in_channels,
            kh,
            kw: self.kernel,
            sh,
            sw: self.stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
            cout: self.filters,
        }
    }

    /// Kernel dimensions as stored on disk: `(kh, kw, cin, cout)` for 2-D
    /// layers, `(k, cin, cout)` for 1-D layers.
    pub fn kernel_dims(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Conv2d => vec![self.kernel, self.kernel, self.in_channels, self.filters],
            LayerKind::Conv1d => vec![self.kernel, self.in_channels, self.filters],
        }
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        let g = self.geometry();
        (g.out_h, g.out_w, g.cout)
    }
}
