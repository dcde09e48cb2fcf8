//! Strided convolution by patch extraction (im2col) and matrix products.
//!
//! Activations are stored NHWC and flattened to `[n * h * w, c]` matrices so
//! that a convolution is one GEMM against a `[kh * kw * cin, cout]` kernel.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::arch::Geometry;
use super::Real;

/// Gathers every receptive field into one row: `[n * out_h * out_w, kh * kw * cin]`.
pub fn im2col<T: Real>(input: &[T], n: usize, g: &Geometry) -> Array2<T> {
    debug_assert_eq!(input.len(), n * g.in_h * g.in_w * g.cin);
    let cols = g.patch_len();
    let mut out = Array2::<T>::zeros((n * g.out_positions(), cols));
    let o = out.as_slice_mut().expect("fresh array is contiguous");
    for b in 0..n {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = ((b * g.out_h + oy) * g.out_w + ox) * cols;
                for ky in 0..g.kh {
                    let iy = (oy * g.sh + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    for kx in 0..g.kw {
                        let ix = (ox * g.sw + kx) as isize - g.pad_left as isize;
                        if ix < 0 || ix >= g.in_w as isize {
                            continue;
                        }
                        let src = ((b * g.in_h + iy as usize) * g.in_w + ix as usize) * g.cin;
                        let dst = row + (ky * g.kw + kx) * g.cin;
                        o[dst..dst + g.cin].copy_from_slice(&input[src..src + g.cin]);
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input.
pub fn col2im<T: Real>(cols: ArrayView2<'_, T>, n: usize, g: &Geometry) -> Vec<T> {
    let mut out = vec![T::zero(); n * g.in_h * g.in_w * g.cin];
    let width = g.patch_len();
    let standard = cols.as_standard_layout();
    let c = standard.as_slice().expect("standard layout");
    for b in 0..n {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = ((b * g.out_h + oy) * g.out_w + ox) * width;
                for ky in 0..g.kh {
                    let iy = (oy * g.sh + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    for kx in 0..g.kw {
                        let ix = (ox * g.sw + kx) as isize - g.pad_left as isize;
                        if ix < 0 || ix >= g.in_w as isize {
                            continue;
                        }
                        let dst = ((b * g.in_h + iy as usize) * g.in_w + ix as usize) * g.cin;
                        let src = row + (ky * g.kw + kx) * g.cin;
                        for (d, s) in out[dst..dst + g.cin].iter_mut().zip(&c[src..src + g.cin]) {
                            *d = *d + *s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// `patches . kernel + bias`.
pub fn affine<T: Real>(patches: &Array2<T>, kernel: &Array2<T>, bias: &Array1<T>) -> Array2<T> {
    let mut z = patches.dot(kernel);
    z += &bias.view().insert_axis(Axis(0));
    z
}

pub fn leaky_relu<T: Real>(z: &Array2<T>, slope: T) -> Array2<T> {
    z.mapv(|v| if v > T::zero() { v } else { v * slope })
}

/// Multiplies the upstream gradient by the rectifier's derivative in place.
pub fn leaky_relu_backward<T: Real>(grad: &mut Array2<T>, z: &Array2<T>, slope: T) {
    grad.zip_mut_with(z, |g, &v| {
        if v <= T::zero() {
            *g = *g * slope
        }
    });
}
