//! Scalp topography images by thin-plate-spline interpolation.
//!
//! Electrode positions are projected onto the plane with an azimuthal
//! equidistant projection centred on the vertex: the vertex maps to the
//! origin and the equator (90 degrees from the vertex) to the unit circle.
//! The image grid covers `[-1, 1]^2` with pixel centres at
//! `-1 + (j + 0.5) / 16`. Row 0 is the anterior edge (+y), column 0 the
//! subject's left (-x). Pixels outside the unit disk are masked to zero.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use super::{ScalpTopography, TOPO_SIZE};
use crate::error::{Error, Result};

/// Projects a head-centred position (+x right, +y anterior, +z up) onto the
/// plane. The input need not be exactly unit length.
pub fn azimuthal_equidistant(p: [f64; 3]) -> [f64; 2] {
    let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let [x, y, z] = p.map(|c| c / norm);
    let polar = z.clamp(-1.0, 1.0).acos();
    let radius = polar / std::f64::consts::FRAC_PI_2;
    let rho = x.hypot(y);
    if rho < 1e-12 {
        [0.0, 0.0]
    } else {
        [x / rho * radius, y / rho * radius]
    }
}

/// Plane coordinates of pixel `(row, col)`.
pub fn pixel_center(row: usize, col: usize) -> [f64; 2] {
    let step = 2.0 / TOPO_SIZE as f64;
    [-1.0 + (col as f64 + 0.5) * step, 1.0 - (row as f64 + 0.5) * step]
}

/// The head disk: pixels whose centre lies within the unit circle.
pub fn head_mask() -> Array2<bool> {
    Array2::from_shape_fn((TOPO_SIZE, TOPO_SIZE), |(r, c)| {
        let [x, y] = pixel_center(r, c);
        x * x + y * y <= 1.0
    })
}

fn tps_kernel(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Thin-plate spline through a fixed set of planar centres.
///
/// Values are mapped to spline coefficients by a precomputed linear
/// operator, so one interpolator serves every component of a recording.
#[derive(Debug, Clone)]
pub struct TopoInterpolator {
    centers: Vec<[f64; 2]>,
    /// `(n + 3) x n`: spline coefficients (n kernel weights, then affine
    /// terms 1, x, y) from electrode values.
    coefficient_map: DMatrix<f64>,
    /// `32*32 x n`: grid values from electrode values (zero rows outside the mask).
    grid_map: DMatrix<f64>,
    mask: Array2<bool>,
}

impl TopoInterpolator {
    pub fn new(positions: &[[f64; 3]]) -> Result<Self> {
        let n = positions.len();
        if n < 3 {
            return Err(Error::InterpolationRank(format!(
                "need at least 3 electrodes, got {n}"
            )));
        }
        let centers: Vec<[f64; 2]> = positions.iter().map(|&p| azimuthal_equidistant(p)).collect();
        check_not_collinear(&centers)?;

        let size = n + 3;
        let mut system = DMatrix::<f64>::zeros(size, size);
        for i in 0..n {
            for j in 0..n {
                system[(i, j)] = tps_kernel(dist2(centers[i], centers[j]));
            }
            let affine = [1.0, centers[i][0], centers[i][1]];
            for (k, a) in affine.into_iter().enumerate() {
                system[(i, n + k)] = a;
                system[(n + k, i)] = a;
            }
        }
        let rhs = DMatrix::<f64>::identity(size, n);
        let coefficient_map = system.lu().solve(&rhs).ok_or_else(|| {
            Error::InterpolationRank("spline system is singular (coincident electrodes?)".into())
        })?;
        if coefficient_map.iter().any(|v| !v.is_finite()) {
            return Err(Error::InterpolationRank("spline system is ill-conditioned".into()));
        }

        let mask = head_mask();
        let mut basis = DMatrix::<f64>::zeros(TOPO_SIZE * TOPO_SIZE, size);
        for ((r, c), &inside) in mask.indexed_iter() {
            if !inside {
                continue;
            }
            let p = pixel_center(r, c);
            let row = r * TOPO_SIZE + c;
            for (j, &center) in centers.iter().enumerate() {
                basis[(row, j)] = tps_kernel(dist2(p, center));
            }
            basis[(row, n)] = 1.0;
            basis[(row, n + 1)] = p[0];
            basis[(row, n + 2)] = p[1];
        }
        let grid_map = basis * &coefficient_map;
        Ok(TopoInterpolator {
            centers,
            coefficient_map,
            grid_map,
            mask,
        })
    }

    pub fn n_electrodes(&self) -> usize {
        self.centers.len()
    }

    pub fn projected_positions(&self) -> &[[f64; 2]] {
        &self.centers
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.centers.len() {
            return Err(Error::InvalidRecording(format!(
                "projection has {} values for {} electrodes",
                values.len(),
                self.centers.len()
            )));
        }
        Ok(())
    }

    /// Interpolates electrode values onto the masked 32x32 grid.
    pub fn interpolate(&self, values: &[f64]) -> Result<ScalpTopography> {
        self.check_len(values)?;
        let v = DVector::from_column_slice(values);
        let grid = &self.grid_map * v;
        let pixels = Array2::from_shape_fn((TOPO_SIZE, TOPO_SIZE), |(r, c)| {
            if self.mask[(r, c)] {
                grid[r * TOPO_SIZE + c]
            } else {
                0.0
            }
        });
        Ok(ScalpTopography::new(pixels, self.mask.clone()))
    }

    /// Evaluates the spline through `values` at an arbitrary plane point.
    pub fn evaluate(&self, values: &[f64], point: [f64; 2]) -> Result<f64> {
        self.check_len(values)?;
        let coef = &self.coefficient_map * DVector::from_column_slice(values);
        let n = self.centers.len();
        let mut acc = coef[n] + coef[n + 1] * point[0] + coef[n + 2] * point[1];
        for (j, &c) in self.centers.iter().enumerate() {
            acc += coef[j] * tps_kernel(dist2(point, c));
        }
        Ok(acc)
    }
}

fn check_not_collinear(points: &[[f64; 2]]) -> Result<()> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    // smallest/largest eigenvalue ratio of the scatter matrix
    if trace <= 0.0 || det <= 1e-12 * trace * trace {
        return Err(Error::InterpolationRank(
            "electrode projections are collinear".into(),
        ));
    }
    Ok(())
}

/// One-shot interpolation; prefer [`TopoInterpolator`] when many projections
/// share a montage.
pub fn scalp_topography(projection: &[f64], positions: &[[f64; 3]]) -> Result<ScalpTopography> {
    TopoInterpolator::new(positions)?.interpolate(projection)
}
