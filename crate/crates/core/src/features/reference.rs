//! Common average re-referencing.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Subtracts the across-channel mean from every channel at each sample.
///
/// Rows are channels, columns are samples.
pub fn common_average_reference(data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n_channels = data.nrows();
    if n_channels < 2 {
        return Err(Error::DegenerateMontage(n_channels));
    }
    let mean = data.mean_axis(Axis(0)).expect("at least two channels");
    Ok(&data - &mean.insert_axis(Axis(0)))
}
