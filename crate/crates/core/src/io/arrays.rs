//! Two-dimensional `f32` arrays: magic `ICLB`, `u32` version, `u32` rows,
//! `u32` columns, then row-major little-endian values.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{atomic_write, expect_end, read_exact, read_f32s, read_u32};
use crate::error::{Error, Result};

pub const ARRAY_MAGIC: [u8; 4] = *b"ICLB";
pub const ARRAY_VERSION: u32 = 1;

pub fn write_array_to(a: &Array2<f64>, w: &mut dyn Write) -> Result<()> {
    let (rows, cols) = a.dim();
    let too_big = |n: usize| u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} too large")));
    w.write_all(&ARRAY_MAGIC)?;
    w.write_all(&ARRAY_VERSION.to_le_bytes())?;
    w.write_all(&too_big(rows)?.to_le_bytes())?;
    w.write_all(&too_big(cols)?.to_le_bytes())?;
    let mut buf = Vec::with_capacity(a.len() * 4);
    for &v in a.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_array_from(r: &mut dyn Read) -> Result<Array2<f64>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if magic != ARRAY_MAGIC {
        return Err(Error::Format("not an array file (bad magic)".into()));
    }
    let version = read_u32(r, "version")?;
    if version != ARRAY_VERSION {
        return Err(Error::Format(format!("unsupported array version {version}")));
    }
    let rows = read_u32(r, "rows")? as usize;
    let cols = read_u32(r, "columns")? as usize;
    let n = rows
        .checked_mul(cols)
        .filter(|&n| n <= 1 << 31)
        .ok_or_else(|| Error::Format(format!("implausible array size {rows}x{cols}")))?;
    let values = read_f32s(r, n, "array values")?;
    expect_end(r)?;
    Ok(Array2::from_shape_vec((rows, cols), values.into_iter().map(f64::from).collect()).expect("sized"))
}

pub fn write_array(path: &Path, a: &Array2<f64>) -> Result<()> {
    atomic_write(path, |w| write_array_to(a, w))
}

pub fn read_array(path: &Path) -> Result<Array2<f64>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_array_from(&mut r).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let a = Array2::from_shape_fn((rows, cols), |(i, j)| ((seed % 1000) as f64 + i as f64 * 3.25 - j as f64) as f32 as f64);
            let mut bytes = Vec::new();
            write_array_to(&a, &mut bytes).unwrap();
            prop_assert_eq!(bytes.len(), 16 + 4 * rows * cols);
            let back = read_array_from(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(&back, &a);
            let mut again = Vec::new();
            write_array_to(&back, &mut again).unwrap();
            prop_assert_eq!(again, bytes);
        }
    }

    #[test]
    fn corrupt_files() {
        let mut bytes = Vec::new();
        write_array_to(&Array2::zeros((2, 3)), &mut bytes).unwrap();
        assert!(read_array_from(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_array_from(&mut extra.as_slice()).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'Z';
        assert!(matches!(read_array_from(&mut bad.as_slice()), Err(Error::Format(_))));
    }
}
