//! Dense binary layout: magic `FFDT`, `u32` version, `u64` order, `u64` mode
//! sizes, then the values as little-endian `f64` in first-index-fastest order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, DEFAULT_ELEMENT_BUDGET};

const MAGIC: &[u8; 4] = b"FFDT";
const VERSION: u32 = 1;

pub fn write_dense_binary<W: Write>(w: &mut W, t: &DenseTensor<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(t.order() as u64).to_le_bytes())?;
    for &n in t.dims() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in t.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dense_binary<R: Read>(mut r: R) -> Result<DenseTensor<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidTensor(
            "not a dense binary tensor file".into(),
        ));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::InvalidTensor(format!(
            "unsupported version {version}"
        )));
    }
    let order = u64::from_le_bytes(read_array(&mut r)?) as usize;
    if !(2..=64).contains(&order) {
        return Err(Error::InvalidTensor(format!("implausible order {order}")));
    }
    let dims = (0..order)
        .map(|_| Ok(u64::from_le_bytes(read_array(&mut r)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let len = crate::tensor::check_budget(&dims, DEFAULT_ELEMENT_BUDGET)?;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::InvalidTensor(
            "trailing bytes after tensor values".into(),
        ));
    }
    DenseTensor::new(dims, values)
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
