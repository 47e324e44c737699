//! Binary parameter files.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size    | field                                   |
//! |--------|---------|-----------------------------------------|
//! | 0      | 4       | magic `b"MLPF"`                         |
//! | 4      | 2       | format version, currently `1` (u16)     |
//! | 6      | 1       | activation tag: 0 = tanh, 1 = relu (u8) |
//! | 7      | 1       | reserved, zero                          |
//! | 8      | 4       | number of layer sizes `L` (u32)         |
//! | 12     | 4·L     | layer sizes (u32 each)                  |
//! | 12+4L  | 8       | parameter count `P` (u64)               |
//! | 20+4L  | 8·P     | parameters (f64 each), in [`Mlp`] order |

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Activation, Mlp};

const MAGIC: &[u8; 4] = b"MLPF";
const VERSION: u16 = 1;

pub fn write_mlp<W: Write>(net: &Mlp, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[net.activation().tag(), 0])?;
    let sizes = net.layer_sizes();
    out.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for &s in sizes {
        out.write_all(&(s as u32).to_le_bytes())?;
    }
    out.write_all(&(net.params.len() as u64).to_le_bytes())?;
    for v in &net.params.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(buf)
}

pub fn read_mlp<R: Read>(mut input: R) -> Result<Mlp> {
    if &read_array::<4, _>(&mut input)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut input)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [tag, _] = read_array::<2, _>(&mut input)?;
    let activation = Activation::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown activation tag {tag}")))?;
    let n_sizes = u32::from_le_bytes(read_array(&mut input)?) as usize;
    if n_sizes > 1024 {
        return Err(Error::Format(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| Ok(u32::from_le_bytes(read_array(&mut input)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = u64::from_le_bytes(read_array(&mut input)?) as usize;
    if count != Mlp::param_count(&sizes) {
        return Err(Error::Format(format!(
            "parameter count {count} does not match layer sizes {sizes:?}"
        )));
    }
    let values = (0..count)
        .map(|_| Ok(f64::from_le_bytes(read_array(&mut input)?)))
        .collect::<Result<Vec<_>>>()?;
    Mlp::from_values(&sizes, activation, values)
}
