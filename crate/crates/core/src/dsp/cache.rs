//! Flat binary tensor container: an 8-byte magic, format version, dtype
//! code, rank and dimensions (all little-endian), then row-major `f32` data.

use std::io::{Read, Write};

use crate::error::{Result, SeldError};

pub const CACHE_MAGIC: &[u8; 8] = b"SELDTNSR";
pub const CACHE_VERSION: u32 = 1;
const DTYPE_F32: u32 = 1;

pub fn write_tensor<W: Write>(mut w: W, dims: &[usize], data: &[f64]) -> Result<()> {
    let n: usize = dims.iter().product();
    if n != data.len() {
        return Err(SeldError::ShapeMismatch(format!("dims {dims:?} hold {n} values, got {}", data.len())));
    }
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&DTYPE_F32.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(data.len() * 4);
    for &v in data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(SeldError::Format("not a tensor cache file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(SeldError::Format(format!("unsupported cache version {version}")));
    }
    if read_u32(&mut r)? != DTYPE_F32 {
        return Err(SeldError::Format("unsupported cache dtype".into()));
    }
    let rank = read_u32(&mut r)? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        dims.push(u64::from_le_bytes(b) as usize);
    }
    let n: usize = dims.iter().product();
    let mut raw = vec![0u8; n * 4];
    r.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((dims, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.1 - 1.0).collect();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &[2, 3, 4], &data).unwrap();
        assert_eq!(&buf[..8], CACHE_MAGIC);
        assert_eq!(buf.len(), 8 + 12 + 24 + 96);
        let (dims, back) = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(dims, vec![2, 3, 4]);
        for (a, b) in back.iter().zip(&data) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn bad_magic_and_shape() {
        assert!(read_tensor(&b"NOTSELD!\x01\0\0\0"[..]).is_err());
        assert!(write_tensor(Vec::new(), &[2, 2], &[1.0]).is_err());
    }
}
