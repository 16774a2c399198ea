//! Little-endian primitives for the binary snapshot formats.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::vector::SparseVec;

pub(crate) fn put_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub(crate) fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_bytes<W: Write>(w: &mut W, b: &[u8]) -> Result<()> {
    put_u64(w, b.len() as u64)?;
    w.write_all(b)?;
    Ok(())
}

pub(crate) fn put_sparse<W: Write>(w: &mut W, v: &SparseVec) -> Result<()> {
    put_u32(w, v.len_u32()?)?;
    put_u32(w, v.nnz() as u32)?;
    for &i in v.indices() {
        put_u32(w, i)?;
    }
    for &x in v.values() {
        put_f64(w, x)?;
    }
    Ok(())
}

pub(crate) fn get_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub(crate) fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn get_bytes<R: Read>(r: &mut R, limit: usize) -> Result<Vec<u8>> {
    let n = get_u64(r)? as usize;
    if n > limit {
        return Err(Error::Format(format!("length prefix {n} exceeds limit {limit}")));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub(crate) fn get_sparse<R: Read>(r: &mut R) -> Result<SparseVec> {
    let dim = get_u32(r)? as usize;
    let nnz = get_u32(r)? as usize;
    if nnz > dim {
        return Err(Error::Format(format!("sparse vector with {nnz} entries in dim {dim}")));
    }
    let indices = (0..nnz).map(|_| get_u32(r)).collect::<Result<Vec<_>>>()?;
    let values = (0..nnz).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    SparseVec::from_parts(dim, indices, values)
        .ok_or_else(|| Error::Format("malformed sparse vector".into()))
}
