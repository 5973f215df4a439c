//! Single-tensor binary format: `TNSR`, u8 dtype code, u8 rank, u32 extents,
//! row-major little-endian payload.

use std::path::Path;

use engagenet_core::{DType, Scalar, Tensor};

use crate::bytes::Reader;
use crate::error::{read_file, write_file, Result};

pub const MAGIC: &[u8; 4] = b"TNSR";

/// A tensor of either float width, as found on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    /// Converted to `T` if the widths differ.
    pub fn into_tensor<T: Scalar>(self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }
}

pub fn encode<T: Scalar>(t: &Tensor<T>, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.push(T::DTYPE.code());
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        v.write_le(out);
    }
}

pub fn decode(r: &mut Reader<'_>) -> Result<AnyTensor> {
    r.magic(MAGIC)?;
    let at = r.offset();
    let code = r.u8("dtype")?;
    let dtype = DType::from_code(code).ok_or_else(|| r.fail(at, format!("unknown dtype code {code}")))?;
    let rank = r.u8("rank")? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let at = r.offset();
        let d = r.u32("extent")? as usize;
        if d == 0 {
            return Err(r.fail(at, "zero extent"));
        }
        shape.push(d);
    }
    let n: usize = shape.iter().product();
    Ok(match dtype {
        DType::F32 => AnyTensor::F32(payload(r, shape, n)?),
        DType::F64 => AnyTensor::F64(payload(r, shape, n)?),
    })
}

fn payload<T: Scalar>(r: &mut Reader<'_>, shape: Vec<usize>, n: usize) -> Result<Tensor<T>> {
    let size = T::DTYPE.size_of();
    let bytes = r.take(n.saturating_mul(size), "payload")?;
    let data = bytes.chunks_exact(size).map(T::read_le).collect();
    Ok(Tensor::new(shape, data)?)
}

pub fn write<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    let mut out = Vec::new();
    encode(t, &mut out);
    write_file(path, &out)
}

pub fn read(path: &Path) -> Result<AnyTensor> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes, path);
    let t = decode(&mut r)?;
    r.finish()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_widths() {
        let a = Tensor::<f32>::from_fn([2, 3], |i| i as f32 * 0.1 - 0.2);
        let b = Tensor::<f64>::from_fn([4], |i| (i as f64).sqrt());
        let mut buf = Vec::new();
        encode(&a, &mut buf);
        encode(&b, &mut buf);
        let mut r = Reader::new(&buf, Path::new("mem"));
        assert_eq!(decode(&mut r).unwrap(), AnyTensor::F32(a));
        assert_eq!(decode(&mut r).unwrap(), AnyTensor::F64(b));
        r.finish().unwrap();
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        encode(&Tensor::<f64>::from_f64([1], &[1.0]).unwrap(), &mut buf);
        assert_eq!(&buf[..10], b"TNSR\x02\x01\x01\x00\x00\x00");
        assert_eq!(&buf[10..], &1.0f64.to_le_bytes());
    }

    #[test]
    fn bad_dtype_reports_offset() {
        let buf = b"TNSR\x07\x01\x01\x00\x00\x00".to_vec();
        let err = decode(&mut Reader::new(&buf, Path::new("x"))).unwrap_err();
        assert!(err.to_string().contains("byte 4"), "{err}");
    }
}
