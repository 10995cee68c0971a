//! The `DIPT` raw-tensor stream: magic, u32 version, u8 dtype, u8 ndim,
//! ndim × u64 dims, then a row-major little-endian payload.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DIPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "tensor dims {dims:?} hold {expected} values, got {}",
                data.len()
            )));
        }
        if dims.len() > u8::MAX as usize {
            return Err(Error::shape("tensor has too many dimensions"));
        }
        Ok(Self { dims, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

pub fn encode_tensor(t: &Tensor, dtype: DType) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 8 * t.dims.len() + dtype.width() * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype.code());
    out.push(t.dims.len() as u8);
    for &d in &t.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match dtype {
        DType::F32 => t
            .data
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        DType::F64 => t
            .data
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor, dtype: DType) -> Result<()> {
    w.write_all(&encode_tensor(t, dtype))?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Protocol(format!("truncated tensor {what}")),
        _ => Error::Io(e),
    })
}

/// Reads one tensor; `f32` payloads are widened to `f64`.
pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let mut head = [0u8; 10];
    read_exact_or(r, &mut head, "header")?;
    if &head[..4] != MAGIC {
        return Err(Error::Protocol("missing DIPT magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Protocol(format!(
            "unsupported tensor version {version}"
        )));
    }
    let dtype = match head[8] {
        0 => DType::F32,
        1 => DType::F64,
        other => return Err(Error::Protocol(format!("unknown tensor dtype {other}"))),
    };
    let ndim = head[9] as usize;
    let mut dims = Vec::with_capacity(ndim);
    let mut total: usize = 1;
    for _ in 0..ndim {
        let mut b = [0u8; 8];
        read_exact_or(r, &mut b, "dims")?;
        let d = usize::try_from(u64::from_le_bytes(b))
            .map_err(|_| Error::Protocol("tensor dimension overflows".into()))?;
        total = total
            .checked_mul(d)
            .ok_or_else(|| Error::Protocol("tensor size overflows".into()))?;
        dims.push(d);
    }
    let bytes = total
        .checked_mul(dtype.width())
        .ok_or_else(|| Error::Protocol("tensor size overflows".into()))?;
    let mut payload = Vec::new();
    r.take(bytes as u64).read_to_end(&mut payload)?;
    if payload.len() != bytes {
        return Err(Error::Protocol(format!(
            "tensor payload has {} bytes, expected {bytes}",
            payload.len()
        )));
    }
    let data = match dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        DType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok(Tensor { dims, data })
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut cursor = bytes;
    let t = read_tensor(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::Protocol(format!(
            "{} trailing bytes after tensor",
            cursor.len()
        )));
    }
    Ok(t)
}

pub fn save_tensor(path: &Path, t: &Tensor) -> Result<()> {
    fs::write(path, encode_tensor(t, DType::F64))?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    decode_tensor(&fs::read(path)?)
}
