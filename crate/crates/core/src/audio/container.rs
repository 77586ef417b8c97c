//! Binary matrix container shared by feature caches and embedding exports.
//!
//! Layout (all little-endian): 4-byte magic, `u32` version, `u32` rows,
//! `u32` columns, then `rows * columns` `f32` values in row-major order.

use std::path::Path;

use crate::error::{NpcError, Result};
use crate::io::atomic_write;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CONTAINER_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContainerKind {
    /// MFCC feature cache, magic `NPCF`.
    Features,
    /// Embedding export, magic `NPCE`.
    Embeddings,
}

impl ContainerKind {
    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            ContainerKind::Features => b"NPCF",
            ContainerKind::Embeddings => b"NPCE",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ContainerKind::Features => "npcf",
            ContainerKind::Embeddings => "npce",
        }
    }
}

pub fn encode_matrix<S: Scalar>(kind: ContainerKind, matrix: &Tensor<S>) -> Result<Vec<u8>> {
    if matrix.rank() != 2 {
        return Err(NpcError::shape("container stores rank-2 matrices"));
    }
    let (rows, cols) = (matrix.dim(0), matrix.dim(1));
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * matrix.len());
    out.extend_from_slice(kind.magic());
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in matrix.data() {
        out.extend_from_slice(&v.as_f32().to_le_bytes());
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Reads only the `(rows, columns)` header fields.
pub fn decode_header(kind: ContainerKind, bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(NpcError::CorruptFile("container header truncated".into()));
    }
    if &bytes[..4] != kind.magic() {
        return Err(NpcError::VersionMismatch(format!(
            "expected magic {:?}",
            String::from_utf8_lossy(kind.magic())
        )));
    }
    let version = u32_at(bytes, 4);
    if version != CONTAINER_VERSION {
        return Err(NpcError::VersionMismatch(format!("container version {version}")));
    }
    Ok((u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize))
}

pub fn decode_matrix<S: Scalar>(kind: ContainerKind, bytes: &[u8]) -> Result<Tensor<S>> {
    let (rows, cols) = decode_header(kind, bytes)?;
    let expected = HEADER_LEN + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(NpcError::CorruptFile(format!(
            "container holds {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| S::c(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    Tensor::from_vec(&[rows, cols], data)
}

pub fn write_matrix<S: Scalar>(path: &Path, kind: ContainerKind, matrix: &Tensor<S>) -> Result<()> {
    atomic_write(path, &encode_matrix(kind, matrix)?)
}

pub fn read_matrix<S: Scalar>(path: &Path, kind: ContainerKind) -> Result<Tensor<S>> {
    decode_matrix(kind, &crate::io::read_file(path)?)
}

/// Row and column counts without reading the payload.
pub fn read_header(path: &Path, kind: ContainerKind) -> Result<(usize, usize)> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| crate::io::map_open_error(path, e))?;
    let mut head = [0u8; HEADER_LEN];
    f.read_exact(&mut head)
        .map_err(|_| NpcError::CorruptFile(format!("{}: header truncated", path.display())))?;
    decode_header(kind, &head)
}
