//! `NPCK` checkpoint files: named float32 tensors plus a trailing CRC32.
//!
//! ```text
//! "NPCK" | version u32 | count u32 |
//!   { name_len u16 | name | rank u8 | dims u32 x rank | f32 payload } x count |
//! crc32 u32
//! ```
//! All integers and floats are little endian. Besides the model tensors the
//! file carries `meta.arch` (the architecture record) and, when saved with
//! optimizer state, `opt.step` and one `opt.acc.<name>` per trainable tensor.

use std::collections::BTreeMap;
use std::path::Path;

use super::arch::ArchitectureSpec;
use super::params::{build_model, ModelParams};
use crate::error::{NpcError, Result};
use crate::io::{atomic_write, read_file};
use crate::nn::OptimizerState;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const ARCH_KEY: &str = "meta.arch";
const STEP_KEY: &str = "opt.step";
const ACC_PREFIX: &str = "opt.acc.";

fn push_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: impl Iterator<Item = f32>) {
    out.extend((name.len() as u16).to_le_bytes());
    out.extend(name.as_bytes());
    out.push(shape.len() as u8);
    for d in shape {
        out.extend((*d as u32).to_le_bytes());
    }
    for v in data {
        out.extend(v.to_le_bytes());
    }
}

/// Serializes parameters (and optionally optimizer state) to bytes.
pub fn encode_checkpoint<S: Scalar>(
    params: &ModelParams<S>,
    optimizer: Option<&OptimizerState<S>>,
) -> Vec<u8> {
    let named = params.named_tensors();
    let trainable = params.trainable();
    let mut body = Vec::new();
    let mut count = 0u32;
    let arch = params.arch.encode();
    push_tensor(&mut body, ARCH_KEY, &[arch.len()], arch.into_iter());
    count += 1;
    for (name, t) in &named {
        push_tensor(&mut body, name, t.shape(), t.data().iter().map(|v| v.as_f32()));
        count += 1;
    }
    if let Some(opt) = optimizer {
        // 16-bit limbs are exact in f32
        let limbs = (0..4).map(|i| ((opt.step >> (16 * i)) & 0xffff) as f32);
        push_tensor(&mut body, STEP_KEY, &[4], limbs);
        count += 1;
        for ((name, _), acc) in trainable.iter().zip(&opt.accumulators) {
            let key = format!("{ACC_PREFIX}{name}");
            push_tensor(&mut body, &key, acc.shape(), acc.data().iter().map(|v| v.as_f32()));
            count += 1;
        }
    }
    let mut out = Vec::with_capacity(body.len() + 16);
    out.extend(CHECKPOINT_MAGIC);
    out.extend(CHECKPOINT_VERSION.to_le_bytes());
    out.extend(count.to_le_bytes());
    out.extend(body);
    let crc = crc32fast::hash(&out);
    out.extend(crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| NpcError::CorruptFile("checkpoint record overruns file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

type RawTensors = BTreeMap<String, (Vec<usize>, Vec<f32>)>;

fn decode_raw(bytes: &[u8]) -> Result<RawTensors> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(NpcError::VersionMismatch("not an NPCK checkpoint".into()));
    }
    if bytes.len() < 16 {
        return Err(NpcError::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(NpcError::ChecksumMismatch);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NpcError::VersionMismatch(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let count = r.u32()?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| NpcError::CorruptFile("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.take(1)?[0] as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = r
            .take(n.checked_mul(4).ok_or_else(|| NpcError::CorruptFile("tensor too large".into()))?)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if out.insert(name.clone(), (shape, data)).is_some() {
            return Err(NpcError::CorruptFile(format!("duplicate tensor `{name}`")));
        }
    }
    if r.pos != body.len() {
        return Err(NpcError::CorruptFile("trailing bytes after last tensor".into()));
    }
    Ok(out)
}

/// Parameters and, when present, optimizer state.
pub fn decode_checkpoint<S: Scalar>(
    bytes: &[u8],
) -> Result<(ModelParams<S>, Option<OptimizerState<S>>)> {
    let mut raw = decode_raw(bytes)?;
    let (_, arch) = raw
        .remove(ARCH_KEY)
        .ok_or_else(|| NpcError::CorruptFile("missing architecture record".into()))?;
    let arch = ArchitectureSpec::decode(&arch)?;
    let mut params = build_model::<S>(&arch, 0)?;
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    for name in &names {
        let (shape, data) = raw
            .remove(name)
            .ok_or_else(|| NpcError::CorruptFile(format!("missing tensor `{name}`")))?;
        let t = Tensor::from_vec(&shape, data.into_iter().map(|v| S::c(v as f64)).collect())?;
        params
            .set_named(name, t)
            .map_err(|e| NpcError::CorruptFile(e.to_string()))?;
    }
    let optimizer = match raw.remove(STEP_KEY) {
        None => None,
        Some((_, limbs)) if limbs.len() == 4 => {
            let step = limbs
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, v)| acc | ((*v as u64) << (16 * i)));
            let mut accumulators = Vec::new();
            for (name, t) in params.trainable() {
                let (shape, data) = raw
                    .remove(&format!("{ACC_PREFIX}{name}"))
                    .ok_or_else(|| NpcError::CorruptFile(format!("missing accumulator for `{name}`")))?;
                if shape != t.shape() {
                    return Err(NpcError::CorruptFile(format!("accumulator `{name}` has shape {shape:?}")));
                }
                accumulators.push(Tensor::from_vec(
                    &shape,
                    data.into_iter().map(|v| S::c(v as f64)).collect(),
                )?);
            }
            Some(OptimizerState { accumulators, step })
        }
        Some(_) => return Err(NpcError::CorruptFile("malformed optimizer step".into())),
    };
    if let Some(extra) = raw.keys().next() {
        return Err(NpcError::CorruptFile(format!("unexpected tensor `{extra}`")));
    }
    Ok((params, optimizer))
}

pub fn save_checkpoint<S: Scalar>(
    path: &Path,
    params: &ModelParams<S>,
    optimizer: Option<&OptimizerState<S>>,
) -> Result<()> {
    atomic_write(path, &encode_checkpoint(params, optimizer))
}

pub fn load_checkpoint<S: Scalar>(
    path: &Path,
) -> Result<(ModelParams<S>, Option<OptimizerState<S>>)> {
    decode_checkpoint(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArchitectureSpec;

    fn model() -> ModelParams<f32> {
        build_model(&ArchitectureSpec::default(), 11).unwrap()
    }

    #[test]
    fn round_trip_is_exact_for_f32() {
        let mut p = model();
        p.convs[2].bn.running_var.fill(1.7);
        let opt = OptimizerState {
            accumulators: p.trainable().iter().map(|(_, t)| Tensor::full(t.shape(), 0.25)).collect(),
            step: 123_456_789_012,
        };
        let bytes = encode_checkpoint(&p, Some(&opt));
        let (q, o) = decode_checkpoint::<f32>(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(o.unwrap(), opt);
        let (_, none) = decode_checkpoint::<f32>(&encode_checkpoint(&p, None)).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = encode_checkpoint(&model(), None);
        assert!(matches!(
            decode_checkpoint::<f32>(&bytes[..bytes.len() - 10]),
            Err(NpcError::ChecksumMismatch)
        ));
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_checkpoint::<f32>(&bad), Err(NpcError::VersionMismatch(_))));
        let mut flipped = bytes;
        flipped[100] ^= 1;
        assert!(matches!(decode_checkpoint::<f32>(&flipped), Err(NpcError::ChecksumMismatch)));
    }

    #[test]
    fn wrong_version_rejected() {
        let mut bytes = encode_checkpoint(&model(), None);
        bytes[4] = 2;
        let n = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..n]);
        bytes[n..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_checkpoint::<f32>(&bytes), Err(NpcError::VersionMismatch(_))));
    }
}
