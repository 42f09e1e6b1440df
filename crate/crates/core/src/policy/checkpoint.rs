//! Binary checkpoint: `PPLC` header, f32 little-endian parameters, CRC32.
//!
//! Parameters live in memory at full precision and are narrowed to f32 on
//! save, so a net only reproduces a loaded checkpoint's forward pass bit for
//! bit after it has itself been through one save/load cycle.

use super::{Activation, Dense, PolicyNet};
use crate::fsutil::write_atomic;
use crate::observe::FeatureMask;
use crate::Scalar;
use ndarray::{Array1, Array2};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"PPLC";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: {0}")]
    Format(String),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint CRC mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("checkpoint observation layout {found:#018x} does not match {expected:#018x}")]
    LayoutMismatch { expected: u64, found: u64 },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub layout_hash: u64,
    pub timesteps: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub meta: CheckpointMeta,
    pub net: PolicyNet<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(net: PolicyNet<T>, mask: FeatureMask, timesteps: u64, seed: u64) -> Self {
        Self { meta: CheckpointMeta { layout_hash: mask.layout_hash(), timesteps, seed }, net }
    }
}

pub fn write_checkpoint<T: Scalar>(ck: &Checkpoint<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&ck.meta.layout_hash.to_le_bytes());
    let layers: Vec<&Dense<T>> = ck.net.layers().collect();
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in &layers {
        out.extend_from_slice(&(l.input() as u32).to_le_bytes());
        out.extend_from_slice(&(l.output() as u32).to_le_bytes());
        out.push(l.activation.code());
    }
    out.extend_from_slice(&ck.meta.timesteps.to_le_bytes());
    out.extend_from_slice(&ck.meta.seed.to_le_bytes());
    let payload_start = out.len();
    for t in ck.net.tensors() {
        for v in t {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[payload_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, CheckpointError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Decodes a checkpoint without checking its observation layout.
pub fn read_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::Format("bad magic".into()))? != MAGIC {
        return Err(CheckpointError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Format(format!("unsupported version {version}")));
    }
    let layout_hash = r.u64()?;
    let count = r.u32()? as usize;
    if count < 2 {
        return Err(CheckpointError::Format(format!("{count} layers, need at least the two heads")));
    }
    let mut shapes = Vec::with_capacity(count.min(64));
    for i in 0..count {
        let input = r.u32()? as usize;
        let output = r.u32()? as usize;
        let act = Activation::from_code(r.u8()?)
            .ok_or_else(|| CheckpointError::Format(format!("layer {i}: unknown activation code")))?;
        shapes.push((input, output, act));
    }
    let timesteps = r.u64()?;
    let seed = r.u64()?;

    let payload_start = r.pos;
    let mut layers = Vec::with_capacity(count);
    for &(input, output, activation) in &shapes {
        let n = input.checked_mul(output).ok_or(CheckpointError::Truncated)?;
        if bytes.len().saturating_sub(r.pos) / 4 < n + output {
            return Err(CheckpointError::Truncated);
        }
        let w: Vec<T> = (0..n).map(|_| r.f32().map(|v| T::lit(v as f64))).collect::<Result<_, _>>()?;
        let b: Vec<T> = (0..output).map(|_| r.f32().map(|v| T::lit(v as f64))).collect::<Result<_, _>>()?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((input, output), w).expect("sized above"),
            bias: Array1::from_vec(b),
            activation,
        });
    }
    let computed = crc32fast::hash(&bytes[payload_start..r.pos]);
    let stored = r.u32()?;
    if stored != computed {
        return Err(CheckpointError::CrcMismatch { stored, computed });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Format("trailing bytes".into()));
    }

    let critic = layers.pop().expect("count >= 2");
    let actor = layers.pop().expect("count >= 2");
    let trunk = layers;
    let mut width = trunk.first().map_or(actor.input(), Dense::input);
    for (i, l) in trunk.iter().enumerate() {
        if l.input() != width {
            return Err(CheckpointError::Format(format!("layer {i} input {} follows width {width}", l.input())));
        }
        width = l.output();
    }
    if actor.input() != width || critic.input() != width || actor.output() != super::NUM_ACTIONS || critic.output() != 1 {
        return Err(CheckpointError::Format("head shapes do not fit the trunk".into()));
    }
    Ok(Checkpoint { meta: CheckpointMeta { layout_hash, timesteps, seed }, net: PolicyNet { trunk, actor, critic } })
}

pub fn save_checkpoint<T: Scalar>(ck: &Checkpoint<T>, path: &Path) -> Result<(), CheckpointError> {
    write_atomic(path, &write_checkpoint(ck))?;
    Ok(())
}

/// Reads a checkpoint and refuses it unless it was trained on `layout`.
pub fn load_checkpoint<T: Scalar>(path: &Path, layout: FeatureMask) -> Result<Checkpoint<T>, CheckpointError> {
    let bytes = std::fs::read(path)?;
    let ck = read_checkpoint(&bytes)?;
    let expected = layout.layout_hash();
    if ck.meta.layout_hash != expected {
        return Err(CheckpointError::LayoutMismatch { expected, found: ck.meta.layout_hash });
    }
    Ok(ck)
}
