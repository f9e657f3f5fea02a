//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "EXTCKPT\0" | version u32 | n_dims u32 | receiver u8 | 8 × width u32
//! | section count u32 | sections...
//! section: name length u32 | UTF-8 name | value count u64 | values f64...
//! ```
//!
//! Sections hold parameter values and batch-norm running statistics, named
//! and ordered as the networks expose them.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{Agents, ReceiverKind, Widths};
use crate::kernel::{Module, Slot};

use super::CliError;

pub const MAGIC: &[u8; 8] = b"EXTCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n_dims: usize,
    pub receiver: ReceiverKind,
    pub widths: Widths,
    pub sections: Vec<(String, Vec<f64>)>,
}

fn widths_flat(w: &Widths) -> [usize; 8] {
    [
        w.sender[0],
        w.sender[1],
        w.basic[0],
        w.basic[1],
        w.basic[2],
        w.attention_stage1,
        w.attention_stage2[0],
        w.attention_stage2[1],
    ]
}

fn widths_from(v: [usize; 8]) -> Widths {
    Widths { sender: [v[0], v[1]], basic: [v[2], v[3], v[4]], attention_stage1: v[5], attention_stage2: [v[6], v[7]] }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    pub fn from_agents(agents: &mut Agents) -> Self {
        let mut sections = Vec::new();
        agents.visit("", &mut |name, slot| {
            let values = match slot {
                Slot::Param(p) => p.value.as_slice().to_vec(),
                Slot::Buffer(b) => b.clone(),
            };
            sections.push((name.to_string(), values));
        });
        Checkpoint { n_dims: agents.n_dims(), receiver: agents.kind(), widths: agents.widths, sections }
    }

    /// Rebuilds the networks. Every section must match a slot of the same
    /// name and size, and every slot must be covered.
    pub fn to_agents(&self) -> Result<Agents, CliError> {
        let mut agents = Agents::new(self.n_dims, self.receiver, self.widths, &mut ChaCha8Rng::seed_from_u64(0));
        let mut remaining = self.sections.iter();
        let mut error = None;
        agents.visit("", &mut |name, slot| {
            if error.is_some() {
                return;
            }
            let target: &mut [f64] = match slot {
                Slot::Param(p) => p.value.as_mut_slice(),
                Slot::Buffer(b) => b.as_mut_slice(),
            };
            match remaining.next() {
                Some((n, v)) if n == name && v.len() == target.len() => target.copy_from_slice(v),
                Some((n, v)) => {
                    error = Some(format!("section `{n}` ({} values) where `{name}` ({}) was expected", v.len(), target.len()))
                }
                None => error = Some(format!("missing section `{name}`")),
            }
        });
        if let Some(e) = error {
            return Err(CliError::Checkpoint(e));
        }
        if let Some((n, _)) = remaining.next() {
            return Err(CliError::Checkpoint(format!("unexpected section `{n}`")));
        }
        Ok(agents)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_dims as u32).to_le_bytes());
        out.push(match self.receiver {
            ReceiverKind::Basic => 0,
            ReceiverKind::Attentional => 1,
        });
        for w in widths_flat(&self.widths) {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, values) in &self.sections {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(8)? != MAGIC {
            return Err(CliError::Checkpoint("bad magic".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(CliError::Checkpoint(format!("unsupported version {version}")));
        }
        let n_dims = c.u32()? as usize;
        let receiver = match c.take(1)?[0] {
            0 => ReceiverKind::Basic,
            1 => ReceiverKind::Attentional,
            k => return Err(CliError::Checkpoint(format!("unknown receiver kind {k}"))),
        };
        let mut w = [0usize; 8];
        for slot in &mut w {
            *slot = c.u32()? as usize;
        }
        let count = c.u32()?;
        let mut sections = Vec::new();
        for _ in 0..count {
            let len = c.u32()? as usize;
            let name = std::str::from_utf8(c.take(len)?)
                .map_err(|_| CliError::Checkpoint("section name is not UTF-8".into()))?
                .to_string();
            let n = usize::try_from(c.u64()?).map_err(|_| CliError::Checkpoint("section too large".into()))?;
            let raw = c.take(n.checked_mul(8).ok_or_else(|| CliError::Checkpoint("section too large".into()))?)?;
            let values = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
            sections.push((name, values));
        }
        if c.pos != bytes.len() {
            return Err(CliError::Checkpoint(format!("{} trailing bytes", bytes.len() - c.pos)));
        }
        Ok(Checkpoint { n_dims, receiver, widths: widths_from(w), sections })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| CliError::io(path, e))?)
    }
}
