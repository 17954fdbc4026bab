//! Checkpoint container:
//!
//! ```text
//! "CKPT" | u32 version | u32 echo_len | echo (UTF-8 key=value lines)
//!        | u32 n_tensors | n × (u32 name_len | name | u32 rows | u32 cols | f32 × rows·cols)
//! ```
//!
//! All integers and floats are little-endian. The echo carries the network
//! dimensions, training progress and the experiment config, so a checkpoint
//! alone is enough to rebuild the deployment setup.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::policynet::{ChannelMask, NetDims, PolicyParams};
use crate::Params;

pub const CKPT_MAGIC: &[u8; 4] = b"CKPT";
pub const CKPT_VERSION: u32 = 1;
/// Magic, version, echo length and tensor count.
pub const CKPT_FIXED_HEADER: usize = 16;

const RESERVED: &str = "checkpoint.";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Params,
    /// Finished training episodes.
    pub episodes: u64,
    pub rng_digest: String,
    /// Experiment config echo, in order.
    pub config: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn new(params: Params, episodes: u64, rng_digest: impl Into<String>, config: Vec<(String, String)>) -> Self {
        Self { params, episodes, rng_digest: rng_digest.into(), config }
    }

    pub fn dims(&self) -> NetDims {
        self.params.dims
    }

    /// Value of `key` in the config echo.
    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn echo_text(&self) -> Result<String> {
        let d = self.params.dims;
        let mut lines = vec![
            format!("{RESERVED}d_motion={}", d.d_motion),
            format!("{RESERVED}d_visual={}", d.d_visual),
            format!("{RESERVED}d_goal={}", d.d_goal),
            format!("{RESERVED}goal_modality={}", d.goal_modality.as_str()),
            format!("{RESERVED}encoder_units={}", d.enc),
            format!("{RESERVED}hidden_units={}", d.hidden),
            format!("{RESERVED}n_actions={}", d.n_actions),
            format!("{RESERVED}mask={}", d.mask.name()),
            format!("{RESERVED}episodes={}", self.episodes),
            format!("{RESERVED}rng_digest={}", self.rng_digest),
        ];
        for (k, v) in &self.config {
            if k.starts_with(RESERVED) || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::InvalidInput(format!("config echo entry {k:?} cannot be stored")));
            }
            lines.push(format!("{k}={v}"));
        }
        Ok(lines.join("\n"))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let echo = self.echo_text()?;
        let tensors = self.params.tensors();
        let len32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{what} {v} exceeds u32")))
        };
        let mut out = Vec::with_capacity(encoded_len(echo.len(), &tensors));
        out.extend_from_slice(CKPT_MAGIC);
        out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        out.extend_from_slice(&len32(echo.len(), "echo length")?.to_le_bytes());
        out.extend_from_slice(echo.as_bytes());
        out.extend_from_slice(&len32(tensors.len(), "tensor count")?.to_le_bytes());
        for (name, m) in tensors {
            out.extend_from_slice(&len32(name.len(), "name length")?.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&len32(m.rows, "rows")?.to_le_bytes());
            out.extend_from_slice(&len32(m.cols, "cols")?.to_le_bytes());
            for v in &m.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CKPT_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = r.u32()?;
        if version != CKPT_VERSION {
            return Err(Error::Version { found: version, expected: CKPT_VERSION });
        }
        let echo_len = r.u32()? as usize;
        let echo = std::str::from_utf8(r.take(echo_len)?)
            .map_err(|_| Error::Format("checkpoint echo is not UTF-8".into()))?;

        let mut reserved = std::collections::HashMap::new();
        let mut config = Vec::new();
        for line in echo.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed echo line {line:?}")))?;
            match k.strip_prefix(RESERVED) {
                Some(name) => {
                    reserved.insert(name.to_string(), v.to_string());
                }
                None => config.push((k.to_string(), v.to_string())),
            }
        }
        let get = |name: &str| {
            reserved.get(name).ok_or_else(|| Error::Format(format!("checkpoint echo lacks {RESERVED}{name}")))
        };
        let num = |name: &str| -> Result<usize> {
            get(name)?.parse().map_err(|_| Error::Format(format!("bad {RESERVED}{name}")))
        };
        let mask: ChannelMask = get("mask")?.parse().map_err(|_| Error::Format("bad checkpoint mask".into()))?;
        let goal_modality = get("goal_modality")?
            .parse()
            .map_err(|_| Error::Format("bad checkpoint goal modality".into()))?;
        let dims = NetDims {
            d_motion: num("d_motion")?,
            d_visual: num("d_visual")?,
            d_goal: num("d_goal")?,
            goal_modality,
            enc: num("encoder_units")?,
            hidden: num("hidden_units")?,
            n_actions: num("n_actions")?,
            mask,
        };
        let episodes = num("episodes")? as u64;
        let rng_digest = get("rng_digest")?.clone();

        let mut params = PolicyParams::<f32>::zeros(dims).map_err(|e| Error::Format(format!("checkpoint dims: {e}")))?;
        let count = r.u32()? as usize;
        let expected = params.tensors().len();
        if count != expected {
            return Err(Error::Format(format!("{count} tensors, expected {expected}")));
        }
        for (name, slot) in params.tensors_mut() {
            let len = r.u32()? as usize;
            let found = r.take(len)?;
            if found != name.as_bytes() {
                return Err(Error::Format(format!(
                    "expected tensor {name}, found {:?}",
                    String::from_utf8_lossy(found)
                )));
            }
            let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
            if (rows, cols) != (slot.rows, slot.cols) {
                return Err(Error::Format(format!(
                    "tensor {name} is {rows}x{cols}, expected {}x{}",
                    slot.rows, slot.cols
                )));
            }
            let payload = r.take(4 * rows * cols)?;
            for (dst, c) in slot.data.iter_mut().zip(payload.chunks_exact(4)) {
                *dst = f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { params, episodes, rng_digest, config })
    }
}

/// Exact container size for an echo of `echo_len` bytes and these tensors.
pub fn encoded_len(echo_len: usize, tensors: &[(&str, &Mat<f32>)]) -> usize {
    CKPT_FIXED_HEADER + echo_len + tensors.iter().map(|(n, m)| 12 + n.len() + 4 * m.rows * m.cols).sum::<usize>()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("checkpoint truncated at byte {} (need {n} more)", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
