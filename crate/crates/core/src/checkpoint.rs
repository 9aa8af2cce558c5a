//! Versioned JSON checkpoints of a full training session.
//!
//! Floats are written with shortest round-trip formatting, so parameters,
//! optimizer moments and reward windows reload bit-exactly, and
//! save -> load -> save reproduces the file byte for byte. RNG states are
//! stored as (seed, stream, word position).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continual::ContinualConfig;
use crate::error::{Error, Result};
use crate::learner::{Algo, Session};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub algo: Algo,
    pub session: Session,
    /// Present for continual runs so they can be resumed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continual: Option<ContinualConfig>,
}

impl Checkpoint {
    pub fn new(session: Session) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            algo: session.algo(),
            session,
            continual: None,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
            algo: Algo,
        }
        let header: Header = serde_json::from_slice(bytes)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: header.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let ckpt: Checkpoint = serde_json::from_slice(bytes)?;
        if ckpt.session.algo() != header.algo {
            return Err(Error::CheckpointAlgo {
                found: ckpt.session.algo().to_string(),
                expected: header.algo.to_string(),
            });
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads and additionally requires a specific algorithm.
    pub fn load_expecting(path: &Path, algo: Algo) -> Result<Self> {
        let c = Self::load(path)?;
        if c.algo != algo {
            return Err(Error::CheckpointAlgo {
                found: c.algo.to_string(),
                expected: algo.to_string(),
            });
        }
        Ok(c)
    }
}
