use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChainState, Init};
use crate::error::{Error, Result};
use crate::measures::ModelSpec;
use crate::report::sha256_hex;
use crate::rng::RngPosition;

pub const CHECKPOINT_VERSION: u32 = 1;

/// SHA-256 over the graph listing, base measures, disorder and `λ`.
pub fn spec_digest(spec: &ModelSpec) -> String {
    let canonical = serde_json::json!({
        "graph": spec.graph().to_listing(),
        "rho": spec.rhos(),
        "xi": spec.xi(),
        "lambda": spec.lambda(),
    });
    sha256_hex(canonical.to_string().as_bytes())
}

/// Versioned snapshot of a chain. Restoring it reproduces the continuation
/// of the original chain bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckpoint {
    pub version: u32,
    pub spec_digest: String,
    pub sweeps: u64,
    pub atom_indices: Vec<usize>,
    pub rng: RngPosition,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    payload: serde_json::Value,
    digest: String,
}

impl ChainCheckpoint {
    /// Snapshot `chain`, refactorizing it first so the original and a restored
    /// copy continue from the same numerical state.
    pub fn capture(chain: &mut ChainState) -> Result<Self> {
        chain.refresh()?;
        Ok(ChainCheckpoint {
            version: CHECKPOINT_VERSION,
            spec_digest: spec_digest(chain.spec()),
            sweeps: chain.sweeps(),
            atom_indices: chain.atom_indices().to_vec(),
            rng: RngPosition::capture(chain.master_seed(), chain.rng()),
        })
    }

    pub fn restore(&self, spec: ModelSpec) -> Result<ChainState> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_VERSION,
                found: self.version,
            });
        }
        if spec_digest(&spec) != self.spec_digest {
            return Err(Error::Checkpoint("spec digest differs from the checkpoint".into()));
        }
        let rng = self
            .rng
            .restore()
            .ok_or_else(|| Error::Checkpoint("unreadable stream position".into()))?;
        let mut chain = ChainState::new(
            spec,
            Init::Indices(self.atom_indices.clone()),
            self.rng.master_seed,
            rng,
        )?;
        chain.sweeps = self.sweeps;
        Ok(chain)
    }

    pub fn to_json(&self) -> Result<String> {
        let payload = serde_json::to_value(self)?;
        let digest = sha256_hex(payload.to_string().as_bytes());
        Ok(serde_json::to_string_pretty(&Envelope { payload, digest })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(text)?;
        if sha256_hex(env.payload.to_string().as_bytes()) != env.digest {
            return Err(Error::Checkpoint("digest mismatch; record is corrupted".into()));
        }
        let version = env.payload.get("version").and_then(|v| v.as_u64());
        if version != Some(CHECKPOINT_VERSION as u64) {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_VERSION,
                found: version.unwrap_or(0) as u32,
            });
        }
        Ok(serde_json::from_value(env.payload)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
