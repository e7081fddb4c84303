//! Checkpoint file: `ZLC1`, a little-endian `u64` header length, a JSON header,
//! then every tensor as little-endian `f32` in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainSpec};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::tokenizer::BinStrategy;

pub const MAGIC: &[u8; 4] = b"ZLC1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the tensor data.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerDefaults {
    #[serde(rename = "N")]
    pub n_bins: usize,
    pub strategy: BinStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub train: TrainSpec,
    pub tokenizer: TokenizerDefaults,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub train: TrainSpec,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn header(&self) -> CheckpointHeader {
        let mut offset = 0;
        let tensors = self
            .params
            .tensors()
            .into_iter()
            .map(|(name, t)| {
                let entry = TensorEntry {
                    name,
                    shape: t.shape().to_vec(),
                    offset,
                };
                offset += t.len() * 4;
                entry
            })
            .collect();
        CheckpointHeader {
            config: self.config.clone(),
            train: self.train.clone(),
            tokenizer: TokenizerDefaults {
                n_bins: self.config.n_bins,
                strategy: self.config.strategy,
            },
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::with_capacity(12 + header.len() + self.params.num_params() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in self.params.tensors() {
            for &v in t.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidCheckpoint(m.to_string());
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing ZLC1 magic"));
        }
        let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(12..).ok_or_else(|| bad("truncated"))?;
        if len > body.len() {
            return Err(bad("header length exceeds file size"));
        }
        let header: CheckpointHeader = serde_json::from_slice(&body[..len])?;
        header.config.validate()?;
        let data = &body[len..];
        let mut params = ModelParams::zeros(&header.config);
        let expected: usize = params.num_params() * 4;
        if data.len() != expected {
            return Err(bad(&format!("expected {expected} bytes of tensor data, found {}", data.len())));
        }
        let names = params.tensors().len();
        if header.tensors.len() != names {
            return Err(bad("tensor manifest does not match the configuration"));
        }
        for ((name, mut t), entry) in params.tensors_mut().into_iter().zip(&header.tensors) {
            if entry.name != name || entry.shape != t.shape() {
                return Err(bad(&format!("manifest entry `{}` does not match `{name}`", entry.name)));
            }
            let raw = data
                .get(entry.offset..entry.offset + t.len() * 4)
                .ok_or_else(|| bad("tensor offset out of range"))?;
            for (v, chunk) in t.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
            }
        }
        if !params.is_finite() {
            return Err(bad("non-finite weights"));
        }
        Ok(Self {
            config: header.config,
            train: header.train,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_bytes(&fs::read(path)?)
    }
}
