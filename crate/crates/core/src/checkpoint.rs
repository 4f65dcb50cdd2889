//! Single-file checkpoints: magic, format version, a JSON manifest, then
//! every tensor as little-endian f64 in manifest order.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Model;
use crate::knowledge::KnowledgeStore;
use crate::nn::Params;
use crate::tokenizer::Vocabulary;
use crate::trainer::TrainConfig;

const MAGIC: &[u8; 8] = b"IOIRTCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
    pub store: KnowledgeStore,
    pub vocab: Vocabulary,
    pub epoch: usize,
    pub validation_loss: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: TrainConfig,
    epoch: usize,
    validation_loss: f64,
    vocab: Vec<String>,
    students: Vec<String>,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, model: &Model, store: &KnowledgeStore, vocab: &Vocabulary, epoch: usize, validation_loss: f64) -> Checkpoint {
        Checkpoint {
            config: config.clone(),
            model: model.clone(),
            store: store.clone(),
            vocab: vocab.clone(),
            epoch,
            validation_loss,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let model_t = self.model.tensors();
        let store_t = self.store.tensors();
        let all = || model_t.iter().chain(store_t.iter());
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            epoch: self.epoch,
            validation_loss: self.validation_loss,
            vocab: self.vocab.tokens().to_vec(),
            students: self.store.students().to_vec(),
            tensors: all()
                .map(|t| TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let n: usize = all().map(|t| t.data.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in all() {
            for x in t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..20 + len).ok_or_else(|| bad("truncated manifest"))?;
        let m: Manifest = serde_json::from_slice(body)?;
        let vocab = Vocabulary::from_tokens(m.vocab)?;
        let mut model = Model::new(m.config.generator, m.config.knowledge, 0)?;
        let kc = m.config.knowledge;
        let store = KnowledgeStore::from_parts(kc, m.students.clone(), Array2::zeros((m.students.len(), kc.n_params())))?;
        let mut store = store;
        {
            let expected: Vec<(String, Vec<usize>)> = model
                .tensors()
                .iter()
                .chain(store.tensors().iter())
                .map(|t| (t.name.clone(), t.shape.clone()))
                .collect();
            let found: Vec<(String, Vec<usize>)> = m.tensors.iter().map(|t| (t.name.clone(), t.shape.clone())).collect();
            if expected != found {
                return Err(bad("tensor layout does not match the configuration"));
            }
        }
        let mut data = &bytes[20 + len..];
        for t in model.tensors_mut().into_iter().chain(store.tensors_mut()) {
            let need = 8 * t.len();
            if data.len() < need {
                return Err(bad("truncated tensor data"));
            }
            for (x, chunk) in t.iter_mut().zip(data[..need].chunks_exact(8)) {
                *x = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            data = &data[need..];
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Checkpoint {
            config: m.config,
            model,
            store,
            vocab,
            epoch: m.epoch,
            validation_loss: m.validation_loss,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
