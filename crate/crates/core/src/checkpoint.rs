//! Binary checkpoints: one JSON header line, then little-endian `f32`
//! payloads (entity rows, then relation parameters).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::HardRelations;
use crate::dataset::TripleStore;
use crate::error::{Error, Result};
use crate::model::{EntityTable, Model};
use crate::param::{Mode, RelationParams};
use crate::real::Real;

pub const FORMAT: &str = "dihedral-kge-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub k: u16,
    pub dim: usize,
    pub num_entities: usize,
    pub num_relations: usize,
    pub mode: Mode,
    pub entity_dict_sha256: String,
    pub relation_dict_sha256: String,
    pub relation_names: Vec<String>,
    pub entity_values: usize,
    pub relation_values: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub entities: Vec<f32>,
    pub relations: Vec<f32>,
}

impl Checkpoint {
    pub fn from_model<T: Real>(model: &Model<T>, store: &TripleStore) -> Result<Self> {
        if model.num_entities() != store.num_entities() || model.num_relations() != store.num_relations() {
            return Err(Error::DictionaryMismatch(format!(
                "model has {} entities / {} relations, dataset has {} / {}",
                model.num_entities(),
                model.num_relations(),
                store.num_entities(),
                store.num_relations()
            )));
        }
        let entities: Vec<f32> = model.entities.as_slice().iter().map(|v| v.as_f64() as f32).collect();
        let relations: Vec<f32> = model.relations.values().iter().map(|v| v.as_f64() as f32).collect();
        Ok(Self {
            header: CheckpointHeader {
                format: FORMAT.to_owned(),
                version: VERSION,
                k: model.relations.order(),
                dim: model.dim(),
                num_entities: model.num_entities(),
                num_relations: model.num_relations(),
                mode: model.relations.mode(),
                entity_dict_sha256: store.entities().fingerprint(),
                relation_dict_sha256: store.relations().fingerprint(),
                relation_names: store.relations().names().to_vec(),
                entity_values: entities.len(),
                relation_values: relations.len(),
            },
            entities,
            relations,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec(&self.header)?;
        out.push(b'\n');
        out.reserve(4 * (self.entities.len() + self.relations.len()));
        for v in self.entities.iter().chain(&self.relations) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let payload = &bytes[newline + 1..];
        let expected = 4 * (header.entity_values + header.relation_values);
        if payload.len() != expected {
            return Err(Error::Checkpoint(format!(
                "payload has {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        let mut values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let entities: Vec<f32> = values.by_ref().take(header.entity_values).collect();
        let relations: Vec<f32> = values.collect();
        Ok(Self {
            header,
            entities,
            relations,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }

    /// Fails unless `store` has the dictionaries this checkpoint was trained on.
    pub fn check_dictionaries(&self, store: &TripleStore) -> Result<()> {
        let h = &self.header;
        if h.entity_dict_sha256 != store.entities().fingerprint() {
            return Err(Error::DictionaryMismatch("entity dictionary differs from checkpoint".into()));
        }
        if h.relation_dict_sha256 != store.relations().fingerprint() {
            return Err(Error::DictionaryMismatch("relation dictionary differs from checkpoint".into()));
        }
        Ok(())
    }

    pub fn to_model<T: Real>(&self) -> Result<Model<T>> {
        let h = &self.header;
        if h.dim == 0 || h.dim % 2 != 0 || self.entities.len() != h.num_entities * h.dim {
            return Err(Error::Checkpoint("entity payload does not match header shape".into()));
        }
        let cast = |v: &[f32]| v.iter().map(|&x| T::lit(x as f64)).collect::<Vec<T>>();
        let entities = EntityTable::from_rows(h.dim, cast(&self.entities))?;
        let relations = RelationParams::from_values(h.mode, h.k, h.dim / 2, h.num_relations, cast(&self.relations))
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Model::new(entities, relations)
    }

    pub fn hard_relations(&self) -> Result<HardRelations> {
        HardRelations::from_model(&self.to_model::<f64>()?, &self.header.relation_names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NamedTriple;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store() -> TripleStore {
        let t = |h: &str, r: &str, t: &str| -> NamedTriple { (h.into(), r.into(), t.into()) };
        TripleStore::from_named(&[t("a", "r", "b"), t("b", "s", "c")], &[], &[])
    }

    #[test]
    fn round_trip_preserves_values() {
        let store = store();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [Mode::Gumbel, Mode::Ste] {
            let model = Model::<f32>::random(mode, 4, 6, 3, 2, &mut rng).unwrap();
            let ckpt = Checkpoint::from_model(&model, &store).unwrap();
            let back = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();
            assert_eq!(back, ckpt);
            assert_eq!(back.to_model::<f32>().unwrap(), model);
            back.check_dictionaries(&store).unwrap();
        }
    }

    #[test]
    fn dictionary_mismatch_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = Model::<f32>::random(Mode::Ste, 4, 4, 3, 2, &mut rng).unwrap();
        let ckpt = Checkpoint::from_model(&model, &store()).unwrap();
        let t = |h: &str, r: &str, t: &str| -> NamedTriple { (h.into(), r.into(), t.into()) };
        let other = TripleStore::from_named(&[t("b", "r", "a"), t("b", "s", "c")], &[], &[]);
        assert!(matches!(ckpt.check_dictionaries(&other), Err(Error::DictionaryMismatch(_))));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = Model::<f32>::random(Mode::Gumbel, 6, 4, 3, 2, &mut rng).unwrap();
        let mut bytes = Checkpoint::from_model(&model, &store()).unwrap().to_bytes().unwrap();
        bytes.pop();
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::from_bytes(b"not json\n").is_err());
    }
}
