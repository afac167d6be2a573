//! JSON checkpoints. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DvaeConfig, DvaeError, DvaeModel};
use crate::data::{split, DataSplits, SplitSizes};
use crate::elements::{hex, ElementTable, Vocabulary};
use crate::featurize::FeatureScaler;
use crate::fsio::write_atomic;
use crate::nncore::DenseNet;

pub const CHECKPOINT_FORMAT: &str = "hea-dvae-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Provenance carried alongside the parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelMetadata {
    pub seed: Option<u64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
    pub split_sizes: Option<SplitSizes>,
    /// Named evaluation results, e.g. `test_accuracy`.
    pub metrics: BTreeMap<String, f64>,
}

impl ModelMetadata {
    /// Recomputes the training split over a dataset of `n_records`, assuming
    /// the split seed equals the training seed.
    pub fn splits(&self, n_records: usize) -> Option<DataSplits> {
        split(n_records, self.split_sizes?, self.seed?).ok()
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    vocabulary: Vec<String>,
    vocabulary_hash: String,
    config: DvaeConfig,
    phase_prior_r: f64,
    scaler: FeatureScaler,
    decoder: DenseNet,
    classifier: DenseNet,
    encoder: DenseNet,
    elements: ElementTable,
    #[serde(default)]
    metadata: ModelMetadata,
}

impl DvaeModel {
    pub fn to_json(&self) -> String {
        let vocab = Vocabulary::global();
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            vocabulary: vocab.symbols().to_vec(),
            vocabulary_hash: vocab.hash(),
            config: self.config.clone(),
            phase_prior_r: self.phase_prior_r,
            scaler: self.scaler.clone(),
            decoder: self.decoder.clone(),
            classifier: self.classifier.clone(),
            encoder: self.encoder.clone(),
            elements: self.elements.clone(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DvaeError> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| DvaeError::Checkpoint(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(DvaeError::Checkpoint(format!(
                "unexpected format `{}`",
                file.format
            )));
        }
        if file.version > CHECKPOINT_VERSION {
            return Err(DvaeError::Checkpoint(format!(
                "version {} is newer than supported {CHECKPOINT_VERSION}",
                file.version
            )));
        }
        let expected = Vocabulary::global().hash();
        if file.vocabulary_hash != expected {
            return Err(DvaeError::VocabularyMismatch {
                expected,
                found: file.vocabulary_hash,
            });
        }
        file.config.validate()?;
        for (name, net, dims) in [
            ("decoder", &file.decoder, file.config.decoder_dims()),
            (
                "classifier",
                &file.classifier,
                file.config.classifier_dims(),
            ),
            ("encoder", &file.encoder, file.config.encoder_dims()),
        ] {
            if net.dims() != dims.as_slice() {
                return Err(DvaeError::Checkpoint(format!(
                    "{name} dims {:?} disagree with config {dims:?}",
                    net.dims()
                )));
            }
        }
        if !(file.phase_prior_r > 0.0 && file.phase_prior_r < 1.0) {
            return Err(DvaeError::Checkpoint("phase_prior_r outside (0, 1)".into()));
        }
        Ok(Self {
            decoder: file.decoder,
            classifier: file.classifier,
            encoder: file.encoder,
            scaler: file.scaler,
            phase_prior_r: file.phase_prior_r,
            config: file.config,
            elements: file.elements,
            metadata: file.metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DvaeError> {
        Ok(write_atomic(path, self.to_json().as_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, DvaeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DvaeError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn checkpoint_hash(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::DvaeConfig;
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = random_model(DvaeConfig::default(), 9);
        m.metadata.metrics.insert("test_accuracy".into(), 0.1 + 0.2);
        m.scaler.mean[3] = std::f64::consts::PI / 7.0;
        let back = DvaeModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.encoder.params().iter().zip(m.encoder.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.checkpoint_hash(), m.checkpoint_hash());
    }

    #[test]
    fn save_and_load_file() {
        let m = random_model(small_config(), 2);
        let dir = std::env::temp_dir().join(format!("hea-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("model.json");
        m.save(&p).unwrap();
        assert_eq!(DvaeModel::load(&p).unwrap(), m);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn vocabulary_hash_is_checked() {
        let m = random_model(small_config(), 2);
        let text = m
            .to_json()
            .replace(&Vocabulary::global().hash(), "deadbeef");
        assert!(matches!(
            DvaeModel::from_json(&text),
            Err(DvaeError::VocabularyMismatch { .. })
        ));
    }

    #[test]
    fn malformed_checkpoints_are_rejected() {
        assert!(DvaeModel::from_json("{").is_err());
        let m = random_model(small_config(), 2);
        let text = m.to_json().replace(CHECKPOINT_FORMAT, "other");
        assert!(DvaeModel::from_json(&text).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        v["config"]["latent_dim"] = 3.into();
        assert!(DvaeModel::from_json(&v.to_string()).is_err());
    }
}
