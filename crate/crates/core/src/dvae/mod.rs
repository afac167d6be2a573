//! The disentangled semi-supervised VAE.
//!
//! Generative side: `p(x, φ, z) = p(x | φ, z) p(φ) p(z)` with a softmax
//! (multinomial) decoder over the 30-element composition, a Bernoulli phase
//! prior and a standard-normal latent prior. Recognition side:
//! `q(φ, z | x) = q(φ | f(x)) q(z | x, φ)`, where the classifier head only
//! sees the eight engineered descriptors and the encoder sees the raw
//! composition plus the phase.

mod baseline;
mod checkpoint;
mod objective;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::elements::{Composition, ElementError, ElementTable, VOCAB_SIZE};
use crate::featurize::{
    engineered_features, FeatureError, FeatureScaler, FeatureVector8, N_FEATURES,
};
use crate::nncore::{sigmoid, softmax, Activation, DenseNet, NnError, SeededRng, Tensor};
use crate::par;

pub use baseline::{supervised_baseline_train, BaselineOutcome, ClassifierModel};
pub use checkpoint::{ModelMetadata, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use objective::{
    batch_objective, elbo_labelled, elbo_unlabelled, gaussian_kl, BatchNoise, ExampleInput,
    ModelGrads, ObjectiveTerms,
};
pub use train::{train, EpochLog, TrainOutcome, TrainingLog};

#[derive(Debug, Error)]
pub enum DvaeError {
    #[error(transparent)]
    Featurization(#[from] FeatureError),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error("non-finite loss ({0})")]
    NonFiniteLoss(String),
    #[error("no labelled training examples")]
    EmptyLabelledSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("latent point has {got} coordinates, model expects {expected}")]
    LatentDimension { expected: usize, got: usize },
    #[error("phase probability {0} outside [0, 1]")]
    PhaseOutOfRange(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint vocabulary hash {found} does not match {expected}")]
    VocabularyMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Experimental phase: 1 = single phase, 0 = multiple phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum PhaseLabel {
    MultiPhase,
    SinglePhase,
}

impl PhaseLabel {
    pub fn from_bool(single_phase: bool) -> Self {
        if single_phase {
            Self::SinglePhase
        } else {
            Self::MultiPhase
        }
    }

    /// Threshold 0.5, ties count as single phase.
    pub fn from_probability(p: f64) -> Self {
        Self::from_bool(p >= 0.5)
    }

    pub fn is_single_phase(self) -> bool {
        self == Self::SinglePhase
    }

    pub fn as_f64(self) -> f64 {
        if self.is_single_phase() {
            1.0
        } else {
            0.0
        }
    }
}

impl From<PhaseLabel> for u8 {
    fn from(l: PhaseLabel) -> u8 {
        l.is_single_phase() as u8
    }
}

impl TryFrom<u8> for PhaseLabel {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Self::MultiPhase),
            1 => Ok(Self::SinglePhase),
            other => Err(format!("phase label must be 0 or 1, got {other}")),
        }
    }
}

/// A point in the latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentPoint(pub Vec<f64>);

impl LatentPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for LatentPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DvaeConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    /// Weight of the supervised terms in the objective.
    pub gamma: f64,
    /// Bernoulli prior on single phase; `None` uses the labelled SP rate.
    pub phase_prior_r: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr0: f64,
    /// Epochs without validation-accuracy improvement before halving the rate.
    pub patience: u32,
    /// Training stops once the learning rate falls below this.
    pub min_lr: f64,
    pub seed: u64,
    pub sp_cutoff: f64,
    /// Multinomial total count the fractional composition is scaled to in
    /// the reconstruction term.
    pub composition_count: f64,
}

impl Default for DvaeConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden: vec![100, 100],
            gamma: 10.0,
            phase_prior_r: None,
            batch_size: 32,
            max_epochs: 20_000,
            lr0: 1e-4,
            patience: 200,
            min_lr: 1e-7,
            seed: 0,
            sp_cutoff: 0.6,
            composition_count: 40.0,
        }
    }
}

impl DvaeConfig {
    pub fn validate(&self) -> Result<(), DvaeError> {
        let bad = |m: &str| Err(DvaeError::InvalidConfig(m.to_string()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if let Some(r) = self.phase_prior_r {
            if !(r > 0.0 && r < 1.0) {
                return bad("phase_prior_r must lie in (0, 1)");
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr0 > 0.0) {
            return bad("lr0 must be positive");
        }
        if !(self.composition_count > 0.0 && self.composition_count.is_finite()) {
            return bad("composition_count must be positive");
        }
        if self.hidden.iter().any(|h| *h == 0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    fn dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend(&self.hidden);
        d.push(output);
        d
    }

    fn activations(&self) -> Vec<Activation> {
        let mut a = vec![Activation::Softplus; self.hidden.len()];
        a.push(Activation::Identity);
        a
    }

    pub fn encoder_dims(&self) -> Vec<usize> {
        self.dims(VOCAB_SIZE + 1, 2 * self.latent_dim)
    }

    pub fn decoder_dims(&self) -> Vec<usize> {
        self.dims(1 + self.latent_dim, VOCAB_SIZE)
    }

    pub fn classifier_dims(&self) -> Vec<usize> {
        self.dims(N_FEATURES, 1)
    }
}

/// Trained (or freshly initialized) model. Immutable once built; safe to
/// share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DvaeModel {
    /// `(φ, z)` → 30 composition logits.
    pub decoder: DenseNet,
    /// Standardized `f(x)` → single-phase logit.
    pub classifier: DenseNet,
    /// `(x, φ)` → `(μ, log σ²)`.
    pub encoder: DenseNet,
    pub scaler: FeatureScaler,
    pub phase_prior_r: f64,
    pub config: DvaeConfig,
    pub elements: ElementTable,
    pub metadata: ModelMetadata,
}

/// Output of [`DvaeModel::reconstruct`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub composition: Composition,
    pub probability: f64,
    pub latent: LatentPoint,
}

impl DvaeModel {
    /// Randomly initialized networks (seeded).
    pub fn init(
        config: DvaeConfig,
        scaler: FeatureScaler,
        phase_prior_r: f64,
        elements: ElementTable,
        rng: &mut SeededRng,
    ) -> Result<Self, DvaeError> {
        config.validate()?;
        let acts = config.activations();
        let encoder = DenseNet::new(&config.encoder_dims(), &acts, rng);
        let decoder = DenseNet::new(&config.decoder_dims(), &acts, rng);
        let classifier = DenseNet::new(&config.classifier_dims(), &acts, rng);
        Ok(Self {
            decoder,
            classifier,
            encoder,
            scaler,
            phase_prior_r,
            config,
            elements,
            metadata: ModelMetadata::default(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn features(&self, c: &Composition) -> Result<FeatureVector8, DvaeError> {
        Ok(engineered_features(&self.elements, c)?)
    }

    pub fn standardized_features(&self, c: &Composition) -> Result<[f64; N_FEATURES], DvaeError> {
        Ok(self.scaler.apply(&self.features(c)?))
    }

    /// Single-phase probability from already standardized descriptors.
    pub fn classify_standardized(&self, features: &[f64]) -> Result<f64, DvaeError> {
        let x = Tensor::from_vec(1, features.len(), features.to_vec())?;
        let logit = self.classifier.forward(&x)?.values()[0];
        Ok(sigmoid(logit))
    }

    /// `q(φ = 1 | f(x))`.
    pub fn classify(&self, c: &Composition) -> Result<f64, DvaeError> {
        self.classify_standardized(&self.standardized_features(c)?)
    }

    pub fn classify_batch(&self, comps: &[Composition]) -> Result<Vec<f64>, DvaeError> {
        par::try_map(comps, |c| self.classify(c))
    }

    /// Posterior mean and standard deviation of `q(z | x, φ)`.
    pub fn encode(&self, c: &Composition, phi: f64) -> Result<(LatentPoint, Vec<f64>), DvaeError> {
        check_phi(phi)?;
        let mut input = c.to_vector().to_vec();
        input.push(phi);
        let out = self
            .encoder
            .forward(&Tensor::from_vec(1, input.len(), input)?)?;
        let l = self.latent_dim();
        let mu = out.values()[..l].to_vec();
        let sigma = out.values()[l..]
            .iter()
            .map(|lv| (0.5 * lv).exp())
            .collect();
        Ok((LatentPoint(mu), sigma))
    }

    /// Composition probability vector of `p(x | φ, z)`.
    pub fn decode(&self, z: &LatentPoint, phi: f64) -> Result<[f64; VOCAB_SIZE], DvaeError> {
        check_phi(phi)?;
        if z.dim() != self.latent_dim() {
            return Err(DvaeError::LatentDimension {
                expected: self.latent_dim(),
                got: z.dim(),
            });
        }
        let mut input = Vec::with_capacity(1 + z.dim());
        input.push(phi);
        input.extend_from_slice(z.coords());
        let logits = self
            .decoder
            .forward(&Tensor::from_vec(1, input.len(), input)?)?;
        let p = softmax(logits.values());
        let mut out = [0.0; VOCAB_SIZE];
        out.copy_from_slice(&p);
        Ok(out)
    }

    pub fn decode_composition(&self, z: &LatentPoint, phi: f64) -> Result<Composition, DvaeError> {
        Ok(Composition::from_vector(&self.decode(z, phi)?)?)
    }

    /// Classify, encode with the predicted probability, decode the
    /// posterior mean.
    pub fn reconstruct(&self, c: &Composition) -> Result<Reconstruction, DvaeError> {
        let probability = self.classify(c)?;
        let (mu, _) = self.encode(c, probability)?;
        let composition = self.decode_composition(&mu, probability)?;
        Ok(Reconstruction {
            composition,
            probability,
            latent: mu,
        })
    }
}

fn check_phi(phi: f64) -> Result<(), DvaeError> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(DvaeError::PhaseOutOfRange(phi))
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn zero_classifier_gives_one_half() {
        let mut m = random_model(DvaeConfig::default(), 1);
        m.classifier.params_mut().fill(0.0);
        for f in ["Fe20Ni20Co20Ti20Cu20", "Al", "NbMoTaW"] {
            let p = m.classify(&Composition::parse(f).unwrap()).unwrap();
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn encode_decode_contracts() {
        let m = random_model(small_config(), 3);
        let c = Composition::parse("Fe14Ni16Cr22Co14Al22Cu8").unwrap();
        let (mu, sigma) = m.encode(&c, 0.3).unwrap();
        assert_eq!(mu.dim(), 2);
        assert_eq!(sigma.len(), 2);
        assert!(sigma.iter().all(|s| *s > 0.0));
        assert_eq!(m.encode(&c, 0.3).unwrap(), (mu.clone(), sigma));
        let p = m.decode(&mu, 0.9).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.decode(&mu, 0.9).unwrap(), p);
        assert!(matches!(
            m.decode(&LatentPoint(vec![0.0; 3]), 0.5),
            Err(DvaeError::LatentDimension {
                expected: 2,
                got: 3
            })
        ));
        assert!(matches!(
            m.encode(&c, 1.5),
            Err(DvaeError::PhaseOutOfRange(_))
        ));
    }

    #[test]
    fn reconstruct_is_a_valid_composition() {
        let m = random_model(small_config(), 5);
        let c = Composition::parse("Al11Ti22V22Nb22Zr22").unwrap();
        let r = m.reconstruct(&c).unwrap();
        let sum: f64 = r.composition.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(r
            .composition
            .as_slice()
            .iter()
            .all(|f| (0.0..=1.0).contains(f)));
        assert!(r.probability > 0.0 && r.probability < 1.0);
        assert_eq!(r.probability, m.classify(&c).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(DvaeConfig::default().validate().is_ok());
        for bad in [
            DvaeConfig {
                latent_dim: 0,
                ..Default::default()
            },
            DvaeConfig {
                gamma: -1.0,
                ..Default::default()
            },
            DvaeConfig {
                phase_prior_r: Some(1.0),
                ..Default::default()
            },
            DvaeConfig {
                batch_size: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(DvaeError::InvalidConfig(_))));
        }
        let c = DvaeConfig::default();
        assert_eq!(c.encoder_dims(), vec![31, 100, 100, 4]);
        assert_eq!(c.decoder_dims(), vec![3, 100, 100, 30]);
        assert_eq!(c.classifier_dims(), vec![8, 100, 100, 1]);
    }

    #[test]
    fn phase_label_serde() {
        assert_eq!(
            serde_json::to_string(&PhaseLabel::SinglePhase).unwrap(),
            "1"
        );
        assert_eq!(
            serde_json::from_str::<PhaseLabel>("0").unwrap(),
            PhaseLabel::MultiPhase
        );
        assert!(serde_json::from_str::<PhaseLabel>("2").is_err());
        assert_eq!(PhaseLabel::from_probability(0.5), PhaseLabel::SinglePhase);
    }
}
