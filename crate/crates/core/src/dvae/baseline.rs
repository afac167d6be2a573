use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::train::{features_of, schedule, validation_indices, BestTracker, EpochLog, TrainingLog};
use super::{DvaeConfig, DvaeError, PhaseLabel};
use crate::data::{accuracy, AlloyRecord, DataSplits};
use crate::elements::{Composition, ElementTable};
use crate::featurize::{engineered_features, FeatureScaler, N_FEATURES};
use crate::nncore::{seeded_rng, sigmoid, softplus, Activation, AdamState, DenseNet, Tensor};
use crate::par;

/// A classifier-only network with the same architecture as the model's
/// classifier head, trained on labelled data alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub network: DenseNet,
    pub scaler: FeatureScaler,
    pub elements: ElementTable,
}

impl ClassifierModel {
    pub fn classify_standardized(&self, features: &[f64]) -> Result<f64, DvaeError> {
        let x = Tensor::from_vec(1, features.len(), features.to_vec())?;
        Ok(sigmoid(self.network.forward(&x)?.values()[0]))
    }

    pub fn classify(&self, c: &Composition) -> Result<f64, DvaeError> {
        let f = engineered_features(&self.elements, c)?;
        self.classify_standardized(&self.scaler.apply(&f))
    }

    pub fn classify_batch(&self, comps: &[Composition]) -> Result<Vec<f64>, DvaeError> {
        par::try_map(comps, |c| self.classify(c))
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub model: ClassifierModel,
    pub log: TrainingLog,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

fn bce_and_grad(net: &DenseNet, x: &Tensor, y: &[f64]) -> Result<(f64, Vec<f64>), DvaeError> {
    let trace = net.forward_trace(x)?;
    let logits = trace.output().values();
    let mut d = Tensor::zeros(y.len(), 1);
    let mut loss = 0.0;
    for (k, (&s, &t)) in logits.iter().zip(y).enumerate() {
        loss += softplus(s) - t * s;
        d.values_mut()[k] = sigmoid(s) - t;
    }
    Ok((loss, net.backward(&trace, &d)?.params))
}

/// Trains only the classifier on the labelled split with binary
/// cross-entropy. Unlabelled data is ignored entirely, including for the
/// feature scaler.
pub fn supervised_baseline_train(
    config: &DvaeConfig,
    elements: &ElementTable,
    records: &[AlloyRecord],
    splits: &DataSplits,
) -> Result<BaselineOutcome, DvaeError> {
    config.validate()?;
    if splits.labelled.is_empty() {
        return Err(DvaeError::EmptyLabelledSet);
    }
    let lab_f = features_of(elements, records, &splits.labelled)?;
    let scaler = FeatureScaler::fit(&lab_f)?;
    let lab_x: Vec<[f64; N_FEATURES]> = lab_f.iter().map(|f| scaler.apply(f)).collect();
    let lab_y: Vec<f64> = splits
        .labelled
        .iter()
        .map(|&i| records[i].label.as_f64())
        .collect();
    let val_idx = validation_indices(splits);
    let val_x: Vec<[f64; N_FEATURES]> = features_of(elements, records, val_idx)?
        .iter()
        .map(|f| scaler.apply(f))
        .collect();
    let val_labels: Vec<PhaseLabel> = val_idx.iter().map(|&i| records[i].label).collect();
    let val_y: Vec<f64> = val_labels.iter().map(|l| l.as_f64()).collect();
    let val_t = Tensor::from_rows(&val_x)?;

    let mut rng = seeded_rng(config.seed);
    let mut acts = vec![Activation::Softplus; config.hidden.len()];
    acts.push(Activation::Identity);
    let mut net = DenseNet::new(&config.classifier_dims(), &acts, &mut rng);
    let mut adam = AdamState::new(net.params().len(), config.lr0);
    let mut sched = schedule(config);

    let evaluate = |net: &DenseNet| -> Result<(f64, f64), DvaeError> {
        let logits = net.forward(&val_t)?;
        let probs: Vec<f64> = logits.values().iter().map(|s| sigmoid(*s)).collect();
        let loss: f64 = logits
            .values()
            .iter()
            .zip(&val_y)
            .map(|(s, t)| softplus(*s) - t * s)
            .sum();
        Ok((
            accuracy(&probs, &val_labels)?,
            loss / val_y.len().max(1) as f64,
        ))
    };

    let mut best = BestTracker::new();
    let (a0, l0) = evaluate(&net)?;
    best.offer(0, a0, l0);
    let mut best_net = net.clone();
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..lab_x.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&k| &lab_x[k][..]).collect();
            let y: Vec<f64> = chunk.iter().map(|&k| lab_y[k]).collect();
            let (loss, grads) = bce_and_grad(&net, &Tensor::from_rows(&rows)?, &y)?;
            if !loss.is_finite() {
                return Err(DvaeError::NonFiniteLoss(format!("baseline epoch {epoch}")));
            }
            total += loss;
            adam.step(net.params_mut(), &grads)?;
        }
        let (val_acc, val_loss) = evaluate(&net)?;
        if best.offer(epoch, val_acc, val_loss) {
            best_net = net.clone();
        }
        let lr = sched.update(val_acc);
        adam.lr = lr;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: total / lab_x.len() as f64,
            supervised_loss: total / lab_x.len() as f64,
            unsupervised_loss: 0.0,
            val_accuracy: val_acc,
            val_loss,
            lr,
        });
        if lr < config.min_lr {
            break;
        }
    }
    Ok(BaselineOutcome {
        model: ClassifierModel {
            network: best_net,
            scaler,
            elements: elements.clone(),
        },
        log,
        best_epoch: best.epoch,
        best_val_accuracy: best.accuracy,
    })
}
