use rand::seq::SliceRandom;

use super::objective::{batch_objective, BatchNoise, ExampleInput};
use super::{DvaeConfig, DvaeError, DvaeModel, PhaseLabel};
use crate::data::{accuracy, AlloyRecord, DataSplits};
use crate::elements::ElementTable;
use crate::featurize::{FeatureScaler, FeatureVector8};
use crate::nncore::{seeded_rng, AdamState, PlateauSchedule, SeededRng};
use crate::par;

/// One row per epoch. Losses are per-example means.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub supervised_loss: f64,
    pub unsupervised_loss: f64,
    pub val_accuracy: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "epoch,train_loss,supervised_loss,unsupervised_loss,val_accuracy,val_loss,lr\n",
        );
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch,
                e.train_loss,
                e.supervised_loss,
                e.unsupervised_loss,
                e.val_accuracy,
                e.val_loss,
                e.lr
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub model: DvaeModel,
    pub log: TrainingLog,
    /// 0 means the untrained initialization was never beaten.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub epochs_run: usize,
}

pub(super) fn features_of(
    elements: &ElementTable,
    records: &[AlloyRecord],
    idx: &[usize],
) -> Result<Vec<FeatureVector8>, DvaeError> {
    par::try_map(idx, |&i| {
        crate::featurize::engineered_features(elements, &records[i].composition)
            .map_err(DvaeError::from)
    })
}

/// Best-so-far selection: higher validation accuracy wins, ties go to the
/// lower validation loss.
#[derive(Debug, Clone, Copy)]
pub(super) struct BestTracker {
    pub epoch: usize,
    pub accuracy: f64,
    pub loss: f64,
}

impl BestTracker {
    pub fn new() -> Self {
        Self {
            epoch: 0,
            accuracy: f64::NEG_INFINITY,
            loss: f64::INFINITY,
        }
    }

    pub fn offer(&mut self, epoch: usize, accuracy: f64, loss: f64) -> bool {
        let better = accuracy > self.accuracy || (accuracy == self.accuracy && loss < self.loss);
        if better {
            *self = Self {
                epoch,
                accuracy,
                loss,
            };
        }
        better
    }
}

pub(super) fn schedule(config: &DvaeConfig) -> PlateauSchedule {
    let mut s = PlateauSchedule::new(config.lr0);
    s.patience = config.patience;
    s
}

/// Labelled examples for validation; falls back to the labelled split when
/// no validation split exists.
pub(super) fn validation_indices(splits: &DataSplits) -> &[usize] {
    if splits.validation.is_empty() {
        log::warn!("empty validation split; selecting on the labelled split");
        &splits.labelled
    } else {
        &splits.validation
    }
}

struct Prepared {
    labelled: Vec<(ExampleInput, PhaseLabel)>,
    unlabelled: Vec<ExampleInput>,
    validation: Vec<(ExampleInput, PhaseLabel)>,
}

fn prepare(
    records: &[AlloyRecord],
    splits: &DataSplits,
    elements: &ElementTable,
) -> Result<(FeatureScaler, Prepared), DvaeError> {
    let lab_f = features_of(elements, records, &splits.labelled)?;
    let unl_f = features_of(elements, records, &splits.unlabelled)?;
    let val_idx = validation_indices(splits);
    let val_f = features_of(elements, records, val_idx)?;
    let pool: Vec<FeatureVector8> = lab_f.iter().chain(&unl_f).copied().collect();
    let scaler = FeatureScaler::fit(&pool)?;
    let input = |i: usize, f: &FeatureVector8| ExampleInput {
        x: records[i].composition.to_vector(),
        features: scaler.apply(f),
    };
    let labelled = splits
        .labelled
        .iter()
        .zip(&lab_f)
        .map(|(&i, f)| (input(i, f), records[i].label))
        .collect();
    let unlabelled = splits
        .unlabelled
        .iter()
        .zip(&unl_f)
        .map(|(&i, f)| input(i, f))
        .collect();
    let validation = val_idx
        .iter()
        .zip(&val_f)
        .map(|(&i, f)| (input(i, f), records[i].label))
        .collect();
    Ok((
        scaler,
        Prepared {
            labelled,
            unlabelled,
            validation,
        },
    ))
}

/// Validation accuracy and deterministic (`z = μ`) mean labelled loss.
fn evaluate(
    model: &DvaeModel,
    validation: &[(ExampleInput, PhaseLabel)],
) -> Result<(f64, f64), DvaeError> {
    let probs = par::try_map(validation, |(e, _)| {
        model.classify_standardized(&e.features)
    })?;
    let labels: Vec<PhaseLabel> = validation.iter().map(|(_, y)| *y).collect();
    let acc = accuracy(&probs, &labels)?;
    let pairs: Vec<_> = validation.iter().map(|(e, y)| (e, *y)).collect();
    let noise = BatchNoise::zeros(pairs.len(), model.latent_dim());
    let (terms, _) = batch_objective(model, &pairs, &[], 1.0, &noise)?;
    Ok((acc, terms.supervised / validation.len().max(1) as f64))
}

enum Item {
    Labelled(usize),
    Unlabelled(usize),
}

/// Trains the full model on the labelled and unlabelled splits, selecting
/// parameters on the validation split.
pub fn train(
    config: &DvaeConfig,
    elements: &ElementTable,
    records: &[AlloyRecord],
    splits: &DataSplits,
) -> Result<TrainOutcome, DvaeError> {
    config.validate()?;
    if splits.labelled.is_empty() {
        return Err(DvaeError::EmptyLabelledSet);
    }
    let (scaler, data) = prepare(records, splits, elements)?;
    let r = config.phase_prior_r.unwrap_or_else(|| {
        let sp = data
            .labelled
            .iter()
            .filter(|(_, y)| y.is_single_phase())
            .count();
        (sp as f64 / data.labelled.len() as f64).clamp(0.01, 0.99)
    });
    let mut rng: SeededRng = seeded_rng(config.seed);
    let mut model = DvaeModel::init(config.clone(), scaler, r, elements.clone(), &mut rng)?;
    let mut adam_dec = AdamState::new(model.decoder.params().len(), config.lr0);
    let mut adam_cls = AdamState::new(model.classifier.params().len(), config.lr0);
    let mut adam_enc = AdamState::new(model.encoder.params().len(), config.lr0);
    let mut sched = schedule(config);

    let (acc0, loss0) = evaluate(&model, &data.validation)?;
    let mut best = BestTracker::new();
    best.offer(0, acc0, loss0);
    let mut best_model = model.clone();
    let mut log = TrainingLog::default();

    let mut items: Vec<Item> = (0..data.labelled.len())
        .map(Item::Labelled)
        .chain((0..data.unlabelled.len()).map(Item::Unlabelled))
        .collect();
    let n_lab = data.labelled.len() as f64;
    let n_unl = data.unlabelled.len().max(1) as f64;
    let mut epochs_run = 0;
    for epoch in 1..=config.max_epochs {
        items.shuffle(&mut rng);
        let (mut total, mut sup, mut unsup) = (0.0, 0.0, 0.0);
        for (b, chunk) in items.chunks(config.batch_size).enumerate() {
            let mut lab = Vec::new();
            let mut unl = Vec::new();
            for it in chunk {
                match it {
                    Item::Labelled(k) => lab.push((&data.labelled[*k].0, data.labelled[*k].1)),
                    Item::Unlabelled(u) => unl.push(&data.unlabelled[*u]),
                }
            }
            let noise = BatchNoise::sample(
                &mut rng,
                BatchNoise::rows_for(lab.len(), unl.len()),
                config.latent_dim,
            );
            let (terms, grads) = batch_objective(&model, &lab, &unl, config.gamma, &noise)
                .map_err(|e| match e {
                    DvaeError::NonFiniteLoss(_) => {
                        DvaeError::NonFiniteLoss(format!("epoch {epoch}, batch {b}"))
                    }
                    other => other,
                })?;
            total += terms.total;
            sup += terms.supervised;
            unsup += terms.unsupervised;
            adam_dec.step(model.decoder.params_mut(), &grads.decoder)?;
            adam_cls.step(model.classifier.params_mut(), &grads.classifier)?;
            adam_enc.step(model.encoder.params_mut(), &grads.encoder)?;
        }
        epochs_run = epoch;
        let (val_acc, val_loss) = evaluate(&model, &data.validation)?;
        if best.offer(epoch, val_acc, val_loss) {
            best_model = model.clone();
        }
        let lr = sched.update(val_acc);
        adam_dec.lr = lr;
        adam_cls.lr = lr;
        adam_enc.lr = lr;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: total / (n_lab + n_unl),
            supervised_loss: sup / n_lab,
            unsupervised_loss: unsup / n_unl,
            val_accuracy: val_acc,
            val_loss,
            lr,
        });
        if epoch % 100 == 0 {
            log::info!(
                "epoch {epoch}: loss {:.4} val_acc {val_acc:.4} lr {lr:.2e}",
                total / (n_lab + n_unl)
            );
        }
        if lr < config.min_lr {
            log::info!(
                "learning rate {lr:.2e} below {:.0e}; stopping at epoch {epoch}",
                config.min_lr
            );
            break;
        }
    }

    best_model.metadata.seed = Some(config.seed);
    best_model.metadata.best_epoch = Some(best.epoch);
    best_model.metadata.epochs_run = Some(epochs_run);
    best_model.metadata.split_sizes = Some(splits.sizes());
    best_model
        .metadata
        .metrics
        .insert("val_accuracy".into(), best.accuracy);
    Ok(TrainOutcome {
        model: best_model,
        log,
        best_epoch: best.epoch,
        best_val_accuracy: best.accuracy,
        epochs_run,
    })
}
