//! Negative ELBO terms with hand-derived gradients.
//!
//! All quantities here are losses (to be minimized). Row layout of a batch:
//! labelled examples first, then two rows per unlabelled example, the
//! `φ = 0` branch followed by the `φ = 1` branch. Each row carries a weight
//! (`γ` for labelled rows, `1 - q` / `q` for the unlabelled branches), and
//! the reconstruction + KL gradient of a row is scaled by that weight. The
//! unlabelled weights are treated as constants, so no gradient from the
//! unlabelled term reaches the classifier.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DvaeError, DvaeModel, PhaseLabel};
use crate::elements::VOCAB_SIZE;
use crate::featurize::N_FEATURES;
use crate::nncore::{log_softmax, sigmoid, softplus, NnError, Tensor};

/// One alloy as the model sees it: the raw composition vector and its
/// standardized descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleInput {
    pub x: [f64; VOCAB_SIZE],
    pub features: [f64; N_FEATURES],
}

/// Reparameterization noise, one row of `latent_dim` values per encoder row.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNoise {
    pub latent_dim: usize,
    pub values: Vec<f64>,
}

impl BatchNoise {
    pub fn zeros(rows: usize, latent_dim: usize) -> Self {
        Self {
            latent_dim,
            values: vec![0.0; rows * latent_dim],
        }
    }

    pub fn sample(rng: &mut impl Rng, rows: usize, latent_dim: usize) -> Self {
        let values = (0..rows * latent_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Self { latent_dim, values }
    }

    pub fn rows(&self) -> usize {
        self.values.len().checked_div(self.latent_dim).unwrap_or(0)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.latent_dim..(r + 1) * self.latent_dim]
    }

    /// Noise rows for `n_labelled` labelled and `n_unlabelled` unlabelled examples.
    pub fn rows_for(n_labelled: usize, n_unlabelled: usize) -> usize {
        n_labelled + 2 * n_unlabelled
    }
}

/// Gradients of a loss with respect to each network's flat parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub decoder: Vec<f64>,
    pub classifier: Vec<f64>,
    pub encoder: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(model: &DvaeModel) -> Self {
        Self {
            decoder: vec![0.0; model.decoder.params().len()],
            classifier: vec![0.0; model.classifier.params().len()],
            encoder: vec![0.0; model.encoder.params().len()],
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in [
            (&mut self.decoder, &other.decoder),
            (&mut self.classifier, &other.classifier),
            (&mut self.encoder, &other.encoder),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in [&mut self.decoder, &mut self.classifier, &mut self.encoder] {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.decoder.clone();
        out.extend(&self.classifier);
        out.extend(&self.encoder);
        out
    }
}

/// Summed loss components over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    /// `Σ_unlabelled L_unsup + γ Σ_labelled L_sup`.
    pub total: f64,
    /// `Σ_labelled L_sup` (unweighted).
    pub supervised: f64,
    /// `Σ_unlabelled L_unsup`.
    pub unsupervised: f64,
    /// Classifier cross-entropy summed over labelled examples.
    pub classification: f64,
}

/// `KL(N(μ, σ²) || N(0, I))` with `logvar = log σ²`.
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter()
        .zip(logvar)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum()
}

/// Loss and parameter gradients of a mixed batch.
pub fn batch_objective(
    model: &DvaeModel,
    labelled: &[(&ExampleInput, PhaseLabel)],
    unlabelled: &[&ExampleInput],
    gamma: f64,
    noise: &BatchNoise,
) -> Result<(ObjectiveTerms, ModelGrads), DvaeError> {
    let l = model.latent_dim();
    let n_lab = labelled.len();
    let n_rows = BatchNoise::rows_for(n_lab, unlabelled.len());
    if noise.latent_dim != l || noise.values.len() != n_rows * l {
        return Err(NnError::ShapeMismatch {
            expected: vec![n_rows, l],
            got: vec![noise.rows(), noise.latent_dim],
        }
        .into());
    }
    let mut grads = ModelGrads::zeros_like(model);
    let mut terms = ObjectiveTerms::default();
    if n_rows == 0 {
        return Ok((terms, grads));
    }

    // Classifier over every example; unlabelled outputs only weight branches.
    let cls_rows: Vec<&[f64]> = labelled
        .iter()
        .map(|(e, _)| &e.features[..])
        .chain(unlabelled.iter().map(|e| &e.features[..]))
        .collect();
    let cls_trace = model
        .classifier
        .forward_trace(&Tensor::from_rows(&cls_rows)?)?;
    let cls_logits = cls_trace.output().values().to_vec();

    let mut xs: Vec<&[f64; VOCAB_SIZE]> = Vec::with_capacity(n_rows);
    let mut phis = Vec::with_capacity(n_rows);
    let mut weights = Vec::with_capacity(n_rows);
    for (e, label) in labelled {
        xs.push(&e.x);
        phis.push(label.as_f64());
        weights.push(gamma);
    }
    let mut q_unl = Vec::with_capacity(unlabelled.len());
    for (u, e) in unlabelled.iter().enumerate() {
        let q = sigmoid(cls_logits[n_lab + u]);
        q_unl.push(q);
        for (phi, w) in [(0.0, 1.0 - q), (1.0, q)] {
            xs.push(&e.x);
            phis.push(phi);
            weights.push(w);
        }
    }

    let enc_in: Vec<f64> = xs
        .iter()
        .zip(&phis)
        .flat_map(|(x, phi)| x.iter().copied().chain(std::iter::once(*phi)))
        .collect();
    let enc_trace =
        model
            .encoder
            .forward_trace(&Tensor::from_vec(n_rows, VOCAB_SIZE + 1, enc_in)?)?;
    let enc_out = enc_trace.output();

    let mut sigma = vec![0.0; n_rows * l];
    let mut dec_in = Vec::with_capacity(n_rows * (1 + l));
    let mut kl = vec![0.0; n_rows];
    for r in 0..n_rows {
        let row = enc_out.row(r);
        let (mu, logvar) = row.split_at(l);
        kl[r] = gaussian_kl(mu, logvar);
        dec_in.push(phis[r]);
        for j in 0..l {
            let s = (0.5 * logvar[j]).exp();
            sigma[r * l + j] = s;
            dec_in.push(mu[j] + s * noise.row(r)[j]);
        }
    }
    let dec_trace = model
        .decoder
        .forward_trace(&Tensor::from_vec(n_rows, 1 + l, dec_in)?)?;
    let dec_out = dec_trace.output();

    let count = model.config.composition_count;
    let mut rec = vec![0.0; n_rows];
    let mut d_logits = Tensor::zeros(n_rows, VOCAB_SIZE);
    for r in 0..n_rows {
        let logp = log_softmax(dec_out.row(r));
        let x = xs[r];
        let mass: f64 = x.iter().sum();
        rec[r] = -count * x.iter().zip(&logp).map(|(xi, lp)| xi * lp).sum::<f64>();
        let w = weights[r] * count;
        for (j, g) in d_logits.row_mut(r).iter_mut().enumerate() {
            *g = w * (logp[j].exp() * mass - x[j]);
        }
    }
    let dec_grads = model.decoder.backward(&dec_trace, &d_logits)?;
    grads.decoder = dec_grads.params;

    let mut d_enc = Tensor::zeros(n_rows, 2 * l);
    for r in 0..n_rows {
        let w = weights[r];
        let row = enc_out.row(r);
        let dz = &dec_grads.input.row(r)[1..];
        let eps = noise.row(r);
        let out = d_enc.row_mut(r);
        for j in 0..l {
            let (mu, lv) = (row[j], row[l + j]);
            let s = sigma[r * l + j];
            out[j] = dz[j] + w * mu;
            out[l + j] = dz[j] * eps[j] * 0.5 * s + w * 0.5 * (lv.exp() - 1.0);
        }
    }
    grads.encoder = model.encoder.backward(&enc_trace, &d_enc)?.params;

    let ln_r = model.phase_prior_r.ln();
    let ln_1r = (1.0 - model.phase_prior_r).ln();
    let mut d_cls = Tensor::zeros(cls_rows.len(), 1);
    for (k, (_, label)) in labelled.iter().enumerate() {
        let s = cls_logits[k];
        let phi = label.as_f64();
        // -log σ(s)^φ (1-σ(s))^(1-φ) = softplus(s) - φ s
        let ce = softplus(s) - phi * s;
        let prior = -(phi * ln_r + (1.0 - phi) * ln_1r);
        terms.classification += ce;
        terms.supervised += rec[k] + kl[k] + ce + prior;
        d_cls.values_mut()[k] = gamma * (sigmoid(s) - phi);
    }
    for (u, q) in q_unl.iter().enumerate() {
        let r0 = n_lab + 2 * u;
        terms.unsupervised += (1.0 - q) * (rec[r0] + kl[r0]) + q * (rec[r0 + 1] + kl[r0 + 1]);
    }
    grads.classifier = model.classifier.backward(&cls_trace, &d_cls)?.params;
    terms.total = terms.unsupervised + gamma * terms.supervised;
    if !terms.total.is_finite() {
        return Err(DvaeError::NonFiniteLoss(format!(
            "batch of {n_lab} labelled / {} unlabelled",
            unlabelled.len()
        )));
    }
    Ok((terms, grads))
}

/// `L_sup` of one labelled example with frozen noise `eps`.
pub fn elbo_labelled(
    model: &DvaeModel,
    example: &ExampleInput,
    label: PhaseLabel,
    eps: &[f64],
) -> Result<(f64, ModelGrads), DvaeError> {
    let noise = BatchNoise {
        latent_dim: model.latent_dim(),
        values: eps.to_vec(),
    };
    let (t, g) = batch_objective(model, &[(example, label)], &[], 1.0, &noise)?;
    Ok((t.supervised, g))
}

/// `L_unsup` of one unlabelled example with frozen noise for the `φ = 0`
/// and `φ = 1` branches.
pub fn elbo_unlabelled(
    model: &DvaeModel,
    example: &ExampleInput,
    eps_phase0: &[f64],
    eps_phase1: &[f64],
) -> Result<(f64, ModelGrads), DvaeError> {
    let mut values = eps_phase0.to_vec();
    values.extend_from_slice(eps_phase1);
    let noise = BatchNoise {
        latent_dim: model.latent_dim(),
        values,
    };
    let (t, g) = batch_objective(model, &[], &[example], 1.0, &noise)?;
    Ok((t.unsupervised, g))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::DvaeConfig;
    use super::*;
    use crate::elements::Composition;
    use crate::nncore::seeded_rng;
    use rand::Rng;

    fn example(formula: &str, rng: &mut impl Rng) -> ExampleInput {
        let mut features = [0.0; N_FEATURES];
        features
            .iter_mut()
            .for_each(|f| *f = rng.random_range(-1.5..1.5));
        ExampleInput {
            x: Composition::parse(formula).unwrap().to_vector(),
            features,
        }
    }

    fn fixture(
        seed: u64,
    ) -> (
        DvaeModel,
        Vec<(ExampleInput, PhaseLabel)>,
        Vec<ExampleInput>,
    ) {
        let mut rng = seeded_rng(seed);
        let model = random_model(small_config(), seed);
        let lab = vec![
            (
                example("Fe20Ni20Co20Ti20Cu20", &mut rng),
                PhaseLabel::SinglePhase,
            ),
            (example("AlCoCrFeNi", &mut rng), PhaseLabel::MultiPhase),
            (example("NbMoTaW", &mut rng), PhaseLabel::SinglePhase),
        ];
        let unl = vec![
            example("Al11Ti22V22Nb22Zr22", &mut rng),
            example("CuNi", &mut rng),
        ];
        (model, lab, unl)
    }

    fn total(
        model: &DvaeModel,
        lab: &[(ExampleInput, PhaseLabel)],
        unl: &[ExampleInput],
        gamma: f64,
        noise: &BatchNoise,
    ) -> f64 {
        let l: Vec<_> = lab.iter().map(|(e, y)| (e, *y)).collect();
        let u: Vec<_> = unl.iter().collect();
        batch_objective(model, &l, &u, gamma, noise)
            .unwrap()
            .0
            .total
    }

    fn params_mut(model: &mut DvaeModel, net: usize) -> &mut [f64] {
        match net {
            0 => model.decoder.params_mut(),
            1 => model.classifier.params_mut(),
            _ => model.encoder.params_mut(),
        }
    }

    #[test]
    fn full_objective_matches_finite_differences() {
        for seed in 0..4 {
            let (model, lab, unl) = fixture(seed);
            let mut rng = seeded_rng(100 + seed);
            let noise = BatchNoise::sample(&mut rng, BatchNoise::rows_for(lab.len(), unl.len()), 2);
            let l: Vec<_> = lab.iter().map(|(e, y)| (e, *y)).collect();
            let u: Vec<_> = unl.iter().collect();
            let (_, g) = batch_objective(&model, &l, &u, 10.0, &noise).unwrap();
            let analytic = [&g.decoder, &g.classifier, &g.encoder];
            // The branch weights q are constants of the gradient, so the
            // classifier is checked against the labelled part only, where
            // it is the sole route.
            let lab_noise = BatchNoise {
                latent_dim: 2,
                values: noise.values[..lab.len() * 2].to_vec(),
            };
            let h = 1e-6;
            let (mut num, mut ana) = (Vec::new(), Vec::new());
            for net in 0..3 {
                let (unl_fd, noise_fd) = if net == 1 {
                    (&unl[..0], &lab_noise)
                } else {
                    (&unl[..], &noise)
                };
                let n = analytic[net].len();
                for _ in 0..40 {
                    let i = rng.random_range(0..n);
                    let mut plus = model.clone();
                    params_mut(&mut plus, net)[i] += h;
                    let mut minus = model.clone();
                    params_mut(&mut minus, net)[i] -= h;
                    num.push(
                        (total(&plus, &lab, unl_fd, 10.0, noise_fd)
                            - total(&minus, &lab, unl_fd, 10.0, noise_fd))
                            / (2.0 * h),
                    );
                    ana.push(analytic[net][i]);
                }
            }
            let diff: f64 = num
                .iter()
                .zip(&ana)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            assert!(
                diff / scale < 1e-4,
                "seed {seed}: relative error {}",
                diff / scale
            );
        }
    }

    #[test]
    fn labelled_and_unlabelled_terms_compose_the_total() {
        let (model, lab, unl) = fixture(7);
        let mut rng = seeded_rng(8);
        let noise = BatchNoise::sample(&mut rng, BatchNoise::rows_for(lab.len(), unl.len()), 2);
        let gamma = 10.0;
        let batch = total(&model, &lab, &unl, gamma, &noise);
        let mut sum = 0.0;
        for (k, (e, y)) in lab.iter().enumerate() {
            sum += gamma * elbo_labelled(&model, e, *y, noise.row(k)).unwrap().0;
        }
        for (u, e) in unl.iter().enumerate() {
            let r = lab.len() + 2 * u;
            sum += elbo_unlabelled(&model, e, noise.row(r), noise.row(r + 1))
                .unwrap()
                .0;
        }
        assert!((batch - sum).abs() < 1e-9 * batch.abs().max(1.0));
    }

    #[test]
    fn unlabelled_term_sends_no_gradient_to_classifier() {
        let (model, _, unl) = fixture(3);
        let mut rng = seeded_rng(4);
        let noise = BatchNoise::sample(&mut rng, 2, 2);
        let (_, g) = elbo_unlabelled(&model, &unl[0], noise.row(0), noise.row(1)).unwrap();
        assert!(g.classifier.iter().all(|v| *v == 0.0));
        assert!(g.encoder.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn zero_gamma_silences_classifier() {
        let (model, lab, unl) = fixture(5);
        let noise = BatchNoise::zeros(BatchNoise::rows_for(lab.len(), unl.len()), 2);
        let l: Vec<_> = lab.iter().map(|(e, y)| (e, *y)).collect();
        let u: Vec<_> = unl.iter().collect();
        let (t, g) = batch_objective(&model, &l, &u, 0.0, &noise).unwrap();
        assert!(g.classifier.iter().all(|v| *v == 0.0));
        assert_eq!(t.total, t.unsupervised);
    }

    #[test]
    fn hand_computed_labelled_loss() {
        // Zero networks: μ = 0, log σ² = 0, uniform decoder, classifier 1/2.
        let config = DvaeConfig {
            hidden: vec![3],
            composition_count: 40.0,
            ..DvaeConfig::default()
        };
        let mut model = random_model(config, 0);
        model.decoder.params_mut().fill(0.0);
        model.encoder.params_mut().fill(0.0);
        model.classifier.params_mut().fill(0.0);
        model.phase_prior_r = 0.25;
        let e = ExampleInput {
            x: Composition::parse("FeNi").unwrap().to_vector(),
            features: [0.0; N_FEATURES],
        };
        let (loss, _) = elbo_labelled(&model, &e, PhaseLabel::SinglePhase, &[0.3, -0.7]).unwrap();
        let expected = 40.0 * (30.0f64).ln() + 0.0 + 2.0f64.ln() - 0.25f64.ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn kl_of_standard_normal_is_zero() {
        assert_eq!(gaussian_kl(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        let kl = gaussian_kl(&[1.0], &[0.0]);
        assert!((kl - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noise_shape_is_checked() {
        let (model, lab, _) = fixture(1);
        let bad = BatchNoise::zeros(2, 2);
        assert!(batch_objective(&model, &[(&lab[0].0, lab[0].1)], &[], 1.0, &bad).is_err());
    }
}
