//! Exact kernel SHAP for low-dimensional models.
//!
//! With `M` features all `2^M` coalitions are enumerated, each weighted by
//! the Shapley kernel `(M - 1) / (C(M, s) s (M - s))`. The empty and full
//! coalitions become equality constraints, removed by eliminating the last
//! attribution, and the remaining weighted least-squares problem is solved
//! directly. Absent features take background values and the model output is
//! averaged over the background (interventional expectation).

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::spearman;
use crate::dvae::{DvaeError, DvaeModel};
use crate::elements::Composition;
use crate::featurize::{FeatureVector8, FEATURE_NAMES, N_FEATURES};
use crate::nncore::{seeded_rng, sigmoid, Tensor};
use crate::par;

/// Upper bound on features for exact enumeration.
pub const MAX_EXACT_FEATURES: usize = 16;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("nothing to explain")]
    EmptyEvaluation,
    #[error("model returned a non-finite output")]
    NonFiniteModelOutput,
    #[error("{got} features; exact enumeration supports 1..={MAX_EXACT_FEATURES}")]
    FeatureCount { got: usize },
    #[error("background row has {got} features, instance has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("singular kernel system")]
    Singular,
    #[error(transparent)]
    Model(#[from] DvaeError),
}

/// Attributions for one instance. `base_value + Σ values = output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapValues {
    pub base_value: f64,
    pub values: Vec<f64>,
    pub output: f64,
}

/// Exact kernel SHAP of `model` at `instance`. `model` maps a batch of rows
/// to one output per row.
pub fn kernel_shap<F>(
    model: F,
    instance: &[f64],
    background: &[Vec<f64>],
) -> Result<ShapValues, ExplainError>
where
    F: Fn(&Tensor) -> Vec<f64>,
{
    let m = instance.len();
    if m == 0 || m > MAX_EXACT_FEATURES {
        return Err(ExplainError::FeatureCount { got: m });
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if let Some(b) = background.iter().find(|b| b.len() != m) {
        return Err(ExplainError::ShapeMismatch {
            expected: m,
            got: b.len(),
        });
    }
    let value = |mask: usize| -> Result<f64, ExplainError> {
        let mut rows = Vec::with_capacity(background.len() * m);
        for b in background {
            rows.extend((0..m).map(|i| {
                if mask >> i & 1 == 1 {
                    instance[i]
                } else {
                    b[i]
                }
            }));
        }
        let t = Tensor::from_vec(background.len(), m, rows).expect("consistent shape");
        let out = model(&t);
        if out.len() != background.len() || out.iter().any(|v| !v.is_finite()) {
            return Err(ExplainError::NonFiniteModelOutput);
        }
        Ok(out.iter().sum::<f64>() / out.len() as f64)
    };
    let full = (1usize << m) - 1;
    let base_value = value(0)?;
    let output = {
        let t = Tensor::from_vec(1, m, instance.to_vec()).expect("consistent shape");
        let out = model(&t);
        match out.first() {
            Some(v) if v.is_finite() => *v,
            _ => return Err(ExplainError::NonFiniteModelOutput),
        }
    };
    let delta = output - base_value;
    if m == 1 {
        return Ok(ShapValues {
            base_value,
            values: vec![delta],
            output,
        });
    }

    // Unknowns φ_0..φ_{m-2}; φ_{m-1} = Δ - Σ φ_i.
    let k = m - 1;
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for mask in 1..full {
        let s = mask.count_ones() as usize;
        let w = (m - 1) as f64 / (binomial(m, s) * (s * (m - s)) as f64);
        let last = (mask >> (m - 1) & 1) as f64;
        let y = value(mask)? - base_value - last * delta;
        let a: Vec<f64> = (0..k).map(|i| (mask >> i & 1) as f64 - last).collect();
        for i in 0..k {
            if a[i] == 0.0 {
                continue;
            }
            aty[i] += w * a[i] * y;
            for j in 0..k {
                ata[i][j] += w * a[i] * a[j];
            }
        }
    }
    let mut values = solve(ata, aty).ok_or(ExplainError::Singular)?;
    values.push(delta - values.iter().sum::<f64>());
    Ok(ShapValues {
        base_value,
        values,
        output,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Seeded subsample of at most `max_rows` rows, order preserved.
pub fn subsample_background(rows: &[Vec<f64>], max_rows: usize, seed: u64) -> Vec<Vec<f64>> {
    if rows.len() <= max_rows {
        return rows.to_vec();
    }
    let mut idx = sample(&mut seeded_rng(seed), rows.len(), max_rows).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapOptions {
    pub max_background: usize,
    pub seed: u64,
}

impl Default for ShapOptions {
    fn default() -> Self {
        Self {
            max_background: 256,
            seed: 0,
        }
    }
}

/// One explained alloy. SHAP values are computed in standardized feature
/// space; `features` holds the raw descriptor values for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub formula: String,
    pub base_value: f64,
    pub shap_values: [f64; N_FEATURES],
    pub instance: FeatureVector8,
    pub output: f64,
}

/// Explanations for a set of alloys plus per-feature aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub explanations: Vec<ShapExplanation>,
    /// Mean |shap| per feature, in `FEATURE_NAMES` order.
    pub mean_abs: [f64; N_FEATURES],
}

/// Batched classifier head on standardized rows.
fn classifier_fn(model: &DvaeModel) -> impl Fn(&Tensor) -> Vec<f64> + Sync + '_ {
    move |t: &Tensor| match model.classifier.forward(t) {
        Ok(out) => out.values().iter().map(|s| sigmoid(*s)).collect(),
        Err(_) => vec![f64::NAN; t.rows()],
    }
}

/// Standardized descriptors of `comps`, as background rows.
pub fn background_rows(
    model: &DvaeModel,
    comps: &[Composition],
) -> Result<Vec<Vec<f64>>, ExplainError> {
    Ok(par::try_map(comps, |c| {
        model.standardized_features(c).map(|f| f.to_vec())
    })?)
}

/// Explains the classifier head on one alloy against a prepared background.
pub fn explain_alloy(
    model: &DvaeModel,
    alloy: &Composition,
    background: &[Vec<f64>],
) -> Result<ShapExplanation, ExplainError> {
    let raw = model.features(alloy)?;
    let std = model.scaler.apply(&raw);
    let s = kernel_shap(classifier_fn(model), &std, background)?;
    let mut shap_values = [0.0; N_FEATURES];
    shap_values.copy_from_slice(&s.values);
    Ok(ShapExplanation {
        formula: alloy.format_standard(),
        base_value: s.base_value,
        shap_values,
        instance: raw,
        output: s.output,
    })
}

/// Explains every alloy in `evaluation` against a seeded subsample of
/// `background`.
pub fn global_importance(
    model: &DvaeModel,
    evaluation: &[Composition],
    background: &[Composition],
    options: ShapOptions,
) -> Result<GlobalImportance, ExplainError> {
    if evaluation.is_empty() {
        return Err(ExplainError::EmptyEvaluation);
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    let bg = subsample_background(
        &background_rows(model, background)?,
        options.max_background,
        options.seed,
    );
    let explanations = par::try_map(evaluation, |c| explain_alloy(model, c, &bg))?;
    let mut mean_abs = [0.0; N_FEATURES];
    for e in &explanations {
        for (m, v) in mean_abs.iter_mut().zip(&e.shap_values) {
            *m += v.abs();
        }
    }
    mean_abs
        .iter_mut()
        .for_each(|m| *m /= explanations.len() as f64);
    Ok(GlobalImportance {
        explanations,
        mean_abs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmPoint {
    pub formula: String,
    pub value: f64,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmFeature {
    pub name: String,
    pub mean_abs_shap: f64,
    /// Spearman correlation between raw value and attribution.
    pub direction: f64,
    pub points: Vec<BeeswarmPoint>,
}

impl GlobalImportance {
    /// Spearman correlation between each raw feature and its attribution.
    pub fn direction_correlations(&self) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for (k, o) in out.iter_mut().enumerate() {
            let vals: Vec<f64> = self
                .explanations
                .iter()
                .map(|e| e.instance.to_array()[k])
                .collect();
            let shap: Vec<f64> = self.explanations.iter().map(|e| e.shap_values[k]).collect();
            *o = spearman(&vals, &shap);
        }
        out
    }

    /// Features sorted by descending mean |shap|.
    pub fn beeswarm(&self) -> Vec<BeeswarmFeature> {
        let dirs = self.direction_correlations();
        let mut feats: Vec<BeeswarmFeature> = (0..N_FEATURES)
            .map(|k| BeeswarmFeature {
                name: FEATURE_NAMES[k].to_string(),
                mean_abs_shap: self.mean_abs[k],
                direction: dirs[k],
                points: self
                    .explanations
                    .iter()
                    .map(|e| BeeswarmPoint {
                        formula: e.formula.clone(),
                        value: e.instance.to_array()[k],
                        shap: e.shap_values[k],
                    })
                    .collect(),
            })
            .collect();
        feats.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap));
        feats
    }

    /// `id,formula,<8 raw features>,<8 shap_*>,base_value,output`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,formula");
        for n in FEATURE_NAMES {
            out.push(',');
            out.push_str(n);
        }
        for n in FEATURE_NAMES {
            out.push_str(",shap_");
            out.push_str(n);
        }
        out.push_str(",base_value,output\n");
        for (i, e) in self.explanations.iter().enumerate() {
            out.push_str(&format!("{i},{}", e.formula));
            for v in e.instance.to_array().iter().chain(&e.shap_values) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{}\n", e.base_value, e.output));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvae::DvaeConfig;
    use crate::elements::ElementTable;
    use crate::featurize::FeatureScaler;
    use proptest::prelude::*;
    use rand::Rng;

    /// Shapley values by averaging marginal contributions over all `m!`
    /// orderings, with the same interventional value function.
    fn permutation_shapley(f: &dyn Fn(&[f64]) -> f64, x: &[f64], bg: &[Vec<f64>]) -> Vec<f64> {
        let m = x.len();
        let v: Vec<f64> = (0..1usize << m)
            .map(|mask| {
                bg.iter()
                    .map(|b| {
                        let row: Vec<f64> = (0..m)
                            .map(|i| if mask >> i & 1 == 1 { x[i] } else { b[i] })
                            .collect();
                        f(&row)
                    })
                    .sum::<f64>()
                    / bg.len() as f64
            })
            .collect();
        let mut phi = vec![0.0; m];
        let mut perm: Vec<usize> = (0..m).collect();
        let mut count = 0usize;
        permute(&mut perm, 0, &mut |p| {
            let mut mask = 0usize;
            for &i in p {
                let before = v[mask];
                mask |= 1 << i;
                phi[i] += v[mask] - before;
            }
            count += 1;
        });
        phi.iter().map(|s| s / count as f64).collect()
    }

    fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
        if k == p.len() {
            visit(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, visit);
            p.swap(k, i);
        }
    }

    fn batch(f: impl Fn(&[f64]) -> f64) -> impl Fn(&Tensor) -> Vec<f64> {
        move |t: &Tensor| t.iter_rows().map(&f).collect()
    }

    fn nonlinear(x: &[f64]) -> f64 {
        let s = 0.7 * x[0] - 1.1 * x[1] * x[2] + (x[3] * x[4]).tanh() + 0.3 * x[5].powi(2)
            - x[6] * x[7] * x[0];
        sigmoid(s)
    }

    #[test]
    fn matches_permutation_enumeration_on_eight_features() {
        let mut rng = seeded_rng(17);
        for _ in 0..3 {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let bg: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..8).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let s = kernel_shap(batch(nonlinear), &x, &bg).unwrap();
            let oracle = permutation_shapley(&nonlinear, &x, &bg);
            for (a, b) in s.values.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
            let sum: f64 = s.values.iter().sum();
            assert!((s.base_value + sum - s.output).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_model_closed_form() {
        let w = [0.5, -1.0, 2.0, 0.0, 0.25, -0.75, 1.5, 3.0];
        let f = move |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let x = [1.0, 2.0, -1.0, 4.0, 0.5, 0.0, -2.0, 0.1];
        let b = vec![0.2, -0.3, 0.0, 1.0, 1.0, -1.0, 0.5, 0.0];
        let s = kernel_shap(batch(f), &x, &[b.clone()]).unwrap();
        for i in 0..8 {
            assert!((s.values[i] - w[i] * (x[i] - b[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn single_feature_and_constant_models() {
        let x = [1.0, 2.0, 3.0];
        let bg = vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        let s = kernel_shap(batch(|r: &[f64]| r[1].powi(2)), &x, &bg).unwrap();
        assert!((s.values[1] - (4.0 - 0.5)).abs() < 1e-9);
        assert!(s.values[0].abs() < 1e-9 && s.values[2].abs() < 1e-9);
        let c = kernel_shap(batch(|_| 0.42), &x, &bg).unwrap();
        assert_eq!(c.base_value, 0.42);
        assert!(c.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let f = batch(|_| 0.0);
        assert!(matches!(
            kernel_shap(&f, &[1.0], &[]),
            Err(ExplainError::EmptyBackground)
        ));
        assert!(matches!(
            kernel_shap(&f, &[1.0, 2.0], &[vec![1.0]]),
            Err(ExplainError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            kernel_shap(batch(|_| f64::NAN), &[1.0, 2.0], &[vec![0.0, 0.0]]),
            Err(ExplainError::NonFiniteModelOutput)
        ));
    }

    #[test]
    fn subsample_is_seeded_and_bounded() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let a = subsample_background(&rows, 256, 3);
        assert_eq!(a.len(), 256);
        assert_eq!(a, subsample_background(&rows, 256, 3));
        assert_eq!(subsample_background(&rows[..10], 256, 3).len(), 10);
    }

    #[test]
    fn global_importance_on_a_random_model() {
        let model = DvaeModel::init(
            DvaeConfig {
                hidden: vec![10],
                ..DvaeConfig::default()
            },
            FeatureScaler::identity(),
            0.5,
            ElementTable::bundled().clone(),
            &mut seeded_rng(1),
        )
        .unwrap();
        let comps: Vec<Composition> = ["NbMoTaW", "CoCrFeNi", "AlCoCrFeNi", "Fe20Ni20Co20Ti20Cu20"]
            .iter()
            .map(|f| Composition::parse(f).unwrap())
            .collect();
        let g = global_importance(&model, &comps[..1], &comps, ShapOptions::default()).unwrap();
        let e = &g.explanations[0];
        for k in 0..N_FEATURES {
            assert_eq!(g.mean_abs[k], e.shap_values[k].abs());
        }
        assert!((e.base_value + e.shap_values.iter().sum::<f64>() - e.output).abs() < 1e-6);
        assert!((e.output - model.classify(&comps[0]).unwrap()).abs() < 1e-12);
        assert_eq!(g.to_csv().lines().count(), 2);
        assert_eq!(g.beeswarm().len(), N_FEATURES);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn missingness_and_symmetry(x in prop::collection::vec(-2.0f64..2.0, 8), shared in -1.0f64..1.0, b0 in -1.0f64..1.0) {
            // Feature 7 equals the background everywhere; features 0 and 1
            // enter symmetrically and share instance/background values.
            let mut x = x;
            x[7] = shared;
            x[1] = x[0];
            let bg = vec![vec![b0, b0, 0.1, 0.2, 0.3, 0.4, 0.5, shared]];
            let f = |r: &[f64]| (r[0] * r[1]).sin() + r[2] * r[3] - r[4] + r[5] * r[6] + r[7] * r[0] * r[1];
            let s = kernel_shap(batch(f), &x, &bg).unwrap();
            prop_assert!(s.values[7].abs() < 1e-6);
            prop_assert!((s.values[0] - s.values[1]).abs() < 1e-6);
            prop_assert!((s.base_value + s.values.iter().sum::<f64>() - s.output).abs() < 1e-6);
        }
    }
}
