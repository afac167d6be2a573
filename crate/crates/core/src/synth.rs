//! Reproducible surrogate of the experimental single-phase dataset.
//!
//! Alloys are drawn from five chemical families (3d transition-metal HEAs,
//! refractory HEAs, light-metal alloys, noble-metal alloys and simple
//! binaries/ternaries). Labels come from a noisy logistic rule on the
//! engineered descriptors: small size mismatch, low mixing entropy, high
//! melting point, high bulk modulus, a moderate mixing enthalpy and a small
//! electronegativity spread favour a single phase. A fixed list of
//! well-characterised alloys is included with their reported labels.

use rand::seq::index::sample_weighted;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::AlloyRecord;
use crate::dvae::PhaseLabel;
use crate::elements::{Composition, ElementError, ElementTable};
use crate::featurize::{engineered_features, FeatureError, FeatureVector8};
use crate::nncore::{seeded_rng, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub seed: u64,
    /// Multiplies the rule logit before sampling labels; larger is less noisy.
    pub sharpness: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_rows: 1373,
            seed: 20_240_601,
            sharpness: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TransitionMetal,
    Refractory,
    Light,
    Noble,
    Simple,
    Reference,
}

struct FamilySpec {
    family: Family,
    share: f64,
    pool: &'static [(&'static str, f64)],
    sizes: &'static [(usize, f64)],
}

const FAMILIES: &[FamilySpec] = &[
    FamilySpec {
        family: Family::TransitionMetal,
        share: 0.43,
        pool: &[
            ("Fe", 10.0),
            ("Ni", 9.6),
            ("Cr", 8.0),
            ("Co", 8.6),
            ("Al", 4.2),
            ("Cu", 3.6),
            ("Mn", 2.4),
            ("Ti", 1.6),
            ("Mo", 1.4),
            ("V", 1.0),
            ("Nb", 0.8),
            ("Si", 0.7),
            ("C", 0.7),
            ("Zr", 0.3),
            ("W", 0.3),
            ("Ta", 0.2),
            ("B", 0.15),
            ("Sn", 0.2),
            ("Y", 0.1),
            ("Ga", 0.1),
        ],
        sizes: &[(4, 0.3), (5, 0.4), (6, 0.25), (7, 0.05)],
    },
    FamilySpec {
        family: Family::Refractory,
        share: 0.24,
        pool: &[
            ("Ti", 6.0),
            ("Nb", 6.0),
            ("Mo", 5.5),
            ("V", 4.6),
            ("Zr", 4.8),
            ("Ta", 5.0),
            ("W", 4.2),
            ("Hf", 3.6),
            ("Cr", 2.4),
            ("Al", 2.2),
            ("Si", 0.6),
            ("Re", 0.4),
            ("C", 0.2),
        ],
        sizes: &[(4, 0.4), (5, 0.4), (6, 0.2)],
    },
    FamilySpec {
        family: Family::Light,
        share: 0.1,
        pool: &[
            ("Al", 6.0),
            ("Mg", 4.0),
            ("Zn", 3.5),
            ("Li", 3.0),
            ("Cu", 2.0),
            ("Ti", 2.0),
            ("Sn", 2.0),
            ("Si", 1.0),
            ("Sc", 1.2),
            ("Y", 0.8),
            ("Zr", 0.5),
            ("Ga", 0.4),
        ],
        sizes: &[(3, 0.25), (4, 0.4), (5, 0.35)],
    },
    FamilySpec {
        family: Family::Noble,
        share: 0.06,
        pool: &[
            ("Pd", 4.0),
            ("Ag", 2.4),
            ("Pt", 1.4),
            ("Ru", 1.6),
            ("Cu", 2.5),
            ("Ni", 2.0),
            ("Co", 1.0),
            ("Fe", 0.8),
            ("Re", 1.0),
            ("Sc", 0.6),
            ("Y", 0.6),
            ("Ga", 0.5),
            ("B", 0.5),
            ("Sn", 0.5),
        ],
        sizes: &[(4, 0.5), (5, 0.4), (6, 0.1)],
    },
    FamilySpec {
        family: Family::Simple,
        share: 0.17,
        pool: &[
            ("Fe", 4.0),
            ("Ni", 4.4),
            ("Cr", 2.6),
            ("Co", 2.6),
            ("Al", 3.2),
            ("Cu", 3.2),
            ("Ti", 2.8),
            ("Mo", 1.8),
            ("V", 1.6),
            ("Nb", 1.4),
            ("Mn", 1.6),
            ("Zr", 1.4),
            ("Ta", 1.0),
            ("W", 1.2),
            ("Hf", 0.8),
            ("Si", 0.8),
            ("C", 0.8),
            ("Sn", 0.9),
            ("Mg", 0.9),
            ("Zn", 0.8),
            ("Li", 0.4),
            ("Re", 0.6),
            ("Y", 0.4),
            ("Sc", 0.3),
            ("Pd", 0.5),
            ("B", 0.5),
            ("Ga", 0.5),
            ("Ag", 0.4),
            ("Ru", 0.4),
            ("Pt", 0.35),
        ],
        sizes: &[(2, 0.6), (3, 0.4)],
    },
];

/// Alloys included verbatim with their reported phase labels.
pub const REFERENCE_ALLOYS: &[(&str, bool)] = &[
    ("Fe19Ni19Cr19Co13Al19Mo9", false),
    ("Al11Ti22V22Nb22Zr22", false),
    ("Al4Ti23Mo23V23Ta23", true),
    ("Fe20Ni20Co20Ti20Cu20", true),
    ("Fe14Ni16Cr22Co14Al22Cu8", false),
    ("CoCrFeMnNi", true),
    ("CoCrFeNi", true),
    ("CoFeNi", true),
    ("CoCrNi", true),
    ("NbMoTaW", true),
    ("NbMoTaWV", true),
    ("HfNbTaTiZr", true),
    ("NbTaTiV", true),
    ("MoNbTaTiW", true),
    ("AlCoCrFeNi", false),
    ("Al0.5CoCrFeNi", false),
    ("Al2CoCrFeNi", false),
    ("CoCrFeNiCu", false),
    ("AlCoCrCuFeNi", false),
    ("CoCrFeNiTi", false),
    ("AlMoNbTaTiZr", false),
    ("CrMoNbTaVW", false),
];

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Log-odds of single phase under the labelling rule.
pub fn rule_logit(f: &FeatureVector8) -> f64 {
    let delta_pct = 100.0 * f.delta;
    3.0 - 0.9 * (delta_pct - 4.0) - 0.22 * (f.ds_mix - 11.0)
        + 0.001 * (f.t_m - 1750.0)
        + 0.08 * (f.k - 140.0)
        - 0.28 * (-f.dh_mix - 7.0).max(0.0)
        - 0.8 * (f.dh_mix - 2.0).max(0.0)
        - 8.0 * (f.delta_chi - 0.14).max(0.0)
}

/// A generated row with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRow {
    pub formula: String,
    pub record: AlloyRecord,
    pub family: Family,
    /// Rule probability the label was sampled from (1 or 0 for references).
    pub p_single_phase: f64,
}

fn draw_amounts(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mode: f64 = rng.random();
    let amounts: Vec<f64> = if mode < 0.5 {
        vec![1.0; n]
    } else if mode < 0.75 {
        let mut v = vec![1.0; n];
        let k = rng.random_range(0..n);
        v[k] = [
            0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.75, 0.8, 1.25, 1.5, 2.0,
        ][rng.random_range(0..12)];
        v
    } else {
        let g = Gamma::new(3.0, 1.0).expect("valid gamma");
        (0..n).map(|_| f64::max(g.sample(rng), 0.05)).collect()
    };
    let total: f64 = amounts.iter().sum();
    // Atomic percent to 0.5 at.% resolution.
    amounts
        .iter()
        .map(|a| ((200.0 * a / total).round() / 2.0).max(0.5))
        .collect()
}

fn format_amount(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Generates `config.n_rows` rows: the reference alloys first, then family
/// draws. Deterministic per seed.
pub fn generate(config: &SynthConfig, table: &ElementTable) -> Result<Vec<SynthRow>, SynthError> {
    generate_quota(config, table)
}

/// Target occurrence counts per element for 1373 rows, in vocabulary
/// order. Sampling weights are scaled by the remaining quota so that the
/// realised counts rank in vocabulary order.
const ELEMENT_QUOTA: [f64; 30] = [
    600.0, 570.0, 540.0, 510.0, 480.0, 430.0, 400.0, 340.0, 300.0, 275.0, 250.0, 225.0, 205.0,
    190.0, 160.0, 125.0, 105.0, 92.0, 83.0, 75.0, 66.0, 58.0, 52.0, 46.0, 41.0, 36.0, 32.0, 28.0,
    24.0, 20.0,
];

fn generate_quota(config: &SynthConfig, table: &ElementTable) -> Result<Vec<SynthRow>, SynthError> {
    let vocab = crate::elements::Vocabulary::global();
    let scale = 0.92 * config.n_rows as f64 / 1373.0;
    let quota: Vec<f64> = ELEMENT_QUOTA.iter().map(|q| q * scale).collect();
    let mut used = [0.0f64; 30];
    let mut rng = seeded_rng(config.seed);
    let mut rows = Vec::with_capacity(config.n_rows);
    for (formula, sp) in REFERENCE_ALLOYS.iter().take(config.n_rows) {
        rows.push(SynthRow {
            formula: formula.to_string(),
            record: AlloyRecord {
                composition: Composition::parse(formula)?,
                label: PhaseLabel::from_bool(*sp),
            },
            family: Family::Reference,
            p_single_phase: if *sp { 1.0 } else { 0.0 },
        });
    }
    let shares: Vec<f64> = FAMILIES.iter().map(|f| f.share).collect();
    let share_total: f64 = shares.iter().sum();
    while rows.len() < config.n_rows {
        let mut u = rng.random::<f64>() * share_total;
        let spec = FAMILIES
            .iter()
            .find(|f| {
                u -= f.share;
                u < 0.0
            })
            .unwrap_or(&FAMILIES[0]);
        let mut pick = rng.random::<f64>();
        let n = spec
            .sizes
            .iter()
            .find(|(_, w)| {
                pick -= w;
                pick < 0.0
            })
            .map_or(spec.sizes[0].0, |s| s.0);
        let idx = sample_weighted(
            &mut rng,
            spec.pool.len(),
            |i| {
                let k = vocab
                    .index_of(spec.pool[i].0)
                    .expect("pool symbols are in the vocabulary");
                spec.pool[i].1 * ((quota[k] - used[k]).max(0.0) + 0.05) / quota[k]
            },
            n,
        )
        .expect("positive weights");
        let mut syms: Vec<&str> = idx.iter().map(|i| spec.pool[i].0).collect();
        syms.sort_by_key(|s| vocab.index_of(s));
        for s in &syms {
            used[vocab
                .index_of(s)
                .expect("pool symbols are in the vocabulary")] += 1.0;
        }
        let amounts = draw_amounts(&mut rng, n);
        let formula: String = syms
            .iter()
            .zip(&amounts)
            .map(|(s, a)| format!("{s}{}", format_amount(*a)))
            .collect();
        let composition = Composition::parse(&formula)?;
        let f = engineered_features(table, &composition)?;
        let p = sigmoid(config.sharpness * rule_logit(&f));
        let label = PhaseLabel::from_bool(rng.random::<f64>() < p);
        rows.push(SynthRow {
            formula,
            record: AlloyRecord { composition, label },
            family: spec.family,
            p_single_phase: p,
        });
    }
    Ok(rows)
}

/// `formula,label` CSV.
pub fn to_csv(rows: &[SynthRow]) -> String {
    let mut out = String::from("formula,label\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.formula, u8::from(r.record.label)));
    }
    out
}
