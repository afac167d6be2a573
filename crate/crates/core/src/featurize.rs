//! The fixed composition → eight-descriptor transformation and the
//! train-set standardizer that conditions the classifier input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::{Composition, ElementProps, ElementTable};

/// Gas constant in J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314;

pub const N_FEATURES: usize = 8;

/// Feature names in array order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "k",
    "v_m",
    "t_m",
    "vec",
    "delta",
    "delta_chi",
    "ds_mix",
    "dh_mix",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("no property entry for element `{0}`")]
    MissingElementProperty(String),
    #[error("no mixing enthalpy for pair {0}-{1}")]
    MissingPairEnthalpy(String, String),
    #[error("cannot fit a scaler on an empty feature list")]
    EmptyFeatureList,
}

/// Physical descriptors of an alloy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector8 {
    /// Bulk modulus, GPa.
    pub k: f64,
    /// Molar volume, cm³/mol.
    pub v_m: f64,
    /// Melting temperature, K.
    pub t_m: f64,
    /// Valence electron concentration.
    pub vec: f64,
    /// Atomic size difference as a fraction (not percent).
    pub delta: f64,
    /// Pauling electronegativity difference.
    pub delta_chi: f64,
    /// Mixing entropy, J/(mol·K).
    pub ds_mix: f64,
    /// Mixing enthalpy, kJ/mol.
    pub dh_mix: f64,
}

impl FeatureVector8 {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.k,
            self.v_m,
            self.t_m,
            self.vec,
            self.delta,
            self.delta_chi,
            self.ds_mix,
            self.dh_mix,
        ]
    }

    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        Self {
            k: a[0],
            v_m: a[1],
            t_m: a[2],
            vec: a[3],
            delta: a[4],
            delta_chi: a[5],
            ds_mix: a[6],
            dh_mix: a[7],
        }
    }
}

/// Computes the eight descriptors with the usual rule-of-mixtures
/// definitions: weighted means for k, V_m, T_m and VEC; RMS deviations for δ
/// and Δχ; ideal mixing entropy; regular-solution mixing enthalpy.
pub fn engineered_features(
    table: &ElementTable,
    c: &Composition,
) -> Result<FeatureVector8, FeatureError> {
    let parts: Vec<(&ElementProps, f64)> = c
        .entries()
        .map(|(s, f)| {
            table
                .props(s)
                .map(|p| (p, f))
                .ok_or_else(|| FeatureError::MissingElementProperty(s.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mean = |g: fn(&ElementProps) -> f64| parts.iter().map(|(p, f)| f * g(p)).sum::<f64>();
    let k = mean(|p| p.bulk_modulus);
    let v_m = mean(|p| p.molar_volume);
    let t_m = mean(|p| p.melting_t);
    let vec = mean(|p| p.vec);
    let r_bar = mean(|p| p.atomic_radius);
    let chi_bar = mean(|p| p.electronegativity);

    let delta = parts
        .iter()
        .map(|(p, f)| f * (1.0 - p.atomic_radius / r_bar).powi(2))
        .sum::<f64>()
        .sqrt();
    let delta_chi = parts
        .iter()
        .map(|(p, f)| f * (p.electronegativity - chi_bar).powi(2))
        .sum::<f64>()
        .sqrt();
    // 0·ln 0 = 0: only non-zero fractions are present in `parts`.
    let ds_mix = -GAS_CONSTANT * parts.iter().map(|(_, f)| f * f.ln()).sum::<f64>();

    let mut dh_mix = 0.0;
    for (i, (pi, fi)) in parts.iter().enumerate() {
        for (pj, fj) in &parts[i + 1..] {
            let omega = table.pairs().get(&pi.symbol, &pj.symbol).ok_or_else(|| {
                FeatureError::MissingPairEnthalpy(pi.symbol.clone(), pj.symbol.clone())
            })?;
            dh_mix += 4.0 * omega * fi * fj;
        }
    }

    Ok(FeatureVector8 {
        k,
        v_m,
        t_m,
        vec,
        delta,
        delta_chi,
        ds_mix: ds_mix.max(0.0),
        dh_mix,
    })
}

/// Per-feature mean and standard deviation fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
}

impl FeatureScaler {
    /// Population statistics. A feature with zero variance (or a single
    /// sample) gets std 1.
    pub fn fit(features: &[FeatureVector8]) -> Result<Self, FeatureError> {
        if features.is_empty() {
            return Err(FeatureError::EmptyFeatureList);
        }
        let n = features.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        for f in features {
            for (m, x) in mean.iter_mut().zip(f.to_array()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; N_FEATURES];
        for f in features {
            for ((v, x), m) in var.iter_mut().zip(f.to_array()).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let std = var.map(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 && s.is_finite() {
                s
            } else {
                1.0
            }
        });
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self {
            mean: [0.0; N_FEATURES],
            std: [1.0; N_FEATURES],
        }
    }

    pub fn apply(&self, f: &FeatureVector8) -> [f64; N_FEATURES] {
        let a = f.to_array();
        std::array::from_fn(|i| (a[i] - self.mean[i]) / self.std[i])
    }

    pub fn invert(&self, z: &[f64; N_FEATURES]) -> FeatureVector8 {
        FeatureVector8::from_array(std::array::from_fn(|i| z[i] * self.std[i] + self.mean[i]))
    }
}
