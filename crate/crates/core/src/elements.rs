//! Element property tables, the frozen 30-element vocabulary, and
//! compositions over that vocabulary.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Number of elements in the composition vocabulary.
pub const VOCAB_SIZE: usize = 30;

const VOCABULARY_CSV: &str = include_str!("../../../data/vocabulary.csv");
const ELEMENTS_CSV: &str = include_str!("../../../data/elements.csv");
const PAIR_ENTHALPY_CSV: &str = include_str!("../../../data/pair_enthalpy.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("empty formula")]
    EmptyFormula,
    #[error("malformed token `{0}`")]
    MalformedToken(String),
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("composition vector sums to zero")]
    ZeroSum,
    #[error("expected {expected} entries, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("table error: {0}")]
    Table(String),
}

/// The ordered element vocabulary. Index order is the canonical order used
/// for vectors and for formatting formulas.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    symbols: Vec<String>,
    atomic_numbers: Vec<u32>,
    index: HashMap<String, usize>,
}

static VOCABULARY: LazyLock<Vocabulary> =
    LazyLock::new(|| Vocabulary::from_csv(VOCABULARY_CSV).expect("bundled vocabulary is valid"));

impl Vocabulary {
    /// The bundled, frozen vocabulary.
    pub fn global() -> &'static Vocabulary {
        &VOCABULARY
    }

    fn from_csv(text: &str) -> Result<Self, ElementError> {
        #[derive(Deserialize)]
        struct Row {
            rank: usize,
            symbol: String,
            atomic_number: u32,
        }
        let mut rows: Vec<Row> = csv_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| ElementError::Table(e.to_string()))?;
        rows.sort_by_key(|r| r.rank);
        if rows.len() != VOCAB_SIZE || rows.iter().enumerate().any(|(i, r)| r.rank != i) {
            return Err(ElementError::Table(format!(
                "vocabulary must list ranks 0..{VOCAB_SIZE}"
            )));
        }
        let symbols: Vec<String> = rows.iter().map(|r| r.symbol.clone()).collect();
        let index: HashMap<_, _> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        if index.len() != VOCAB_SIZE {
            return Err(ElementError::Table("duplicate vocabulary symbol".into()));
        }
        Ok(Self {
            symbols,
            atomic_numbers: rows.iter().map(|r| r.atomic_number).collect(),
            index,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn atomic_number(&self, i: usize) -> u32 {
        self.atomic_numbers[i]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Hex SHA-256 over the ordered symbol list. Stored in checkpoints.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.symbols {
            h.update(s.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }
}

/// Ranks elements by descending occurrence count, ties broken by ascending
/// atomic number, and returns the top `k` symbols.
pub fn rank_by_frequency(
    counts: &HashMap<String, usize>,
    atomic_number: impl Fn(&str) -> u32,
    k: usize,
) -> Vec<String> {
    let mut items: Vec<(&String, usize)> = counts.iter().map(|(s, c)| (s, *c)).collect();
    items.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| atomic_number(a.0).cmp(&atomic_number(b.0)))
    });
    items.into_iter().take(k).map(|(s, _)| s.clone()).collect()
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_reader<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementProps {
    pub symbol: String,
    /// pm
    pub atomic_radius: f64,
    pub vec: f64,
    /// Pauling scale
    pub electronegativity: f64,
    /// K
    pub melting_t: f64,
    /// GPa
    pub bulk_modulus: f64,
    /// cm³/mol
    pub molar_volume: f64,
}

/// Symmetric binary mixing-enthalpy parameters Ω_ij in kJ/mol.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(
    into = "Vec<(String, String, f64)>",
    try_from = "Vec<(String, String, f64)>"
)]
pub struct PairEnthalpyTable {
    entries: BTreeMap<(String, String), f64>,
}

impl PairEnthalpyTable {
    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    /// Inserts Ω for an unordered pair. Conflicting duplicates are rejected.
    pub fn insert(&mut self, a: &str, b: &str, omega: f64) -> Result<(), ElementError> {
        if a == b {
            if omega != 0.0 {
                return Err(ElementError::Table(format!("Ω({a},{a}) must be 0")));
            }
            return Ok(());
        }
        if !omega.is_finite() {
            return Err(ElementError::Table(format!("non-finite Ω({a},{b})")));
        }
        let key = Self::key(a, b);
        match self.entries.get(&key) {
            Some(&old) if old != omega => Err(ElementError::Table(format!(
                "asymmetric Ω({a},{b}): {old} vs {omega}"
            ))),
            _ => {
                self.entries.insert(key, omega);
                Ok(())
            }
        }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            return Some(0.0);
        }
        self.entries.get(&Self::key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_csv_reader<R: std::io::Read>(r: R) -> Result<Self, ElementError> {
        #[derive(Deserialize)]
        struct Row {
            symbol_a: String,
            symbol_b: String,
            omega_kj_mol: f64,
        }
        let mut table = Self::default();
        for row in csv_reader(r).deserialize::<Row>() {
            let row = row.map_err(|e| ElementError::Table(e.to_string()))?;
            table.insert(&row.symbol_a, &row.symbol_b, row.omega_kj_mol)?;
        }
        Ok(table)
    }
}

impl From<PairEnthalpyTable> for Vec<(String, String, f64)> {
    fn from(t: PairEnthalpyTable) -> Self {
        t.entries.into_iter().map(|((a, b), v)| (a, b, v)).collect()
    }
}

impl TryFrom<Vec<(String, String, f64)>> for PairEnthalpyTable {
    type Error = ElementError;
    fn try_from(rows: Vec<(String, String, f64)>) -> Result<Self, Self::Error> {
        let mut t = Self::default();
        for (a, b, v) in rows {
            t.insert(&a, &b, v)?;
        }
        Ok(t)
    }
}

/// Element properties plus pair enthalpies: everything the featurizer reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementTable {
    props: Vec<ElementProps>,
    pairs: PairEnthalpyTable,
}

static BUNDLED_TABLE: LazyLock<ElementTable> = LazyLock::new(|| {
    ElementTable::from_readers(ELEMENTS_CSV.as_bytes(), PAIR_ENTHALPY_CSV.as_bytes())
        .expect("bundled element tables are valid")
});

impl ElementTable {
    pub fn bundled() -> &'static ElementTable {
        &BUNDLED_TABLE
    }

    pub fn from_readers<R1: std::io::Read, R2: std::io::Read>(
        elements: R1,
        pairs: R2,
    ) -> Result<Self, ElementError> {
        let mut props = Vec::new();
        for row in csv_reader(elements).deserialize::<ElementRow>() {
            let row = row.map_err(|e| ElementError::Table(e.to_string()))?;
            props.push(row.into_props()?);
        }
        let mut seen = std::collections::HashSet::new();
        for p in &props {
            if !seen.insert(p.symbol.as_str()) {
                return Err(ElementError::Table(format!(
                    "duplicate symbol {}",
                    p.symbol
                )));
            }
        }
        Ok(Self {
            props,
            pairs: PairEnthalpyTable::from_csv_reader(pairs)?,
        })
    }

    pub fn load(elements: &Path, pairs: &Path) -> Result<Self, ElementError> {
        let open = |p: &Path| {
            std::fs::File::open(p).map_err(|e| ElementError::Table(format!("{}: {e}", p.display())))
        };
        Self::from_readers(open(elements)?, open(pairs)?)
    }

    pub fn props(&self, symbol: &str) -> Option<&ElementProps> {
        self.props.iter().find(|p| p.symbol == symbol)
    }

    pub fn all_props(&self) -> &[ElementProps] {
        &self.props
    }

    pub fn pairs(&self) -> &PairEnthalpyTable {
        &self.pairs
    }

    /// Hex SHA-256 of the serialized table, for provenance in checkpoints.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("table serializes");
        hex(&Sha256::digest(&bytes))
    }
}

#[derive(Deserialize)]
struct ElementRow {
    symbol: String,
    atomic_radius_pm: f64,
    vec: f64,
    electronegativity: f64,
    melting_t_k: f64,
    bulk_modulus_gpa: f64,
    molar_volume_cm3mol: f64,
}

impl ElementRow {
    fn into_props(self) -> Result<ElementProps, ElementError> {
        let values = [
            self.atomic_radius_pm,
            self.vec,
            self.electronegativity,
            self.melting_t_k,
            self.bulk_modulus_gpa,
            self.molar_volume_cm3mol,
        ];
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ElementError::Table(format!(
                "{}: all properties must be strictly positive",
                self.symbol
            )));
        }
        Ok(ElementProps {
            symbol: self.symbol,
            atomic_radius: self.atomic_radius_pm,
            vec: self.vec,
            electronegativity: self.electronegativity,
            melting_t: self.melting_t_k,
            bulk_modulus: self.bulk_modulus_gpa,
            molar_volume: self.molar_volume_cm3mol,
        })
    }
}

/// Mole fractions over the vocabulary, summing to one.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct Composition {
    fractions: [f64; VOCAB_SIZE],
}

impl Composition {
    /// Parses formulas such as `Fe20Ni20Co20Ti20Cu20` or `Al0.5CoCrFeNi`.
    /// A missing subscript counts as 1; repeated elements accumulate.
    pub fn parse(text: &str) -> Result<Self, ElementError> {
        let vocab = Vocabulary::global();
        let chars: Vec<char> = text.trim().chars().collect();
        if chars.is_empty() {
            return Err(ElementError::EmptyFormula);
        }
        let mut amounts = [0.0; VOCAB_SIZE];
        let mut i = 0;
        while i < chars.len() {
            let start = i;
            if !chars[i].is_ascii_uppercase() {
                let end = (i + 1..chars.len())
                    .find(|&j| chars[j].is_ascii_uppercase())
                    .unwrap_or(chars.len());
                return Err(ElementError::MalformedToken(
                    chars[start..end].iter().collect(),
                ));
            }
            i += 1;
            while i < chars.len() && chars[i].is_ascii_lowercase() {
                i += 1;
            }
            let symbol: String = chars[start..i].iter().collect();
            let num_start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let amount = if num_start == i {
                1.0
            } else {
                let digits: String = chars[num_start..i].iter().collect();
                digits
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ElementError::MalformedToken(format!("{symbol}{digits}")))?
            };
            let idx = vocab
                .index_of(&symbol)
                .ok_or_else(|| ElementError::UnknownElement(symbol.clone()))?;
            amounts[idx] += amount;
        }
        let total: f64 = amounts.iter().sum();
        if total <= 0.0 {
            return Err(ElementError::EmptyFormula);
        }
        for a in &mut amounts {
            *a /= total;
        }
        Ok(Self { fractions: amounts })
    }

    /// Builds a composition from a vocabulary-ordered vector, renormalizing
    /// when the sum is not exactly one.
    pub fn from_vector(v: &[f64]) -> Result<Self, ElementError> {
        if v.len() != VOCAB_SIZE {
            return Err(ElementError::WrongLength {
                expected: VOCAB_SIZE,
                got: v.len(),
            });
        }
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
            return Err(ElementError::NegativeEntry { index, value });
        }
        let total: f64 = v.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(ElementError::ZeroSum);
        }
        let mut fractions = [0.0; VOCAB_SIZE];
        fractions.copy_from_slice(v);
        if (total - 1.0).abs() > 1e-12 {
            for f in &mut fractions {
                *f /= total;
            }
        }
        Ok(Self { fractions })
    }

    /// Builds a composition from `(symbol, amount)` pairs, normalizing.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, ElementError> {
        let vocab = Vocabulary::global();
        let mut v = [0.0; VOCAB_SIZE];
        for (s, a) in pairs {
            let i = vocab
                .index_of(s)
                .ok_or_else(|| ElementError::UnknownElement(s.to_string()))?;
            v[i] += a;
        }
        Self::from_vector(&v)
    }

    /// Equimolar alloy of the given elements.
    pub fn equimolar(symbols: &[&str]) -> Result<Self, ElementError> {
        Self::from_pairs(symbols.iter().map(|s| (*s, 1.0)))
    }

    pub fn to_vector(&self) -> [f64; VOCAB_SIZE] {
        self.fractions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.fractions
    }

    pub fn fraction(&self, symbol: &str) -> f64 {
        Vocabulary::global()
            .index_of(symbol)
            .map_or(0.0, |i| self.fractions[i])
    }

    /// Non-zero `(symbol, fraction)` entries in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        let vocab = Vocabulary::global();
        self.fractions
            .iter()
            .enumerate()
            .filter(|(_, f)| **f > 0.0)
            .map(move |(i, f)| (vocab.symbol(i), *f))
    }

    /// Number of elements with non-zero fraction.
    pub fn element_count(&self) -> usize {
        self.fractions.iter().filter(|f| **f > 0.0).count()
    }

    /// Integer at.% formula: subscripts are `trunc(100 * fraction)`, elements
    /// in canonical order, zero subscripts dropped. May sum to less than 100.
    pub fn format_standard(&self) -> String {
        let vocab = Vocabulary::global();
        let mut out = String::new();
        for (i, f) in self.fractions.iter().enumerate() {
            // The epsilon keeps exact percentages such as 0.29 from truncating to 28.
            let n = (100.0 * f + 1e-9).trunc() as u64;
            if n > 0 {
                out.push_str(vocab.symbol(i));
                out.push_str(&n.to_string());
            }
        }
        out
    }

    /// Mean absolute difference between two composition vectors.
    pub fn mae(&self, other: &Composition) -> f64 {
        self.fractions
            .iter()
            .zip(&other.fractions)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / VOCAB_SIZE as f64
    }
}

impl fmt::Debug for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries()).finish()
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format_standard())
    }
}

impl std::str::FromStr for Composition {
    type Err = ElementError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<BTreeMap<String, f64>> for Composition {
    type Error = ElementError;
    fn try_from(map: BTreeMap<String, f64>) -> Result<Self, Self::Error> {
        let vocab = Vocabulary::global();
        let mut v = [0.0; VOCAB_SIZE];
        for (s, f) in map {
            let i = vocab.index_of(&s).ok_or(ElementError::UnknownElement(s))?;
            v[i] = f;
        }
        Self::from_vector(&v)
    }
}

impl From<Composition> for BTreeMap<String, f64> {
    fn from(c: Composition) -> Self {
        c.entries().map(|(s, f)| (s.to_string(), f)).collect()
    }
}
