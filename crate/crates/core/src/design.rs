//! Inverse design on top of a trained model: screening, conditional
//! generation, the iterative inversion loop, grid studies and latent maps.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dvae::{DvaeError, DvaeModel, LatentPoint, PhaseLabel};
use crate::elements::{Composition, ElementError, Vocabulary};
use crate::kde::{gaussian_kde_grid, DensityGrid, KdeError};
use crate::par;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("no input records")]
    EmptyInput,
    #[error("group `{name}` has {size} elements; at least 4 are needed")]
    GroupTooSmall { name: String, size: usize },
    #[error("this operation needs a 2-dimensional latent space, model has {0}")]
    NotTwoDimensional(usize),
    #[error("invalid grid axis `{0}` (expected start:end:count with count >= 2)")]
    BadAxis(String),
    #[error("max_iters must be at least 1")]
    ZeroIterations,
    #[error(transparent)]
    Model(#[from] DvaeError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Density(#[from] KdeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenHit {
    pub formula: String,
    pub composition: Composition,
    pub probability: f64,
}

/// Candidates with `classify ≥ cutoff`, highest probability first; ties
/// keep input order.
pub fn screen(
    model: &DvaeModel,
    candidates: &[Composition],
    cutoff: f64,
) -> Result<Vec<ScreenHit>, DesignError> {
    let probs = model.classify_batch(candidates)?;
    let mut hits: Vec<ScreenHit> = candidates
        .iter()
        .zip(probs)
        .filter(|(_, p)| *p >= cutoff)
        .map(|(c, p)| ScreenHit {
            formula: c.format_standard(),
            composition: *c,
            probability: p,
        })
        .collect();
    hits.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(hits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub z: LatentPoint,
    pub target_p: f64,
    pub formula: String,
    pub composition: Composition,
    pub recheck_p: f64,
    /// The recheck lands on the same side of 0.5 as the target.
    pub consistent: bool,
}

/// Decodes `z` at `target_p` and re-classifies the result.
pub fn generate(
    model: &DvaeModel,
    z: &LatentPoint,
    target_p: f64,
) -> Result<Generated, DesignError> {
    let composition = model.decode_composition(z, target_p)?;
    let recheck_p = model.classify(&composition)?;
    Ok(Generated {
        z: z.clone(),
        target_p,
        formula: composition.format_standard(),
        composition,
        recheck_p,
        consistent: PhaseLabel::from_probability(recheck_p)
            == PhaseLabel::from_probability(target_p),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignStep {
    pub formula: String,
    pub alloy: Composition,
    pub probability: f64,
    /// Posterior mean of the alloy encoded at `probability`.
    pub latent: LatentPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTrace {
    pub steps: Vec<DesignStep>,
    pub converged: bool,
    pub cutoff: f64,
}

impl DesignTrace {
    pub fn last(&self) -> &DesignStep {
        self.steps.last().expect("trace is nonempty")
    }

    /// `Fe14Ni16Cr22Co14Al22Cu8 (y=0.12, z=(0.10, -0.40)) -> ...`
    pub fn chain(&self) -> String {
        self.steps
            .iter()
            .map(|s| {
                let z: Vec<String> = s
                    .latent
                    .coords()
                    .iter()
                    .map(|v| format!("{v:.2}"))
                    .collect();
                format!(
                    "{} (y={:.2}, z=({}))",
                    s.formula,
                    s.probability,
                    z.join(", ")
                )
            })
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

/// Classify; stop once `p > cutoff`; otherwise encode at `p` and decode the
/// mean at `1 - p`. At most `max_iters` decode steps are taken, so the trace
/// holds at most `max_iters + 1` steps.
pub fn invert(
    model: &DvaeModel,
    start: &Composition,
    cutoff: f64,
    max_iters: usize,
) -> Result<DesignTrace, DesignError> {
    if max_iters == 0 {
        return Err(DesignError::ZeroIterations);
    }
    let mut alloy = *start;
    let mut steps = Vec::new();
    for iter in 0..=max_iters {
        let p = model.classify(&alloy)?;
        let (mu, _) = model.encode(&alloy, p)?;
        steps.push(DesignStep {
            formula: alloy.format_standard(),
            alloy,
            probability: p,
            latent: mu.clone(),
        });
        if p > cutoff {
            return Ok(DesignTrace {
                steps,
                converged: true,
                cutoff,
            });
        }
        if iter == max_iters {
            break;
        }
        alloy = model.decode_composition(&mu, 1.0 - p)?;
    }
    Ok(DesignTrace {
        steps,
        converged: false,
        cutoff,
    })
}

/// Inclusive linear axis `start:end:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.end
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }
}

impl FromStr for GridAxis {
    type Err = DesignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DesignError::BadAxis(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = a.trim().parse().map_err(|_| bad())?;
        let end: f64 = b.trim().parse().map_err(|_| bad())?;
        let count: usize = n.trim().parse().map_err(|_| bad())?;
        if count < 2 || !start.is_finite() || !end.is_finite() {
            return Err(bad());
        }
        Ok(Self { start, end, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub z1: f64,
    pub z2: f64,
    pub target_p: f64,
    pub formula: String,
    pub recheck_p: f64,
}

/// [`generate`] at every `(z1, z2, target)`; z1 outermost, target innermost.
pub fn grid_study(
    model: &DvaeModel,
    z1: &GridAxis,
    z2: &GridAxis,
    targets: &[f64],
) -> Result<Vec<GridRow>, DesignError> {
    if model.latent_dim() != 2 {
        return Err(DesignError::NotTwoDimensional(model.latent_dim()));
    }
    let mut cells = Vec::new();
    for a in z1.values() {
        for b in z2.values() {
            for t in targets {
                cells.push((a, b, *t));
            }
        }
    }
    par::try_map(&cells, |&(a, b, t)| {
        let g = generate(model, &LatentPoint(vec![a, b]), t)?;
        Ok(GridRow {
            z1: a,
            z2: b,
            target_p: t,
            formula: g.formula,
            recheck_p: g.recheck_p,
        })
    })
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::from("z1,z2,target_p,alloy_formula,recheck_p\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.z1, r.z2, r.target_p, r.formula, r.recheck_p
        ));
    }
    out
}

/// An alloy to place on the latent map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapInput {
    pub composition: Composition,
    pub label: Option<PhaseLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub formula: String,
    pub z: LatentPoint,
    pub probability: f64,
    pub label: Option<PhaseLabel>,
    pub element_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMap {
    pub points: Vec<MapPoint>,
    pub density: DensityGrid,
}

impl LatentMap {
    /// Fraction of points inside the axis-aligned box.
    pub fn fraction_inside(&self, z1: (f64, f64), z2: (f64, f64)) -> f64 {
        let inside = self
            .points
            .iter()
            .filter(|p| {
                let c = p.z.coords();
                (z1.0..=z1.1).contains(&c[0]) && (z2.0..=z2.1).contains(&c[1])
            })
            .count();
        inside as f64 / self.points.len() as f64
    }
}

pub const DEFAULT_DENSITY_GRID: usize = 80;

/// Posterior means at the predicted probability plus a density estimate.
pub fn latent_map(
    model: &DvaeModel,
    records: &[MapInput],
    grid: usize,
) -> Result<LatentMap, DesignError> {
    if records.is_empty() {
        return Err(DesignError::EmptyInput);
    }
    if model.latent_dim() != 2 {
        return Err(DesignError::NotTwoDimensional(model.latent_dim()));
    }
    let points = par::try_map(records, |r| -> Result<MapPoint, DesignError> {
        let p = model.classify(&r.composition)?;
        let (mu, _) = model.encode(&r.composition, p)?;
        Ok(MapPoint {
            formula: r.composition.format_standard(),
            z: mu,
            probability: p,
            label: r.label,
            element_count: r.composition.element_count(),
        })
    })?;
    let xy: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [p.z.coords()[0], p.z.coords()[1]])
        .collect();
    let density = gaussian_kde_grid(&xy, grid)?;
    Ok(LatentMap { points, density })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementGroup {
    pub name: String,
    pub elements: Vec<String>,
}

impl ElementGroup {
    pub fn new(name: &str, elements: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            elements: elements.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Noble, refractory and magnetic groups drawn from the vocabulary.
    pub fn defaults() -> Vec<Self> {
        vec![
            Self::new("noble", &["Cu", "Ru", "Pd", "Ag", "Pt"]),
            Self::new(
                "refractory",
                &["Ti", "V", "Nb", "Mo", "Ta", "W", "Zr", "Hf"],
            ),
            Self::new("magnetic", &["Fe", "Ni", "Co", "Mn", "Cr"]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCloud {
    pub name: String,
    pub alloys: Vec<MapPoint>,
}

/// Every equimolar 4-element alloy from each group, encoded at its
/// predicted probability.
pub fn group_probe(
    model: &DvaeModel,
    groups: &[ElementGroup],
) -> Result<Vec<GroupCloud>, DesignError> {
    let vocab = Vocabulary::global();
    let mut clouds = Vec::with_capacity(groups.len());
    for g in groups {
        if g.elements.len() < 4 {
            return Err(DesignError::GroupTooSmall {
                name: g.name.clone(),
                size: g.elements.len(),
            });
        }
        if let Some(bad) = g.elements.iter().find(|e| vocab.index_of(e).is_none()) {
            return Err(ElementError::UnknownElement(bad.clone()).into());
        }
        let mut comps = Vec::new();
        for combo in combinations(g.elements.len(), 4) {
            let syms: Vec<&str> = combo.iter().map(|&i| g.elements[i].as_str()).collect();
            comps.push(MapInput {
                composition: Composition::equimolar(&syms)?,
                label: None,
            });
        }
        let alloys = par::try_map(&comps, |r| -> Result<MapPoint, DesignError> {
            let p = model.classify(&r.composition)?;
            let (mu, _) = model.encode(&r.composition, p)?;
            Ok(MapPoint {
                formula: r.composition.format_standard(),
                z: mu,
                probability: p,
                label: None,
                element_count: 4,
            })
        })?;
        clouds.push(GroupCloud {
            name: g.name.clone(),
            alloys,
        });
    }
    Ok(clouds)
}

/// Index `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Convex hull, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &pt in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0
            {
                hull.pop();
            }
            hull.push(pt);
        }
        hull.pop();
    }
    hull
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Intersection of two counter-clockwise convex polygons.
fn clip(subject: &[[f64; 2]], clipper: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    let n = clipper.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clipper[i], clipper[(i + 1) % n]);
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

/// Area of the hull intersection over the smaller hull's area. Degenerate
/// hulls (fewer than three distinct points) overlap nothing.
pub fn hull_overlap_fraction(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (ha, hb) = (convex_hull(a), convex_hull(b));
    let smaller = polygon_area(&ha).min(polygon_area(&hb));
    if ha.len() < 3 || hb.len() < 3 || smaller <= 0.0 {
        return 0.0;
    }
    polygon_area(&clip(&ha, &hb)) / smaller
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvae::DvaeConfig;
    use crate::elements::{ElementTable, VOCAB_SIZE};
    use crate::featurize::FeatureScaler;
    use crate::nncore::{seeded_rng, Activation, DenseNet};

    fn random_model(seed: u64) -> DvaeModel {
        DvaeModel::init(
            DvaeConfig {
                hidden: vec![12, 12],
                ..DvaeConfig::default()
            },
            FeatureScaler::identity(),
            0.5,
            ElementTable::bundled().clone(),
            &mut seeded_rng(seed),
        )
        .unwrap()
    }

    fn c(f: &str) -> Composition {
        Composition::parse(f).unwrap()
    }

    /// Hand-computable model without hidden layers: classifier logit
    /// `w·VEC + b`, encoder `μ = (φ, 0)` with `log σ² = 0`, decoder logits
    /// Fe 0, Ni `40φ - 20`, everything else -40.
    fn fixed_model(w: f64, b: f64) -> DvaeModel {
        let config = DvaeConfig {
            hidden: vec![],
            ..DvaeConfig::default()
        };
        let mut m = DvaeModel::init(
            config,
            FeatureScaler::identity(),
            0.5,
            ElementTable::bundled().clone(),
            &mut seeded_rng(0),
        )
        .unwrap();
        // Classifier: logit = w·VEC + b; Fe has VEC 8, Ni has VEC 10.
        let vec_idx = 3;
        m.classifier = DenseNet::zeros(&[8, 1], &[Activation::Identity]);
        {
            let (wt, bias) = m.classifier.layer_mut(0);
            wt[vec_idx] = w;
            bias[0] = b;
        }
        m.encoder = DenseNet::zeros(&[VOCAB_SIZE + 1, 4], &[Activation::Identity]);
        {
            let (wt, _) = m.encoder.layer_mut(0);
            // Row VOCAB_SIZE (the φ input) → output 0 (μ1).
            wt[VOCAB_SIZE * 4] = 1.0;
        }
        m.decoder = DenseNet::zeros(&[3, VOCAB_SIZE], &[Activation::Identity]);
        {
            let vocab = Vocabulary::global();
            let (fe, ni) = (vocab.index_of("Fe").unwrap(), vocab.index_of("Ni").unwrap());
            let (wt, bias) = m.decoder.layer_mut(0);
            for j in 0..VOCAB_SIZE {
                bias[j] = -40.0;
            }
            bias[fe] = 0.0;
            bias[ni] = -20.0;
            wt[ni] = 40.0; // φ input row 0
        }
        m
    }

    #[test]
    fn hand_computed_inversion_chain() {
        // logit = 2 (VEC - 9): Fe → σ(-2) ≈ 0.119, Ni → σ(2) ≈ 0.881.
        let m = fixed_model(2.0, -18.0);
        let p_fe = 1.0 / (1.0 + 2f64.exp());
        assert!((m.classify(&c("Fe")).unwrap() - p_fe).abs() < 1e-12);
        // Decoding at 1 - p_fe ≈ 0.881: Ni logit = 40·0.881 - 20 ≈ 15.2 vs Fe 0.
        let t = invert(&m, &c("Fe"), 0.6, 5).unwrap();
        assert_eq!(t.steps.len(), 2);
        assert!(t.converged);
        assert_eq!(t.steps[0].formula, "Fe100");
        assert_eq!(t.steps[1].formula, "Ni99");
        assert!((t.steps[0].latent.coords()[0] - p_fe).abs() < 1e-12);
        assert!(t.last().probability > 0.6);
        assert_eq!(t.steps[0].latent.coords()[1], 0.0);
    }

    #[test]
    fn inversion_that_never_converges_is_bounded() {
        // Every alloy gets p = σ(-3); decoding at 1 - p lands on Ni, which is
        // still below the cutoff.
        let m = fixed_model(0.0, -3.0);
        for max_iters in 1..5 {
            let t = invert(&m, &c("Fe"), 0.6, max_iters).unwrap();
            assert!(!t.converged);
            assert_eq!(t.steps.len(), max_iters + 1);
            for w in t.steps.windows(2) {
                // Next alloy is the decode at 1 - p of the previous step.
                let expected = m
                    .decode_composition(&w[0].latent, 1.0 - w[0].probability)
                    .unwrap();
                assert_eq!(w[1].alloy, expected);
            }
        }
        assert!(matches!(
            invert(&m, &c("Fe"), 0.6, 0),
            Err(DesignError::ZeroIterations)
        ));
    }

    #[test]
    fn start_above_cutoff_is_a_single_step() {
        let m = fixed_model(0.0, 3.0);
        let t = invert(&m, &c("CoCrFeNi"), 0.6, 10).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert!(t.converged);
        assert!(t.chain().starts_with("Fe25Ni25Cr25Co25 (y=0.95"));
    }

    #[test]
    fn screen_orders_and_filters() {
        let m = random_model(4);
        assert!(screen(&m, &[], 0.5).unwrap().is_empty());
        let comps: Vec<Composition> = ["NbMoTaW", "CoCrFeNi", "AlCoCrFeNi", "CuNi", "Al"]
            .iter()
            .map(|f| c(f))
            .collect();
        let all = screen(&m, &comps, 0.0).unwrap();
        assert_eq!(all.len(), comps.len());
        assert!(all.windows(2).all(|w| w[0].probability >= w[1].probability));
        let mid = all[2].probability;
        assert!(screen(&m, &comps, mid)
            .unwrap()
            .iter()
            .all(|h| h.probability >= mid));
    }

    #[test]
    fn generate_rechecks_by_construction() {
        let m = random_model(6);
        let z = LatentPoint(vec![0.0, -0.8]);
        let g = generate(&m, &z, 0.9).unwrap();
        let direct = m
            .classify(&Composition::from_vector(&m.decode(&z, 0.9).unwrap()).unwrap())
            .unwrap();
        assert_eq!(g.recheck_p, direct);
        assert_eq!(g, generate(&m, &z, 0.9).unwrap());
        assert_eq!(g.consistent, g.recheck_p >= 0.5);
    }

    #[test]
    fn grid_cardinality_and_csv() {
        let m = random_model(2);
        let z1: GridAxis = "-0.1:0.1:3".parse().unwrap();
        let z2: GridAxis = "-0.5:-0.3:3".parse().unwrap();
        let rows = grid_study(&m, &z1, &z2, &[0.0, 1.0]).unwrap();
        assert_eq!(rows.len(), 18);
        assert_eq!(grid_csv(&rows).lines().count(), 19);
        assert_eq!(z1.values(), vec![-0.1, 0.0, 0.1]);
        assert!("1:2".parse::<GridAxis>().is_err());
        assert!("1:2:1".parse::<GridAxis>().is_err());
        assert!("a:2:3".parse::<GridAxis>().is_err());
    }

    #[test]
    fn latent_map_contract() {
        let m = random_model(3);
        assert!(matches!(
            latent_map(&m, &[], 20),
            Err(DesignError::EmptyInput)
        ));
        let recs: Vec<MapInput> = ["NbMoTaW", "CoCrFeNi", "AlCuNi"]
            .iter()
            .map(|f| MapInput {
                composition: c(f),
                label: Some(PhaseLabel::SinglePhase),
            })
            .collect();
        let map = latent_map(&m, &recs, 40).unwrap();
        assert_eq!(map.points.len(), 3);
        assert_eq!(map.points[2].element_count, 3);
        assert!((map.density.total_mass() - 1.0).abs() < 0.02);
    }

    #[test]
    fn group_probe_counts() {
        let m = random_model(1);
        let clouds = group_probe(
            &m,
            &[
                ElementGroup::new("four", &["Nb", "Mo", "Ta", "W"]),
                ElementGroup::new("six", &["Ti", "V", "Nb", "Mo", "Ta", "W"]),
            ],
        )
        .unwrap();
        assert_eq!(clouds[0].alloys.len(), 1);
        assert_eq!(clouds[1].alloys.len(), 15);
        assert!(matches!(
            group_probe(&m, &[ElementGroup::new("tiny", &["Fe", "Ni", "Co"])]),
            Err(DesignError::GroupTooSmall { size: 3, .. })
        ));
        assert!(group_probe(&m, &[ElementGroup::new("bad", &["Fe", "Ni", "Co", "Xx"])]).is_err());
    }

    #[test]
    fn hull_geometry() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        assert_eq!(convex_hull(&sq).len(), 4);
        assert!((polygon_area(&convex_hull(&sq)) - 1.0).abs() < 1e-12);
        let shifted: Vec<[f64; 2]> = sq.iter().map(|p| [p[0] + 0.5, p[1]]).collect();
        assert!((hull_overlap_fraction(&sq, &shifted) - 0.5).abs() < 1e-12);
        let far: Vec<[f64; 2]> = sq.iter().map(|p| [p[0] + 5.0, p[1]]).collect();
        assert_eq!(hull_overlap_fraction(&sq, &far), 0.0);
        assert_eq!(combinations(6, 4).len(), 15);
    }
}
