use hea_dvae::featurize::FEATURE_NAMES;
use hea_dvae::{engineered_features, Composition, ElementTable, FeatureVector8};
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    formula: String,
    features: FeatureVector8,
}

#[test]
fn features_match_the_python_oracle() {
    let text = include_str!("../../../data/featurize_golden.json");
    let cases: Vec<Golden> = serde_json::from_str(text).unwrap();
    assert!(cases.iter().any(|c| c.formula == "Fe20Ni20Co20Ti20Cu20"));
    for case in cases {
        let c = Composition::parse(&case.formula).unwrap();
        let got = engineered_features(ElementTable::bundled(), &c)
            .unwrap()
            .to_array();
        let want = case.features.to_array();
        for ((g, w), name) in got.iter().zip(&want).zip(FEATURE_NAMES) {
            assert!(
                (g - w).abs() <= 1e-9 * w.abs().max(1.0),
                "{} {name}: {g} vs {w}",
                case.formula
            );
        }
    }
}
