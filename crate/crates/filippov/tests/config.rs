use filippov::config::{AnalysisConfig, ConfigFileError, OutputSpec};
use filippov_core::Tolerances;
use proptest::prelude::*;

const EXPLICIT: &str = r#"
[system]
name = "sliding-node"
f = "z"
x = "( x , y , -1 )"
y = "(0,0,1)"

[domain]
min = [-1, -1, -1]
max = [1, 1, 1]
"#;

#[test]
fn catalog_and_explicit_forms_share_a_digest() {
    let a = AnalysisConfig::catalog("sliding-node");
    let b = AnalysisConfig::parse(EXPLICIT).unwrap();
    assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    assert_eq!(a.canonical().unwrap(), b.canonical().unwrap());
}

#[test]
fn output_location_is_not_part_of_the_digest() {
    let a = AnalysisConfig::catalog("sliding-node");
    let mut b = a.clone();
    b.output = OutputSpec { dir: Some("elsewhere".into()) };
    assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    assert_ne!(a.canonical().unwrap(), b.canonical().unwrap());
}

#[test]
fn changed_expression_changes_the_digest() {
    let a = AnalysisConfig::parse(EXPLICIT).unwrap();
    let b = AnalysisConfig::parse(&EXPLICIT.replace("-1 )", "-2 )")).unwrap();
    assert_ne!(a.digest().unwrap(), b.digest().unwrap());
}

#[test]
fn malformed_configs_are_rejected() {
    let cases = [
        ("[system]\ncatalog = \"nope\"\n", "unknown catalog"),
        ("[system]\nf = \"z\"\n", "needs either"),
        ("[system]\ncatalog = \"cusp\"\nf = \"z\"\n", "mixes"),
        ("[system]\nf = \"z\"\nx = \"(1,0,0)\"\ny = \"(0,0,1)\"\n", "needs a [domain]"),
        ("[system]\ncatalog = \"cusp\"\n[tolerances]\ntau = -1.0\n", "tolerances"),
        ("[system]\ncatalog = \"cusp\"\n[tolerances]\ntua = 1.0\n", "unknown field"),
        ("[system]\ncatalog = \"cusp\"\n[domain]\nmin = [0,0,0]\nmax = [1,0,1]\n", "degenerate"),
        ("[system]\nf = \"z\"\nx = \"(1,0\"\ny = \"(0,0,1)\"\n[domain]\nmin = [0,0,0]\nmax = [1,1,1]\n", "system"),
        ("[system]\ncatalog = \"cusp\"\n[integrate]\nstarts = [[0,0,0.5]]\nhorizon = 0\n", "horizon"),
    ];
    for (text, needle) in cases {
        let err = AnalysisConfig::parse(text).and_then(|c| c.resolve()).unwrap_err();
        assert!(err.to_string().to_lowercase().contains(needle), "{text:?}: {err}");
    }
}

#[test]
fn tolerance_overrides() {
    let mut c = AnalysisConfig::catalog("cusp");
    c.set_tolerance("theta_min=2e-4").unwrap();
    assert_eq!(c.tolerances.theta_min, 2e-4);
    for bad in ["theta_min", "theta_min=x", "theta_min=0", "nope=1"] {
        assert!(matches!(c.set_tolerance(bad), Err(ConfigFileError::Override(_))), "{bad}");
    }
}

fn positive() -> impl Strategy<Value = f64> {
    (-12.0..2.0f64).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn canonical_text_round_trips(vals in proptest::collection::vec(positive(), 10), mesh in 2usize..64, seed in any::<u32>()) {
        let mut c = AnalysisConfig::catalog("sphere-two-foldfold");
        for (k, v) in Tolerances::KEYS.iter().zip(&vals) {
            c.tolerances.set(k, *v).unwrap();
        }
        c.resolution.mesh = mesh;
        c.effort.seed = seed as u64;
        let text = c.canonical().unwrap();
        let back = AnalysisConfig::parse(&text).unwrap();
        prop_assert_eq!(back.canonical().unwrap(), text);
        prop_assert_eq!(back.resolve().unwrap(), c.resolve().unwrap());
        prop_assert_eq!(back.digest().unwrap(), c.digest().unwrap());
    }

    #[test]
    fn every_tolerance_is_part_of_the_digest(k in 0usize..10, v in positive()) {
        let base = AnalysisConfig::catalog("cusp");
        let key = Tolerances::KEYS[k];
        let mut changed = base.clone();
        changed.tolerances.set(key, v).unwrap();
        let same = changed.tolerances == base.tolerances;
        prop_assert_eq!(same, base.digest().unwrap() == changed.digest().unwrap());
    }
}
