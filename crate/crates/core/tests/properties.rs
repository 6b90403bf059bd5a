use dissent_core::data::{generate_synthetic, split_dataset, Dataset, SparseVec, Split, SyntheticFamily, SyntheticSpec};
use dissent_core::explain::{explain_instance, explain_linear_native, ExplainerConfig};
use dissent_core::local::shrink_and_flip;
use dissent_core::metrics::{cohens_kappa, global_disagreement, overreliance, verify_disagreement_bound};
use dissent_core::models::{train_linear_svm, train_mlp, Classifier, LinearModel, Model, TrainConfig};
use dissent_core::objectives::{verify_remark2_equivalence, zero_one_objective, DissentKind};
use dissent_core::Rational;
use proptest::prelude::*;

fn spec(family: SyntheticFamily, n: usize, d: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        family,
        n_examples: n,
        n_features: d,
        class_separation: 1.5,
        noise_rate: 0.05,
        seed,
        doc_length: 20,
    }
}

fn labels(len: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0..2u8, len)
}

fn triple(max: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<u8>)> {
    (1..=max).prop_flat_map(|n| (labels(n), labels(n), labels(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn disagreement_bound_is_exact((f, g, y) in triple(300)) {
        let check = verify_disagreement_bound::<Rational>(&f, &g, &y).unwrap();
        prop_assert!(check.holds);
        let recount = |a: &[u8], b: &[u8]| a.iter().zip(b).filter(|(x, z)| x != z).count() as i64;
        let n = y.len() as i64;
        prop_assert_eq!(check.slack, Rational::new(recount(&f, &y) + recount(&g, &y) - recount(&f, &g), n));
    }

    #[test]
    fn remark2_holds_for_random_labelings((y, f, _) in triple(11), num in 0..20i64) {
        let report = verify_remark2_equivalence(&y, &f, Rational::new(num, 20)).unwrap();
        prop_assert!(report.holds, "{:?}", report.counterexample);
        prop_assert_eq!(report.candidates_checked, 1usize << y.len());
    }

    #[test]
    fn zero_one_objectives_do_not_depend_on_label_names((g, y, f) in triple(40), num in 0..10i64) {
        let flip = |v: &[u8]| v.iter().map(|x| 1 - x).collect::<Vec<u8>>();
        for kind in [DissentKind::Reg, DissentKind::Weights] {
            let lambda = Rational::new(num, 10);
            let a = zero_one_objective(&g, &y, &f, lambda, kind).unwrap();
            let b = zero_one_objective(&flip(&g), &flip(&y), &flip(&f), lambda, kind).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn kappa_and_overreliance_ranges((h, f, y) in triple(120)) {
        let k: Rational = cohens_kappa(&h, &f).unwrap();
        prop_assert!(k >= Rational::from_integer(-1) && k <= Rational::from_integer(1));
        prop_assert_eq!(cohens_kappa::<Rational>(&h, &f).unwrap(), cohens_kappa::<Rational>(&f, &h).unwrap());
        if f != y {
            let o: Rational = overreliance(&h, &f, &y).unwrap();
            prop_assert!(o >= Rational::from_integer(0) && o <= Rational::from_integer(1));
            prop_assert_eq!(overreliance::<Rational>(&f, &f, &y).unwrap(), Rational::from_integer(1));
        }
    }

    #[test]
    fn splits_are_stratified_and_seeded(n in 20..200usize, fraction in 0.1..0.9f64, seed in 0..1000u64) {
        let ds: Dataset<f64> = generate_synthetic(&spec(SyntheticFamily::GaussianBlobs, n, 3, seed)).unwrap();
        let a = split_dataset(&ds, fraction, seed).unwrap();
        let b = split_dataset(&ds, fraction, seed).unwrap();
        prop_assert_eq!(a.splits(), b.splits());
        let [neg, pos] = ds.class_counts();
        let test = a.part(Split::Test);
        let [tneg, tpos] = test.class_counts();
        prop_assert!(tneg >= 1 && tneg < neg && tpos >= 1 && tpos < pos);
        prop_assert_eq!(test.len() + a.part(Split::Train).len(), n);
    }

    #[test]
    fn surrogate_is_deterministic_and_local(seed in 0..500u64, k in 1..10usize) {
        let weights: Vec<f64> = (0..30).map(|i| ((i * 7 + seed as usize) % 11) as f64 - 5.0).collect();
        let model = LinearModel::from_parts(weights, 0.1, "w".into()).unwrap();
        let pairs: Vec<(usize, f64)> = (0..30).filter(|i| (i + seed as usize) % 3 == 0).map(|i| (i, 0.2 + i as f64 / 60.0)).collect();
        let x = SparseVec::from_pairs(pairs).unwrap();
        let cfg = ExplainerConfig { n_samples: 200, k, seed, ..ExplainerConfig::default() };
        let a = explain_instance(&model, &x, "x", &cfg).unwrap();
        prop_assert_eq!(&a, &explain_instance(&model, &x, "x", &cfg).unwrap());
        prop_assert!(a.attributions.len() <= k);
        prop_assert!(a.attributions.iter().all(|(i, _)| x.indices().contains(i)));
        let native = explain_linear_native(&model, &x, "x", k).unwrap();
        prop_assert_eq!(native.predicted_label, a.predicted_label);
    }
}

#[test]
fn models_survive_serialization() {
    let ds = split_dataset(&generate_synthetic::<f64>(&spec(SyntheticFamily::SparseBow, 200, 80, 3)).unwrap(), 0.3, 3).unwrap();
    let train = ds.part(Split::Train);
    let test = ds.part(Split::Test);
    let models = [
        Model::Linear(train_linear_svm(&train, &TrainConfig::linear()).unwrap()),
        Model::Mlp(train_mlp(&train, &TrainConfig { epochs: 5, ..TrainConfig::mlp() }, None).unwrap()),
    ];
    for m in models {
        let back = Model::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict_labels(&test).unwrap(), m.predict_labels(&test).unwrap());
    }
    let again = Dataset::<f64>::from_json(&ds.to_json()).unwrap();
    assert_eq!(again.fingerprint(), ds.fingerprint());
}

#[test]
fn single_precision_pipeline_tracks_double() {
    let s = SyntheticSpec { class_separation: 3.0, ..spec(SyntheticFamily::GaussianBlobs, 300, 10, 5) };
    let accuracy = |labels: Vec<u8>, truth: &[u8]| labels.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
    let d64 = split_dataset(&generate_synthetic::<f64>(&s).unwrap(), 0.5, 1).unwrap();
    let d32 = split_dataset(&generate_synthetic::<f32>(&s).unwrap(), 0.5, 1).unwrap();
    let m64 = train_linear_svm(&d64.part(Split::Train), &TrainConfig::linear()).unwrap();
    let m32 = train_linear_svm(&d32.part(Split::Train), &TrainConfig::linear()).unwrap();
    let (t64, t32) = (d64.part(Split::Test), d32.part(Split::Test));
    let a64 = accuracy(m64.predict_labels(&t64).unwrap(), t64.labels());
    let a32 = accuracy(m32.predict_labels(&t32).unwrap(), t32.labels());
    assert!(a64 > 0.8, "{a64}");
    assert!((a64 - a32).abs() <= 0.02, "{a64} vs {a32}");
    let d: f64 = global_disagreement(&m64.predict_labels(&t64).unwrap(), &m32.predict_labels(&t32).unwrap()).unwrap();
    assert!(d <= 0.02);
}

#[test]
fn shrinking_to_one_example_always_flips() {
    let ds = split_dataset(&generate_synthetic::<f64>(&spec(SyntheticFamily::SparseBow, 120, 60, 9)).unwrap(), 0.5, 9).unwrap();
    let f = train_linear_svm(&ds.part(Split::Train), &TrainConfig::linear()).unwrap();
    let cfg = ExplainerConfig { n_samples: 100, ..ExplainerConfig::default() };
    for target in ds.indices_of(Split::Test).into_iter().filter(|&i| !ds.row(i).is_empty()).take(10) {
        let r = shrink_and_flip(&ds, &f, target, 1, &TrainConfig::linear(), &cfg).unwrap();
        assert!(r.success, "target {}", ds.ids()[target]);
        assert_eq!(r.dissenter.predict(ds.row(target)).unwrap().label, 1 - r.reference_label);
    }
}
