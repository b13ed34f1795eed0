mod common;

use common::tetrachoric;
use dcmmi::model::{check_monotonicity, AttrSet, ItemParameterSet, QMatrix};
use dcmmi::sim::{
    build_item_params, derive_seed, gen_attribute_profiles, gen_responses, replication_seed,
    run_study, EffectSize, SimDesign, SplitRule, Study,
};

#[test]
fn attribute_correlation_is_recovered() {
    let p = gen_attribute_profiles(100_000, 3, 0.455, 17).unwrap();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let mut t = [[0.0; 2]; 2];
        for prof in &p {
            t[prof.mastered(a) as usize][prof.mastered(b) as usize] += 1.0;
        }
        let r = tetrachoric(t);
        assert!((r - 0.455).abs() < 0.02, "attributes {a},{b}: {r}");
        let prevalence = (t[1][0] + t[1][1]) / p.len() as f64;
        assert!((prevalence - 0.5).abs() < 0.01);
    }
}

#[test]
fn profiles_reject_invalid_correlation() {
    assert!(gen_attribute_profiles(10, 3, -0.6, 0).is_err());
    assert!(gen_attribute_profiles(10, 3, 1.0, 0).is_err());
    assert!(gen_attribute_profiles(10, 3, 0.0, 0).is_ok());
}

#[test]
fn generation_is_deterministic() {
    let a = gen_attribute_profiles(500, 3, 0.455, 9).unwrap();
    let b = gen_attribute_profiles(500, 3, 0.455, 9).unwrap();
    assert_eq!(a, b);
    let c = gen_attribute_profiles(500, 3, 0.455, 10).unwrap();
    assert_ne!(a, c);
    assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
    assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    assert_ne!(replication_seed(5, 500, 0), replication_seed(5, 1000, 0));
}

#[test]
fn masters_respond_at_the_stated_rate() {
    let d = SimDesign::new(EffectSize::Large, 1, 1, 0);
    let q = d.q_matrix().unwrap();
    let (full, dina) = d.item_params().unwrap();
    let masters = vec![dcmmi::model::AttributeProfile::new(7, 3); 20_000];
    let nonmasters = vec![dcmmi::model::AttributeProfile::new(0, 3); 20_000];
    for items in [&full, &dina] {
        let r = gen_responses(&masters, items, &q, 1).unwrap();
        let n = gen_responses(&nonmasters, items, &q, 2).unwrap();
        for i in 0..q.items() {
            let pm = r.values().column(i).iter().map(|&v| v as f64).sum::<f64>() / 20_000.0;
            let pn = n.values().column(i).iter().map(|&v| v as f64).sum::<f64>() / 20_000.0;
            // 4.5 binomial standard errors
            assert!((pm - 0.92).abs() < 4.5 * (0.92f64 * 0.08 / 20_000.0).sqrt(), "item {i}: {pm}");
            assert!((pn - 0.18).abs() < 4.5 * (0.18f64 * 0.82 / 20_000.0).sqrt(), "item {i}: {pn}");
        }
    }
}

#[test]
fn generating_items_are_monotone() {
    for effect in [EffectSize::Large, EffectSize::Smaller] {
        let d = SimDesign::new(effect, 1, 1, 0);
        let q = d.q_matrix().unwrap();
        let (full, dina) = d.item_params().unwrap();
        for i in 0..q.items() {
            assert!(check_monotonicity(&full[i], q.row(i)).is_empty());
            assert!(check_monotonicity(&dina[i], q.row(i)).is_empty());
        }
    }
    let q = QMatrix::from_entries(vec![vec![1, 1, 0], vec![0, 0, 1]]).unwrap();
    let (full, _): (ItemParameterSet, ItemParameterSet) =
        build_item_params(q.row(0), 3, 0.18, 0.92, SplitRule::MainShare { main_share: 0.2 }).unwrap();
    assert!(check_monotonicity(&full, q.row(0)).is_empty());
    let pm = full.prob(AttrSet::from_bits(0b011));
    assert!((pm - 0.92).abs() < 1e-12);
}

#[test]
fn studies_are_reproducible() {
    let d = SimDesign::new(EffectSize::Smaller, 200, 4, 31);
    let a = run_study(Study::Type1Q, &d, &[0.05], &[200]).unwrap();
    let b = run_study(Study::Type1Q, &d, &[0.05], &[200]).unwrap();
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    a.write_csv(&mut ca, None).unwrap();
    b.write_csv(&mut cb, None).unwrap();
    assert_eq!(ca, cb);
    for r in &a.rows {
        assert!(r.rate >= 0.0 && r.rate <= 1.0);
        assert!(r.rejections + r.excluded <= 4);
    }
    assert_eq!(a.truncated(2).replications.len(), 2);
}
