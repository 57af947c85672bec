use proptest::prelude::*;
use slomo_core::catalog::{
    bundled_catalog, categorize_duration, parse_catalog, summarize, write_catalog, Categorical, Difficulty, Duration,
    Level, Platform, Scene, SequenceRecord,
};

fn pick<T: Categorical + std::fmt::Debug>() -> impl Strategy<Value = T> {
    (0..T::ALL.len()).prop_map(|i| T::ALL[i])
}

fn record() -> impl Strategy<Value = SequenceRecord> {
    (
        "[A-Za-z][A-Za-z0-9 ]{0,12}[A-Za-z0-9]",
        pick::<Platform>(),
        pick::<Scene>(),
        pick::<Duration>(),
        pick::<Level>(),
        pick::<Level>(),
        pick::<Level>(),
        prop::option::of(pick::<Difficulty>()),
    )
        .prop_map(|(name, platform, scene, duration, motion_dyn, environ_dyn, revisit_freq, difficulty)| SequenceRecord {
            name,
            platform,
            scene,
            duration,
            motion_dyn,
            environ_dyn,
            revisit_freq,
            difficulty,
        })
}

proptest! {
    #[test]
    fn catalog_round_trip(records in prop::collection::vec(record(), 1..20)) {
        let mut seen = std::collections::HashSet::new();
        let records: Vec<_> = records.into_iter().filter(|r| seen.insert(r.name.to_lowercase())).collect();
        let back = parse_catalog(&write_catalog(&records)).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn duration_category_is_monotone(a in 0.001..5000.0f64, b in 0.001..5000.0f64) {
        let rank = |d: Duration| Duration::ALL.iter().position(|x| *x == d).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(categorize_duration(lo).unwrap()) <= rank(categorize_duration(hi).unwrap()));
    }
}

#[test]
fn bundled_summary_percentages() {
    let s = summarize(&bundled_catalog()).unwrap();
    assert_eq!(s.total, 12);
    for p in &s.properties {
        let total: usize = p.values.iter().map(|v| v.count).sum();
        assert_eq!(total, 12);
    }
    assert_eq!(s.count("scene", "Indoor"), Some(8));
}
