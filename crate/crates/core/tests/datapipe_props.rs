use std::path::PathBuf;

use chrono::FixedOffset;
use loadsynth::datapipe::{clean_days, denormalize, load_csv, normalize, resample, toy, ColumnSpec, SeriesKind};
use loadsynth::kvfile::KvDoc;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn manifest() -> KvDoc {
    KvDoc::parse(&std::fs::read_to_string(fixture("rapt_3days.manifest")).unwrap()).unwrap()
}

fn complete_days(column: &str, kind: SeriesKind) -> Vec<String> {
    let series = load_csv(&fixture("rapt_3days.csv"), &ColumnSpec::new(column)).unwrap();
    let quarter = resample(&series, 15).unwrap();
    let days = clean_days(&quarter, kind, FixedOffset::east_opt(0).unwrap()).unwrap();
    days.dates().iter().map(|d| d.to_string()).collect()
}

#[test]
fn fixture_matches_gap_manifest() {
    let m = manifest();
    let series = load_csv(&fixture("rapt_3days.csv"), &ColumnSpec::new("aggregate_load_w")).unwrap();
    assert_eq!(series.period_minutes().to_string(), m.get("period_minutes").unwrap());

    let load = complete_days("aggregate_load_w", SeriesKind::Load);
    let pv = complete_days("pv_w", SeriesKind::Pv);
    assert_eq!(load.len().to_string(), m.get("complete_load_days").unwrap());
    assert_eq!(pv.len().to_string(), m.get("complete_pv_days").unwrap());
    assert_eq!(load.join(","), m.get("load_dates").unwrap());
    assert_eq!(pv.join(","), m.get("pv_dates").unwrap());
}

#[test]
fn resample_is_idempotent() {
    let series = load_csv(&fixture("rapt_3days.csv"), &ColumnSpec::new("pv_w")).unwrap();
    let once = resample(&series, 15).unwrap();
    let twice = resample(&once, 15).unwrap();
    assert_eq!(once, twice);
}

#[test]
fn normalize_round_trip() {
    let days = toy::sinusoid_days(30, 4);
    let n = normalize(&days).unwrap();
    assert!(n.values().iter().all(|v| (0.0..=1.0).contains(v)));
    let back = denormalize(&n).unwrap();
    let worst =
        back.values().iter().zip(days.values()).map(|(a, b)| ((a - b) / b.abs().max(1.0)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

proptest! {
    #[test]
    fn normalize_preserves_argmax(seed in 0u64..500) {
        let days = toy::sinusoid_days(3, seed);
        let n = normalize(&days).unwrap();
        let argmax = |v: &[f64]| {
            v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
        };
        for (a, b) in days.iter_rows().zip(n.iter_rows()) {
            prop_assert_eq!(argmax(a), argmax(b));
        }
    }
}
