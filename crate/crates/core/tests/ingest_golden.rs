mod support;

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use rentyield::ingest::{
    clean_text, dedupe, ingest, load_dataset, parse_record, read_jsonl, store_dataset,
    to_vendor_record, write_jsonl, PayloadSource, SearchQuery,
};
use rentyield::Operation;
use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn payload_fixtures_reproduce_the_golden_jsonl() {
    let source = PayloadSource::Fixture(fixtures().join("payloads"));
    let queries = [SearchQuery::new(Operation::Rent), SearchQuery::new(Operation::Sale)];
    let outcome = ingest(&queries, &source, 10).unwrap();
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &outcome.listings).unwrap();
    let golden = fs::read(fixtures().join("dataset.jsonl")).unwrap();
    assert!(bytes == golden, "ingested output differs from dataset.jsonl");

    let manifest: Value = serde_json::from_str(&fs::read_to_string(fixtures().join("manifest.json")).unwrap()).unwrap();
    let counts = &manifest["counts"];
    assert_eq!(outcome.pages_read as u64, counts["pages"].as_u64().unwrap());
    assert_eq!(outcome.records_parsed as u64, counts["records"].as_u64().unwrap());
    assert_eq!(outcome.duplicates_removed as u64, counts["duplicates"].as_u64().unwrap());
    assert_eq!(outcome.listings.len() as u64, counts["listings"].as_u64().unwrap());
}

#[test]
fn cleaning_keeps_every_element() {
    for page in ["rent_p1", "rent_p2", "sale_p1", "sale_p2"] {
        let text = fs::read_to_string(fixtures().join("payloads").join(format!("{page}.json"))).unwrap();
        let raw: Value = serde_json::from_str(&text).unwrap();
        let n = raw["elementList"].as_array().unwrap().len();
        let records = clean_text(&text).unwrap();
        assert_eq!(records.len(), n, "{page}");
        for r in &records {
            assert!(!r.contains(['\n', '\t']));
            serde_json::from_str::<Value>(r).unwrap();
        }
    }
}

#[test]
fn escaped_names_are_folded() {
    let golden = load_dataset(&fixtures().join("dataset.jsonl")).unwrap();
    assert!(golden.iter().any(|l| l.neighborhood == "Leganes"));
    assert!(golden.iter().all(|l| !l.neighborhood.contains("u00")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_inverts_vendor_serialization(l in support::arb_listing()) {
        let record = to_vendor_record(&l);
        prop_assert_eq!(parse_record(&record).unwrap(), l.clone());
        let page = format!("{{\n\t\"elementList\": [\n\t\t{record}\n\t]\n}}");
        let cleaned = clean_text(&page).unwrap();
        prop_assert_eq!(cleaned.len(), 1);
        prop_assert_eq!(parse_record(&cleaned[0]).unwrap(), l);
    }

    #[test]
    fn jsonl_round_trip(ls in proptest::collection::vec(support::arb_listing(), 0..8)) {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &ls).unwrap();
        prop_assert_eq!(read_jsonl(&buf[..]).unwrap(), ls);
    }

    #[test]
    fn dedupe_is_idempotent_and_keys_are_unique(
        ls in proptest::collection::vec(support::arb_listing(), 0..12),
        dup in proptest::collection::vec(0usize..12, 0..6),
    ) {
        let mut input = ls.clone();
        for &i in &dup {
            if let Some(l) = ls.get(i) {
                input.push(l.clone());
            }
        }
        let (once, removed) = dedupe(input.clone());
        let (twice, removed_again) = dedupe(once.clone());
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(removed_again, 0);
        prop_assert_eq!(once.len() + removed, input.len());
        let mut keys: Vec<_> = once.iter().map(|l| (l.id.clone(), l.operation)).collect();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), once.len());
    }
}

#[test]
fn store_and_load_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
    let listings = support::random_dataset(&mut rng, 1000);
    store_dataset(&path, &listings).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), listings);
}
