//! Replays the fuzz corpus and throws mutated inputs at both parsers; they
//! must return errors, never panic, and keep the properties the fuzz targets
//! assert.

use std::fs;
use std::path::{Path, PathBuf};

use dtoda::maps::record::{parse_record, to_record};
use dtoda_cli::config::parse_run_config;
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let t = fs::read_to_string(&p).unwrap();
            (p, t)
        })
        .collect();
    out.sort();
    out
}

fn record_property(text: &str) {
    if let Ok(map) = parse_record(text) {
        assert_eq!(parse_record(&to_record(&map)).unwrap(), map);
    }
}

fn config_property(text: &str) {
    if let Err(e) = parse_run_config(text) {
        if let Some(line) = e.line {
            assert!(line >= 1 && line <= text.lines().count().max(1) + 1, "{e}");
        }
    }
}

#[test]
fn record_seeds_parse_and_round_trip() {
    let seeds = corpus("parse_map_record");
    assert!(seeds.len() >= 3);
    for (p, t) in seeds {
        let map = parse_record(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(parse_record(&to_record(&map)).unwrap(), map);
    }
}

#[test]
fn config_seeds_are_valid() {
    let seeds = corpus("parse_run_config");
    assert!(seeds.len() >= 3);
    for (p, t) in seeds {
        parse_run_config(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

/// Deletes, duplicates or overwrites a byte range of a seed.
fn mutate(seed: &str, at: usize, len: usize, op: u8, fill: &str) -> String {
    let b = seed.as_bytes();
    let at = at % (b.len() + 1);
    let end = (at + len).min(b.len());
    let mut v = b[..at].to_vec();
    match op % 3 {
        0 => {}
        1 => v.extend_from_slice(&b[at..end]),
        _ => v.extend_from_slice(fill.as_bytes()),
    }
    if !op.is_multiple_of(3) {
        v.extend_from_slice(&b[at..end]);
    }
    v.extend_from_slice(&b[end..]);
    String::from_utf8_lossy(&v).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mutated_records(i in 0usize..5, at in 0usize..400, len in 0usize..20, op in 0u8..3,
                       fill in "[ -~\n]{0,12}") {
        let seeds = corpus("parse_map_record");
        record_property(&mutate(&seeds[i % seeds.len()].1, at, len, op, &fill));
    }

    #[test]
    fn mutated_configs(i in 0usize..7, at in 0usize..800, len in 0usize..30, op in 0u8..3,
                       fill in "[ -~\n]{0,16}") {
        let seeds = corpus("parse_run_config");
        config_property(&mutate(&seeds[i % seeds.len()].1, at, len, op, &fill));
    }

    #[test]
    fn arbitrary_text(s in "\\PC{0,200}") {
        record_property(&s);
        config_property(&s);
    }
}
