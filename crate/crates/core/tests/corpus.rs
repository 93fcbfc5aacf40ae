// Replays the checked-in fuzz seeds through the same entry points.
use std::fs;
use std::path::Path;

use shg_core::io::{parse_complex, parse_omega, parse_window};
use shg_core::medium::load_profile;

fn seeds(target: &str) -> Vec<String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<String> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read_to_string(e.unwrap().path()).unwrap())
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn complex_seeds_parse_and_round_trip() {
    for s in seeds("parse_complex") {
        let z = parse_complex(&s).unwrap_or_else(|e| panic!("{s:?}: {e}"));
        assert_eq!(parse_complex(&format!("{}{:+}i", z.re, z.im)).unwrap(), z);
    }
}

#[test]
fn window_seeds() {
    let mut ok = 0;
    for s in seeds("parse_window") {
        if let Ok((a, b)) = parse_window(&s) {
            assert!(a <= b);
            ok += 1;
        }
        let _ = parse_omega(&s);
    }
    assert!(ok >= 3);
}

#[test]
fn profile_seeds() {
    let loaded = seeds("load_profile").iter().filter(|s| load_profile(s).is_ok()).count();
    assert_eq!(loaded, 3);
}
