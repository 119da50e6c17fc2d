//! Exact laws against frozen tables produced by a separate brute-force
//! enumerator (direct recount of every path, no incremental bookkeeping).

use std::path::PathBuf;

use favedge::oracle::{enumerate, ExactDistribution};

fn golden(name: &str, n: usize) -> ExactDistribution {
    let p =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}_n{n}.json"));
    let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    ExactDistribution::from_json(&text).unwrap()
}

#[test]
fn enumerator_matches_brute_force_tables() {
    for name in [
        "favorites",
        "down-favorites",
        "min-favorite-edge",
        "f3-count",
    ] {
        for n in [4, 6, 8, 10] {
            assert_eq!(enumerate(n, name).unwrap(), golden(name, n), "{name} n={n}");
        }
    }
}

#[test]
fn json_round_trip() {
    let d = enumerate(8, "favorites").unwrap();
    assert_eq!(
        ExactDistribution::from_json(&d.to_json().unwrap()).unwrap(),
        d
    );
}
