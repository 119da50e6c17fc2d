//! Exact enumeration against seeded walk-engine Monte Carlo.

use favedge::oracle::enumerate;
use favedge::rng::{SeedPair, StepGenerator};
use favedge::walk::Walk;

const REPLICAS: u64 = 1_000_000;

/// Per-path values of every oracle statistic after `n` steps.
fn sample(seed: SeedPair, n: usize) -> [u64; 4] {
    let mut g = StepGenerator::new(seed);
    let mut w = Walk::new();
    let mut f3 = 0;
    for _ in 0..n {
        w.advance(g.next_step());
        f3 += (w.ledger.favorite_edges().len() == 3) as u64;
    }
    let l = &w.ledger;
    [
        l.favorite_edges().len() as u64,
        l.favorite_down_sites().len() as u64,
        l.min_abs_favorite_edge().unwrap_or(0),
        f3,
    ]
}

const STATS: [&str; 4] = [
    "favorites",
    "down-favorites",
    "min-favorite-edge",
    "f3-count",
];

#[test]
fn exact_laws_match_simulation() {
    for n in [3usize, 5, 10] {
        let mut counts = vec![std::collections::BTreeMap::<u64, u64>::new(); STATS.len()];
        for r in 0..REPLICAS {
            let v = sample(SeedPair::new(20 + n as u64, r), n);
            for (c, x) in counts.iter_mut().zip(v) {
                *c.entry(x).or_default() += 1;
            }
        }
        for (s, name) in STATS.iter().enumerate() {
            let d = enumerate(n, name).unwrap();
            assert!(d.is_normalized());
            for (&value, &count) in &counts[s] {
                assert!(
                    d.support.contains(&value),
                    "{name} n={n}: value {value} outside exact support"
                );
                let p = d.probability(value);
                let se = (p * (1.0 - p) / REPLICAS as f64).sqrt();
                let phat = count as f64 / REPLICAS as f64;
                assert!(
                    (phat - p).abs() <= 4.0 * se,
                    "{name} n={n} value={value}: {phat} vs {p} (se {se})"
                );
            }
        }
    }
}

#[test]
fn three_step_favorites() {
    let d = enumerate(3, "favorites").unwrap();
    assert_eq!(d.denominator_log2, 3);
    assert_eq!(d.numerator(3), 2);
    assert_eq!(d.numerator(1), 6);
}

#[test]
fn identities_hold_on_every_path() {
    for n in 1..=14 {
        let d = enumerate(n, "identity-violations").unwrap();
        assert_eq!(d.support, vec![0], "n = {n}");
    }
}
