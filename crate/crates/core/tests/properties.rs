//! Property-based checks on arbitrary paths and inputs.

use favedge::branching::{row_sum, KWindow, KernelKind};
use favedge::events::{audit_containment_disjointness, count_path_events, EventConfig};
use favedge::harness::{map_replicas, run_replicas, ReplicaConfig};
use favedge::rng::SeedPair;
use favedge::stats::{fit, FitModel, Moments};
use favedge::walk::{audit_prop24, edge_of_step, Walk};
use proptest::prelude::*;

fn steps() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(prop_oneof![Just(1i64), Just(-1i64)], 1..400)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ledger_invariants(s in steps()) {
        let w = Walk::from_steps(&s).unwrap();
        let l = &w.ledger;
        prop_assert_eq!(l.identity_violations_all(w.state.position), 0);
        let (fav, down) = l.brute_force_favorites();
        prop_assert_eq!(l.favorite_edges(), fav.as_slice());
        prop_assert_eq!(l.favorite_down_sites(), down.as_slice());
        prop_assert!(!fav.is_empty());
        prop_assert!(audit_prop24(l));
        let (lo, hi) = l.range();
        let u = l.min_abs_favorite_edge().unwrap();
        prop_assert!(u as i64 <= lo.abs().max(hi.abs()) + 1);
        // L(x) = ξ_U(x) + ξ_D(x − 1) on every edge
        for x in lo..=hi + 1 {
            prop_assert_eq!(l.edge_local(x), l.xi_up(x) + l.xi_down(x - 1));
        }
    }

    #[test]
    fn edges_of_unit_steps(p in -1000i64..1000, up in any::<bool>()) {
        let c = if up { p + 1 } else { p - 1 };
        let e = edge_of_step(p, c).unwrap();
        prop_assert_eq!(e, p.max(c));
        prop_assert_eq!(edge_of_step(c, p).unwrap(), e);
    }

    #[test]
    fn kernel_rows_sum_to_one(i in 0u64..=200) {
        for kind in KernelKind::ALL {
            prop_assert!((row_sum(kind, i, 40) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_middle_is_a_member(h in 5u64..20_000) {
        let w = KWindow::OPEN;
        let members = w.members(h);
        for &k in &members {
            prop_assert!(w.contains(h, k));
            prop_assert!(KWindow::CLOSED.contains(h, k));
        }
        prop_assert_eq!(w.middle(h).is_some(), !members.is_empty());
    }

    #[test]
    fn fits_recover_model_curves(a in -5.0f64..5.0, b in -3.0f64..3.0) {
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 10.0, 40.0].iter().map(|&x: &f64| (x, a + b * x.ln())).collect();
        let f = fit(FitModel::LogLinear, &pts).unwrap();
        prop_assert!((f.slope - b).abs() < 1e-9 && (f.intercept - a).abs() < 1e-9);
        let pts: Vec<(f64, f64)> = [2.0, 5.0, 50.0].iter().map(|&x: &f64| (x, a.exp() * x.powf(b))).collect();
        let f = fit(FitModel::LogLog, &pts).unwrap();
        prop_assert!((f.slope - b).abs() < 1e-9);
    }

    #[test]
    fn merge_grouping_is_irrelevant(v in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(v.len());
        let whole = Moments::from_values(&v);
        let parts = Moments::from_values(&v[..cut]).merge(&Moments::from_values(&v[cut..]));
        prop_assert_eq!(whole.count, parts.count);
        prop_assert!((whole.mean - parts.mean).abs() <= 1e-12 * whole.mean.abs().max(1.0));
        prop_assert!((whole.variance() - parts.variance()).abs() <= 1e-9 * whole.variance().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn event_audits_on_random_streams(stream in 0u64..1_000_000) {
        let cfg = EventConfig::default();
        let r = count_path_events(SeedPair::new(99, stream), 60, cfg).unwrap();
        let a = audit_containment_disjointness(&r, cfg);
        prop_assert!(a.containment_violations.is_empty());
        prop_assert_eq!(a.parity_violations, 0);
        prop_assert!(!a.f3_below_n);
        prop_assert!(r.n.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.n_tilde.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn subsets_of_replicas_reproduce() {
    let all = map_replicas(8, 40, |s| {
        count_path_events(s, 50, EventConfig::default()).unwrap()
    })
    .unwrap();
    for r in [0u64, 17, 39] {
        let again = count_path_events(SeedPair::new(8, r), 50, EventConfig::default()).unwrap();
        assert_eq!(all[r as usize], again);
    }
}

#[test]
fn experiment_output_is_bitwise_stable() {
    for cfg in [
        ReplicaConfig::new("count-events", 3, 50)
            .with("H", 60)
            .with("H_grid", vec![50u64, 55, 60]),
        ReplicaConfig::new("lemma41", 3, 2000).with("h", 100),
        ReplicaConfig::new("transience", 3, 10).with("n_grid", vec![100u64, 1000, 5000]),
    ] {
        let a = serde_json::to_string(&run_replicas(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_replicas(&cfg).unwrap()).unwrap();
        assert_eq!(a, b, "{}", cfg.experiment);
    }
}
