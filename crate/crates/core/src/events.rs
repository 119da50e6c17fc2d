//! Per-path counts of three-consecutive-favorite-edge events.
//!
//! Both event kinds need the maximal edge local time to equal 2h ≤ 2H, and
//! the maximum never decreases, so nothing can fire once L*(n) > 2H.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::branching::KWindow;
use crate::error::{Error, Result};
use crate::rng::{SeedPair, StepGenerator};
use crate::walk::Walk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// Fired at T_U(x − 1, k + 1).
    UpcrossEvent,
    /// Fired at T_D(x − 1, h).
    DowncrossEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventTriple {
    pub x: i64,
    pub h: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<u64>,
    pub time: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventConfig {
    pub h_min_n: u64,
    pub h_min_tilde: u64,
    pub window: KWindow,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            h_min_n: 8,
            h_min_tilde: 50,
            window: KWindow::OPEN,
        }
    }
}

/// Tallies indexed by r − 1 for r ∈ {1, 2, 3, 4+}.
pub type RTally = [u64; 4];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCountReport {
    pub seed: u64,
    pub stream: u64,
    #[serde(rename = "H")]
    pub h_max: u64,
    pub stop_time: u64,
    pub stop_reason: String,
    /// N_{H′} for H′ = 0..=H.
    #[serde(rename = "N")]
    pub n: Vec<u64>,
    /// Ñ_{H′} for H′ = 0..=H.
    #[serde(rename = "Ntilde")]
    pub n_tilde: Vec<u64>,
    pub f: RTally,
    pub f_tilde: RTally,
    pub events: Vec<EventTriple>,
}

impl PathCountReport {
    pub fn n_at(&self, h: u64) -> u64 {
        self.n[h.min(self.h_max) as usize]
    }

    pub fn n_tilde_at(&self, h: u64) -> u64 {
        self.n_tilde[h.min(self.h_max) as usize]
    }

    /// N_{H′} counted only over h ≥ `h_from`.
    pub fn n_from(&self, h_from: u64, h: u64) -> u64 {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::UpcrossEvent && e.h >= h_from && e.h <= h)
            .count() as u64
    }

    pub fn to_jsonl(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[inline]
fn r_index(r: usize) -> usize {
    r.clamp(1, 4) - 1
}

#[inline]
fn is_triple(fav: &[i64], x: i64) -> bool {
    fav.len() == 3 && fav[0] == x && fav[1] == x + 1 && fav[2] == x + 2
}

/// Run one path until L*(n) > 2H (or `extend`× that time) and count events.
pub fn count_path_events(seed: SeedPair, h_max: u64, cfg: EventConfig) -> Result<PathCountReport> {
    count_path_events_extended(seed, h_max, cfg, 1)
}

/// As [`count_path_events`], but keeps walking to `extend` times the stop
/// time; any event recorded past the stop with h ≤ H would falsify the rule.
pub fn count_path_events_extended(
    seed: SeedPair,
    h_max: u64,
    cfg: EventConfig,
    extend: u64,
) -> Result<PathCountReport> {
    let h_min = cfg.h_min_n.min(cfg.h_min_tilde);
    if h_max < h_min || extend == 0 || h_min == 0 {
        return Err(Error::InvalidParameter(format!(
            "need H ≥ {h_min} ≥ 1 and extend ≥ 1, got H = {h_max}, extend = {extend}"
        )));
    }
    let mut gen = StepGenerator::new(seed);
    let mut walk = Walk::new();
    let mut f = [0u64; 4];
    let mut f_tilde = [0u64; 4];
    let mut events = Vec::new();
    let mut stop_time = None;
    let mut limit = u64::MAX;
    while walk.state.n < limit {
        let edge = walk.advance(gen.next_step());
        let n = walk.state.n;
        let led = &walk.ledger;
        let fav = led.favorite_edges();
        if stop_time.is_none() {
            let r = r_index(fav.len());
            f[r] += 1;
            if fav.binary_search(&edge).is_ok() {
                f_tilde[r] += 1;
            }
        }
        if fav.len() == 3 {
            let cur = walk.state.position;
            let x = cur + 1;
            let l = led.max_edge_local();
            if x >= 2 && is_triple(fav, x) && l.is_multiple_of(2) {
                let h = l / 2;
                if (h_min..=h_max).contains(&h) {
                    if walk.state.previous < cur {
                        let k = led.xi_up(cur) - 1;
                        if h >= cfg.h_min_n && cfg.window.contains(2 * h, k) {
                            events.push(EventTriple {
                                x,
                                h,
                                k: Some(k),
                                time: n,
                                kind: EventKind::UpcrossEvent,
                            });
                        }
                    } else if led.xi_down(cur) == h {
                        events.push(EventTriple {
                            x,
                            h,
                            k: None,
                            time: n,
                            kind: EventKind::DowncrossEvent,
                        });
                    }
                }
            }
        }
        if stop_time.is_none() && walk.ledger.max_edge_local() > 2 * h_max {
            stop_time = Some(n);
            limit = n.saturating_mul(extend);
        }
    }
    let stop_time = stop_time.expect("loop exits only after the stop");

    let mut n_by_h = vec![0u64; h_max as usize + 1];
    let mut nt_by_h = vec![0u64; h_max as usize + 1];
    for e in &events {
        match e.kind {
            EventKind::UpcrossEvent => n_by_h[e.h as usize] += 1,
            EventKind::DowncrossEvent if e.h >= cfg.h_min_tilde => nt_by_h[e.h as usize] += 1,
            EventKind::DowncrossEvent => {}
        }
    }
    let cumsum = |v: Vec<u64>| {
        v.into_iter()
            .scan(0u64, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect::<Vec<_>>()
    };
    Ok(PathCountReport {
        seed: seed.master_seed,
        stream: seed.stream_index,
        h_max,
        stop_time,
        stop_reason: format!("max edge local time exceeded {}", 2 * h_max),
        n: cumsum(n_by_h),
        n_tilde: cumsum(nt_by_h),
        f,
        f_tilde,
        events,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub upcross_events: u64,
    pub downcross_events: u64,
    /// Upcross events with no earlier downcross event at the same (x, h).
    pub containment_violations: Vec<EventTriple>,
    /// Values h with more than one upcross event on the path.
    pub disjointness_violations: BTreeMap<u64, Vec<EventTriple>>,
    /// H′ with N_{H′} > Ñ_{H′} as reported (different lower limits in h).
    pub n_exceeds_ntilde_literal: u64,
    /// Same comparison with N restricted to h ≥ h_min_tilde.
    pub n_exceeds_ntilde_aligned: u64,
    /// Recorded events with odd total local time or h outside (0, H].
    pub parity_violations: u64,
    /// Times with exactly three favorites fewer than N_H.
    pub f3_below_n: bool,
}

impl AuditSummary {
    pub fn clean(&self) -> bool {
        self.containment_violations.is_empty()
            && self.n_exceeds_ntilde_aligned == 0
            && self.parity_violations == 0
            && !self.f3_below_n
    }
}

pub fn audit_containment_disjointness(report: &PathCountReport, cfg: EventConfig) -> AuditSummary {
    let mut a = AuditSummary::default();
    let mut down: BTreeMap<(i64, u64), u64> = BTreeMap::new();
    for e in report
        .events
        .iter()
        .filter(|e| e.kind == EventKind::DowncrossEvent)
    {
        a.downcross_events += 1;
        down.entry((e.x, e.h)).or_insert(e.time);
    }
    let mut by_h: BTreeMap<u64, Vec<EventTriple>> = BTreeMap::new();
    for e in report
        .events
        .iter()
        .filter(|e| e.kind == EventKind::UpcrossEvent)
    {
        a.upcross_events += 1;
        if !down.get(&(e.x, e.h)).is_some_and(|&t| t < e.time) {
            a.containment_violations.push(*e);
        }
        by_h.entry(e.h).or_default().push(*e);
    }
    a.disjointness_violations = by_h.into_iter().filter(|(_, v)| v.len() > 1).collect();
    for h in 0..=report.h_max {
        if report.n_at(h) > report.n_tilde_at(h) {
            a.n_exceeds_ntilde_literal += 1;
        }
        if report.n_from(cfg.h_min_tilde, h) > report.n_tilde_at(h) {
            a.n_exceeds_ntilde_aligned += 1;
        }
    }
    a.parity_violations = report
        .events
        .iter()
        .filter(|e| e.h == 0 || e.h > report.h_max)
        .count() as u64;
    a.f3_below_n = report.f[2] < report.n_at(report.h_max);
    a
}

/// Counts of n ∈ [1, horizon] with #𝒰(n) = r, r ∈ {1, 2, 3, 4+}.
pub fn downcross_site_tallies(seed: SeedPair, horizon: u64) -> Result<RTally> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut gen = StepGenerator::new(seed);
    let mut walk = Walk::new();
    let mut t = [0u64; 4];
    for _ in 0..horizon {
        walk.advance(gen.next_step());
        t[r_index(walk.ledger.favorite_down_sites().len())] += 1;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tallies_partition_time() {
        let t = downcross_site_tallies(SeedPair::new(4, 4), 10_000).unwrap();
        assert_eq!(t.iter().sum::<u64>(), 10_000);
        assert!(downcross_site_tallies(SeedPair::new(4, 4), 0).is_err());
    }

    #[test]
    fn single_step_has_one_downcross_favorite() {
        // find a stream whose first step is +1 and one whose first two are (+1, −1)
        for s in 0..64 {
            let mut g = StepGenerator::new(SeedPair::new(0, s));
            let (a, b) = (g.next_step(), g.next_step());
            let t1 = downcross_site_tallies(SeedPair::new(0, s), 1).unwrap();
            if a == 1 {
                assert_eq!(t1, [1, 0, 0, 0]);
            }
            if (a, b) == (1, -1) {
                let t2 = downcross_site_tallies(SeedPair::new(0, s), 2).unwrap();
                assert_eq!(t2, [2, 0, 0, 0]);
            }
        }
    }

    #[test]
    fn empty_report_audits_clean() {
        let r = PathCountReport {
            seed: 0,
            stream: 0,
            h_max: 10,
            stop_time: 1,
            stop_reason: String::new(),
            n: vec![0; 11],
            n_tilde: vec![0; 11],
            f: [1, 0, 0, 0],
            f_tilde: [1, 0, 0, 0],
            events: vec![],
        };
        let a = audit_containment_disjointness(&r, EventConfig::default());
        assert!(a.clean() && a.disjointness_violations.is_empty());
    }

    #[test]
    fn counts_are_monotone_and_consistent() {
        let cfg = EventConfig::default();
        for s in 0..20 {
            let r = count_path_events(SeedPair::new(12, s), 60, cfg).unwrap();
            assert!(r.n.windows(2).all(|w| w[0] <= w[1]));
            assert!(r.n_tilde.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(r.f.iter().sum::<u64>(), r.stop_time);
            let a = audit_containment_disjointness(&r, cfg);
            assert!(a.clean(), "{a:?}");
            for e in &r.events {
                assert!(e.x >= 2 && e.h >= 8 && e.h <= 60);
            }
        }
    }

    #[test]
    fn events_satisfy_their_definitions_on_replay() {
        let cfg = EventConfig::default();
        let seed = SeedPair::new(3, 1);
        let r = count_path_events(seed, 100, cfg).unwrap();
        let mut gen = StepGenerator::new(seed);
        let mut walk = Walk::new();
        let mut it = r.events.iter().peekable();
        while let Some(e) = it.peek() {
            walk.advance(gen.next_step());
            if walk.state.n != e.time {
                continue;
            }
            let led = &walk.ledger;
            assert_eq!(led.favorite_edges(), &[e.x, e.x + 1, e.x + 2]);
            assert_eq!(led.edge_local(e.x), 2 * e.h);
            assert_eq!(walk.state.position, e.x - 1);
            match e.kind {
                EventKind::UpcrossEvent => {
                    assert_eq!(walk.state.previous, e.x - 2);
                    assert_eq!(led.xi_up(e.x - 1), e.k.unwrap() + 1);
                    assert!(KWindow::OPEN.contains(2 * e.h, e.k.unwrap()));
                }
                EventKind::DowncrossEvent => {
                    assert_eq!(walk.state.previous, e.x);
                    assert_eq!(led.xi_down(e.x - 1), e.h);
                }
            }
            it.next();
        }
    }

    #[test]
    fn rejects_bad_ceiling() {
        assert!(count_path_events(SeedPair::new(0, 0), 7, EventConfig::default()).is_err());
    }
}
