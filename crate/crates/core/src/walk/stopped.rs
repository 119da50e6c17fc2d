use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeedPair, StepGenerator};

/// Default step budget for runs to an inverse local time.
pub const DEFAULT_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    Upcross,
    Downcross,
}

/// ξ_D over a window at the inverse local time `T_kind(target_site, target_count)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppedProfile {
    pub target_site: i64,
    pub target_count: u64,
    pub kind: CrossingKind,
    pub stop_time: Option<u64>,
    pub window: (i64, i64),
    pub down_profile: Vec<u64>,
    pub censored: bool,
    pub cap: u64,
}

impl StoppedProfile {
    /// ξ_D(y, stop) for `y` inside the window.
    pub fn down_at(&self, y: i64) -> Option<u64> {
        let (lo, hi) = self.window;
        (lo..=hi)
            .contains(&y)
            .then(|| self.down_profile[(y - lo) as usize])
    }
}

/// Run the walk on stream `seed` until the `target_count`-th crossing of
/// `kind` into `target_site`, or until `cap` steps have been taken.
pub fn stopped_run(
    seed: SeedPair,
    target_site: i64,
    target_count: u64,
    kind: CrossingKind,
    window: (i64, i64),
    cap: u64,
) -> Result<StoppedProfile> {
    let mut gen = StepGenerator::new(seed);
    stopped_run_with(&mut gen, target_site, target_count, kind, window, cap)
}

pub(crate) fn stopped_run_with(
    gen: &mut StepGenerator,
    target_site: i64,
    target_count: u64,
    kind: CrossingKind,
    window: (i64, i64),
    cap: u64,
) -> Result<StoppedProfile> {
    if target_count == 0 || cap == 0 {
        return Err(Error::InvalidParameter(
            "target_count and cap must be at least 1".into(),
        ));
    }
    let (wlo, whi) = window;
    if whi < wlo {
        return Err(Error::InvalidParameter(format!("empty window {wlo}:{whi}")));
    }
    let mut profile = vec![0u64; (whi - wlo + 1) as usize];
    let mut pos = 0i64;
    let mut hits = 0u64;
    let mut stop_time = None;
    let want_up = kind == CrossingKind::Upcross;
    for n in 1..=cap {
        let up = gen.next_bit();
        if up {
            pos += 1;
            if want_up && pos == target_site {
                hits += 1;
                if hits == target_count {
                    stop_time = Some(n);
                    break;
                }
            }
        } else {
            pos -= 1;
            if pos >= wlo && pos <= whi {
                profile[(pos - wlo) as usize] += 1;
            }
            if !want_up && pos == target_site {
                hits += 1;
                if hits == target_count {
                    stop_time = Some(n);
                    break;
                }
            }
        }
    }
    Ok(StoppedProfile {
        target_site,
        target_count,
        kind,
        stop_time,
        window,
        down_profile: profile,
        censored: stop_time.is_none(),
        cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::Walk;

    #[test]
    fn first_upcross_of_one() {
        let reps = 40_000u64;
        let mut at_one = 0u64;
        for s in 0..reps {
            let p = stopped_run(
                SeedPair::new(11, s),
                1,
                1,
                CrossingKind::Upcross,
                (0, 0),
                1_000_000,
            )
            .unwrap();
            if p.censored {
                continue;
            }
            // no 1 -> 0 step can precede the first 0 -> 1 step
            assert_eq!(p.down_at(0), Some(0));
            if p.stop_time == Some(1) {
                at_one += 1;
            }
        }
        let f = at_one as f64 / reps as f64;
        let se = (0.25 / reps as f64).sqrt();
        assert!((f - 0.5).abs() < 4.0 * se, "P(T=1) ~ {f}");
    }

    #[test]
    fn downcrossings_of_zero_before_reaching_two() {
        let reps = 40_000u64;
        let mut counts = [0u64; 4];
        let mut used = 0u64;
        for s in 0..reps {
            let p = stopped_run(
                SeedPair::new(12, s),
                2,
                1,
                CrossingKind::Upcross,
                (0, 0),
                1_000_000,
            )
            .unwrap();
            if p.censored {
                continue;
            }
            used += 1;
            let j = p.down_at(0).unwrap();
            if j < 4 {
                counts[j as usize] += 1;
            }
        }
        for (j, &c) in counts.iter().enumerate() {
            let p = 0.5f64.powi(j as i32 + 1);
            let se = (p * (1.0 - p) / used as f64).sqrt();
            assert!((c as f64 / used as f64 - p).abs() < 4.0 * se, "j={j}");
        }
    }

    #[test]
    fn stop_condition_holds_exactly() {
        for s in 0..200 {
            let seed = SeedPair::new(13, s);
            for kind in [CrossingKind::Upcross, CrossingKind::Downcross] {
                let p = stopped_run(seed, -1, 2, kind, (-3, 3), 100_000).unwrap();
                let Some(t) = p.stop_time else { continue };
                // replay the same stream with the full ledger
                let mut gen = StepGenerator::new(seed);
                let mut w = Walk::new();
                let count = |w: &Walk| match kind {
                    CrossingKind::Upcross => w.ledger.xi_up(-1),
                    CrossingKind::Downcross => w.ledger.xi_down(-1),
                };
                for _ in 0..t - 1 {
                    w.advance(gen.next_step());
                }
                assert_eq!(count(&w), 1);
                w.advance(gen.next_step());
                assert_eq!(count(&w), 2);
                assert_eq!(p.down_profile, w.ledger.down_profile(-3, 3));
            }
        }
    }

    #[test]
    fn censoring_is_reported() {
        let p = stopped_run(
            SeedPair::new(1, 1),
            1000,
            1,
            CrossingKind::Upcross,
            (0, 0),
            10,
        )
        .unwrap();
        assert!(p.censored);
        assert_eq!(p.stop_time, None);
        assert!(stopped_run(SeedPair::new(1, 1), 1, 0, CrossingKind::Upcross, (0, 0), 10).is_err());
    }
}
