//! Streaming simple symmetric random walk with crossing-count bookkeeping.

mod ledger;
mod stopped;

pub use ledger::{CrossingLedger, Snapshot};
pub use stopped::{stopped_run, CrossingKind, StoppedProfile, DEFAULT_CAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeedPair, StepGenerator};

/// Edge crossed by the jump `prev -> cur`: `(cur + prev + 1) / 2`.
pub fn edge_of_step(prev: i64, cur: i64) -> Result<i64> {
    if (cur - prev).abs() != 1 {
        return Err(Error::InvalidStep { prev, cur });
    }
    Ok((cur + prev + 1).div_euclid(2))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkState {
    pub n: u64,
    pub position: i64,
    pub previous: i64,
}

/// A walk and its ledger advanced together.
#[derive(Debug, Clone, Default)]
pub struct Walk {
    pub state: WalkState,
    pub ledger: CrossingLedger,
}

impl Walk {
    pub fn new() -> Self {
        Self::default()
    }

    /// Apply one increment; returns the crossed edge.
    #[inline]
    pub fn advance(&mut self, step: i64) -> i64 {
        debug_assert!(step == 1 || step == -1);
        let prev = self.state.position;
        let cur = prev + step;
        self.state.previous = prev;
        self.state.position = cur;
        self.state.n += 1;
        self.ledger.record(prev, cur);
        let edge = if step > 0 { cur } else { prev };
        // only the identities at the crossed edge can change on this step
        debug_assert_eq!(self.ledger.identity_violations_at(edge, cur), 0);
        edge
    }

    pub fn from_steps(steps: &[i64]) -> Result<Self> {
        let mut w = Self::new();
        for &s in steps {
            if s != 1 && s != -1 {
                return Err(Error::InvalidStep {
                    prev: w.state.position,
                    cur: w.state.position + s,
                });
            }
            w.advance(s);
        }
        Ok(w)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            n: self.state.n,
            position: self.state.position,
            previous: self.state.previous,
            favorite_edges: self.ledger.favorite_edges().to_vec(),
            favorite_down_sites: self.ledger.favorite_down_sites().to_vec(),
            max_edge_local: self.ledger.max_edge_local(),
            max_down: self.ledger.max_down(),
            min_favorite_edge: self.ledger.min_abs_favorite_edge(),
            min_favorite_down: self.ledger.min_abs_favorite_down(),
        }
    }
}

/// Every favorite edge `x` has `x - 1` among the favorite downcrossing sites.
pub fn audit_prop24(ledger: &CrossingLedger) -> bool {
    ledger
        .favorite_edges()
        .iter()
        .all(|&x| ledger.is_favorite_down(x - 1))
}

/// Run `n_steps` steps of the walk on stream `seed`, capturing snapshots at
/// the (sorted) probe times.
pub fn simulate(seed: SeedPair, n_steps: u64, probes: &[u64]) -> Result<Vec<Snapshot>> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    if probes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("probes must be sorted".into()));
    }
    if probes.last().is_some_and(|&p| p > n_steps) {
        return Err(Error::InvalidParameter("probe beyond n_steps".into()));
    }
    let mut gen = StepGenerator::new(seed);
    let mut walk = Walk::new();
    let mut out = Vec::with_capacity(probes.len());
    let mut next = probes.iter().peekable();
    while next.peek().is_some_and(|&&p| p == 0) {
        out.push(walk.snapshot());
        next.next();
    }
    for _ in 0..n_steps {
        walk.advance(gen.next_step());
        while next.peek().is_some_and(|&&p| p == walk.state.n) {
            out.push(walk.snapshot());
            next.next();
        }
    }
    Ok(out)
}
