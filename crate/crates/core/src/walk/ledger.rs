use serde::{Deserialize, Serialize};

/// Crossing counts, edge local times and favorite sets over the visited range.
///
/// Site `x` lives at index `x - base` of `up`/`down`; edge `x` (between
/// `x - 1` and `x`) lives at the same index of `edge_local`.
#[derive(Debug, Clone)]
pub struct CrossingLedger {
    base: i64,
    up: Vec<u64>,
    down: Vec<u64>,
    edge_local: Vec<u64>,
    lo: i64,
    hi: i64,
    max_edge_local: u64,
    favorite_edges: Vec<i64>,
    max_down: u64,
    favorite_down_sites: Vec<i64>,
}

impl Default for CrossingLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl CrossingLedger {
    pub fn new() -> Self {
        let cap = 64usize;
        Self {
            base: -(cap as i64 / 2),
            up: vec![0; cap],
            down: vec![0; cap],
            edge_local: vec![0; cap],
            lo: 0,
            hi: 0,
            max_edge_local: 0,
            favorite_edges: Vec::new(),
            max_down: 0,
            // candidates are sites x whose edge x + 1 has been crossed
            favorite_down_sites: Vec::new(),
        }
    }

    #[inline]
    fn idx(&self, x: i64) -> Option<usize> {
        let i = x - self.base;
        (i >= 0 && (i as usize) < self.up.len()).then_some(i as usize)
    }

    fn grow_to(&mut self, x: i64) {
        let len = self.up.len() as i64;
        let mut new_lo = self.base;
        let mut new_hi = self.base + len - 1;
        while x < new_lo || x > new_hi {
            let span = new_hi - new_lo + 1;
            if x < new_lo {
                new_lo -= span;
            } else {
                new_hi += span;
            }
        }
        let new_len = (new_hi - new_lo + 1) as usize;
        let shift = (self.base - new_lo) as usize;
        for v in [&mut self.up, &mut self.down, &mut self.edge_local] {
            let mut nv = vec![0u64; new_len];
            nv[shift..shift + v.len()].copy_from_slice(v);
            *v = nv;
        }
        self.base = new_lo;
    }

    /// Record one jump `prev -> cur` with `|cur - prev| = 1`.
    #[inline]
    pub fn record(&mut self, prev: i64, cur: i64) {
        debug_assert_eq!((cur - prev).abs(), 1);
        if self.idx(cur).is_none() {
            self.grow_to(cur);
        }
        let base = self.base;
        let ci = (cur - base) as usize;
        let new_site = cur < self.lo || cur > self.hi;
        if new_site {
            self.lo = self.lo.min(cur);
            self.hi = self.hi.max(cur);
        }

        let edge = if cur > prev {
            self.up[ci] += 1;
            cur
        } else {
            self.down[ci] += 1;
            self.note_down(cur, self.down[ci]);
            prev
        };
        if new_site && cur > prev && self.max_down == 0 {
            // prev just became a candidate and ties at zero downcrossings
            self.favorite_down_sites.push(prev);
        }

        let ei = (edge - base) as usize;
        self.edge_local[ei] += 1;
        let l = self.edge_local[ei];
        if l > self.max_edge_local {
            self.max_edge_local = l;
            self.favorite_edges.clear();
            self.favorite_edges.push(edge);
        } else if l == self.max_edge_local {
            insert_sorted(&mut self.favorite_edges, edge);
        }
    }

    #[inline]
    fn note_down(&mut self, site: i64, count: u64) {
        if count > self.max_down {
            self.max_down = count;
            self.favorite_down_sites.clear();
            self.favorite_down_sites.push(site);
        } else if count == self.max_down {
            insert_sorted(&mut self.favorite_down_sites, site);
        }
    }

    /// ξ_U(x, n): steps landing on `x` from `x - 1`.
    #[inline]
    pub fn xi_up(&self, x: i64) -> u64 {
        self.idx(x).map_or(0, |i| self.up[i])
    }

    /// ξ_D(x, n): steps landing on `x` from `x + 1`.
    #[inline]
    pub fn xi_down(&self, x: i64) -> u64 {
        self.idx(x).map_or(0, |i| self.down[i])
    }

    /// L(x, n): jumps across edge `x`.
    #[inline]
    pub fn edge_local(&self, x: i64) -> u64 {
        self.idx(x).map_or(0, |i| self.edge_local[i])
    }

    /// Visited sites `[lo, hi]`.
    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn max_edge_local(&self) -> u64 {
        self.max_edge_local
    }

    pub fn max_down(&self) -> u64 {
        self.max_down
    }

    /// 𝒦(n), sorted ascending.
    pub fn favorite_edges(&self) -> &[i64] {
        &self.favorite_edges
    }

    /// 𝒰(n) over sites x whose edge x + 1 has been crossed, sorted ascending.
    pub fn favorite_down_sites(&self) -> &[i64] {
        &self.favorite_down_sites
    }

    pub fn is_favorite_down(&self, x: i64) -> bool {
        self.favorite_down_sites.binary_search(&x).is_ok()
    }

    /// Ũ(n) = min{|x| : x ∈ 𝒦(n)}; `None` before the first step.
    pub fn min_abs_favorite_edge(&self) -> Option<u64> {
        min_abs(&self.favorite_edges)
    }

    /// U(n) = min{|x| : x ∈ 𝒰(n)}.
    pub fn min_abs_favorite_down(&self) -> Option<u64> {
        min_abs(&self.favorite_down_sites)
    }

    /// Argmax sets recomputed by scanning the dense arrays.
    pub fn brute_force_favorites(&self) -> (Vec<i64>, Vec<i64>) {
        let edges: Vec<i64> = (self.lo + 1..=self.hi).collect();
        let lmax = edges.iter().map(|&e| self.edge_local(e)).max().unwrap_or(0);
        let k = if lmax == 0 {
            Vec::new()
        } else {
            edges
                .into_iter()
                .filter(|&e| self.edge_local(e) == lmax)
                .collect()
        };
        let dmax = (self.lo..self.hi)
            .map(|x| self.xi_down(x))
            .max()
            .unwrap_or(0);
        let u = (self.lo..self.hi)
            .filter(|&x| self.xi_down(x) == dmax)
            .collect();
        (k, u)
    }

    /// Number of violated crossing identities at edge/site index `x` given
    /// the current position: one check for the ξ_U/ξ_D balance and three for
    /// the edge local time decompositions.
    pub fn identity_violations_at(&self, x: i64, position: i64) -> u32 {
        let up = self.xi_up(x) as i64;
        let down_left = self.xi_down(x - 1) as i64;
        let l = self.edge_local(x) as i64;
        let right = (0 < x && x <= position) as i64;
        let left = (position < x && x <= 0) as i64;
        let mut bad = 0;
        if up - down_left != right - left {
            bad += 1;
        }
        if l != up + down_left {
            bad += 1;
        }
        if l != 2 * up + left - right {
            bad += 1;
        }
        if l != 2 * down_left + right - left {
            bad += 1;
        }
        bad
    }

    /// Identity check over every index that can carry a nonzero term.
    pub fn identity_violations_all(&self, position: i64) -> u64 {
        (self.lo..=self.hi + 1)
            .map(|x| self.identity_violations_at(x, position) as u64)
            .sum()
    }

    /// Snapshot of ξ_D over `[lo, hi]`.
    pub fn down_profile(&self, lo: i64, hi: i64) -> Vec<u64> {
        (lo..=hi).map(|x| self.xi_down(x)).collect()
    }
}

fn insert_sorted(v: &mut Vec<i64>, x: i64) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

fn min_abs(v: &[i64]) -> Option<u64> {
    if v.is_empty() {
        return None;
    }
    let pos = v.partition_point(|&x| x < 0);
    let right = v.get(pos).map(|&x| x.unsigned_abs());
    let left = pos.checked_sub(1).map(|i| v[i].unsigned_abs());
    match (left, right) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Favorite-set view emitted at probe times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: u64,
    pub position: i64,
    pub previous: i64,
    pub favorite_edges: Vec<i64>,
    pub favorite_down_sites: Vec<i64>,
    pub max_edge_local: u64,
    pub max_down: u64,
    /// Ũ(n)
    pub min_favorite_edge: Option<u64>,
    /// U(n)
    pub min_favorite_down: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_abs_cases() {
        assert_eq!(min_abs(&[]), None);
        assert_eq!(min_abs(&[-5, -2]), Some(2));
        assert_eq!(min_abs(&[3, 9]), Some(3));
        assert_eq!(min_abs(&[-4, 1, 7]), Some(1));
        assert_eq!(min_abs(&[-1, 0, 2]), Some(0));
    }

    #[test]
    fn growth_preserves_counts() {
        let mut l = CrossingLedger::new();
        let mut pos = 0;
        for _ in 0..200 {
            l.record(pos, pos + 1);
            pos += 1;
        }
        for _ in 0..400 {
            l.record(pos, pos - 1);
            pos -= 1;
        }
        assert_eq!(l.range(), (-200, 200));
        assert_eq!(l.edge_local(1), 2);
        assert_eq!(l.edge_local(-199), 1);
        assert_eq!(l.xi_down(-200), 1);
        assert_eq!(l.identity_violations_all(pos), 0);
    }
}
