//! Exhaustive path enumeration for small horizons, and closed-form laws of
//! stopped downcrossing counts.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

pub const MAX_HORIZON: usize = 24;

/// Prefix depth used to split the path space into independent work items.
const SPLIT_DEPTH: usize = 8;

/// Exact pmf with masses `numerators[i] / 2^denominator_log2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub statistic: String,
    pub n: usize,
    pub support: Vec<u64>,
    pub numerators: Vec<u64>,
    pub denominator_log2: u32,
}

impl ExactDistribution {
    fn from_histogram(statistic: &str, n: usize, hist: &[u64]) -> Self {
        let (support, numerators) = hist
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v as u64, c))
            .unzip();
        Self {
            statistic: statistic.to_string(),
            n,
            support,
            numerators,
            denominator_log2: n as u32,
        }
    }

    pub fn numerator(&self, value: u64) -> u64 {
        self.support
            .iter()
            .position(|&v| v == value)
            .map_or(0, |i| self.numerators[i])
    }

    pub fn mass(&self, value: u64) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerator(value)),
            BigInt::one() << self.denominator_log2,
        )
    }

    pub fn probability(&self, value: u64) -> f64 {
        self.numerator(value) as f64 / (self.denominator_log2 as f64).exp2()
    }

    /// True iff the numerators add up to exactly 2^n.
    pub fn is_normalized(&self) -> bool {
        let total: u128 = self.numerators.iter().map(|&c| c as u128).sum();
        total == 1u128 << self.denominator_log2
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Read-only view of an enumerated path at its horizon.
pub struct PathView<'a> {
    e: &'a Enumerator,
}

impl PathView<'_> {
    pub fn favorite_edge_count(&self) -> u64 {
        self.e.n_max_l as u64
    }

    pub fn favorite_down_count(&self) -> u64 {
        if self.e.max_d == 0 {
            // only upward steps so far: every site left of the maximum ties
            (self.e.hi - self.e.lo) as u64
        } else {
            self.e.n_max_d as u64
        }
    }

    /// Ũ: smallest |x| over favorite edges.
    pub fn min_favorite_edge(&self) -> u64 {
        let e = self.e;
        (e.lo + 1..=e.hi)
            .filter(|&x| e.edge[e.ix(x)] == e.max_l)
            .map(|x| x.unsigned_abs())
            .min()
            .unwrap_or(0)
    }

    /// Number of times m ≤ n with exactly three favorite edges.
    pub fn f3_count(&self) -> u64 {
        self.e.f3 as u64
    }

    /// Identity failures summed over every step, plus a full sweep now.
    pub fn identity_violations(&self) -> u64 {
        let e = self.e;
        let sweep: u64 = (e.lo..=e.hi + 1).map(|x| e.violations_at(x) as u64).sum();
        e.viol as u64 + sweep
    }
}

pub trait PathStatistic: Named + Send + Sync {
    fn value(&self, path: &PathView<'_>) -> u64;
}

macro_rules! path_statistic {
    ($ty:ident, $name:literal, $method:ident) => {
        struct $ty;
        impl Named for $ty {
            fn name(&self) -> &'static str {
                $name
            }
        }
        impl PathStatistic for $ty {
            fn value(&self, path: &PathView<'_>) -> u64 {
                path.$method()
            }
        }
    };
}

path_statistic!(Favorites, "favorites", favorite_edge_count);
path_statistic!(DownFavorites, "down-favorites", favorite_down_count);
path_statistic!(MinFavoriteEdge, "min-favorite-edge", min_favorite_edge);
path_statistic!(F3Count, "f3-count", f3_count);
path_statistic!(
    IdentityViolations,
    "identity-violations",
    identity_violations
);

pub fn statistics() -> Registry<dyn PathStatistic> {
    Registry::<dyn PathStatistic>::new("statistic")
        .with(Box::new(Favorites))
        .with(Box::new(DownFavorites))
        .with(Box::new(MinFavoriteEdge))
        .with(Box::new(F3Count))
        .with(Box::new(IdentityViolations))
}

#[derive(Clone, Copy)]
struct Saved {
    pos: i64,
    lo: i64,
    hi: i64,
    max_l: u32,
    n_max_l: u32,
    max_d: u32,
    n_max_d: u32,
    f3: u32,
    viol: u32,
}

/// Depth-first path walker with O(1) do/undo per step.
struct Enumerator {
    off: i64,
    up: Vec<u32>,
    down: Vec<u32>,
    edge: Vec<u32>,
    pos: i64,
    lo: i64,
    hi: i64,
    max_l: u32,
    n_max_l: u32,
    max_d: u32,
    n_max_d: u32,
    f3: u32,
    viol: u32,
}

impl Enumerator {
    fn new(n: usize) -> Self {
        let len = 2 * n + 4;
        Self {
            off: n as i64 + 2,
            up: vec![0; len],
            down: vec![0; len],
            edge: vec![0; len],
            pos: 0,
            lo: 0,
            hi: 0,
            max_l: 0,
            n_max_l: 0,
            max_d: 0,
            n_max_d: 0,
            f3: 0,
            viol: 0,
        }
    }

    #[inline]
    fn ix(&self, x: i64) -> usize {
        (x + self.off) as usize
    }

    fn violations_at(&self, x: i64) -> u32 {
        let up = self.up[self.ix(x)] as i64;
        let dl = self.down[self.ix(x - 1)] as i64;
        let l = self.edge[self.ix(x)] as i64;
        let right = (0 < x && x <= self.pos) as i64;
        let left = (self.pos < x && x <= 0) as i64;
        (up - dl != right - left) as u32
            + (l != up + dl) as u32
            + (l != 2 * up + left - right) as u32
            + (l != 2 * dl + right - left) as u32
    }

    fn save(&self) -> Saved {
        Saved {
            pos: self.pos,
            lo: self.lo,
            hi: self.hi,
            max_l: self.max_l,
            n_max_l: self.n_max_l,
            max_d: self.max_d,
            n_max_d: self.n_max_d,
            f3: self.f3,
            viol: self.viol,
        }
    }

    /// Apply one step; returns what `undo` needs.
    #[inline]
    fn step(&mut self, up_step: bool) -> Saved {
        let saved = self.save();
        let prev = self.pos;
        let cur = if up_step { prev + 1 } else { prev - 1 };
        self.pos = cur;
        self.lo = self.lo.min(cur);
        self.hi = self.hi.max(cur);
        let ci = self.ix(cur);
        let e = if up_step {
            self.up[ci] += 1;
            cur
        } else {
            self.down[ci] += 1;
            let d = self.down[ci];
            if d > self.max_d {
                self.max_d = d;
                self.n_max_d = 1;
            } else if d == self.max_d {
                self.n_max_d += 1;
            }
            prev
        };
        let ei = self.ix(e);
        self.edge[ei] += 1;
        let l = self.edge[ei];
        if l > self.max_l {
            self.max_l = l;
            self.n_max_l = 1;
        } else if l == self.max_l {
            self.n_max_l += 1;
        }
        if self.n_max_l == 3 {
            self.f3 += 1;
        }
        // only edge e's identities can change on this step
        self.viol += self.violations_at(e);
        saved
    }

    #[inline]
    fn undo(&mut self, up_step: bool, s: Saved) {
        let cur = self.pos;
        let prev = s.pos;
        let ci = self.ix(cur);
        let e = if up_step {
            self.up[ci] -= 1;
            cur
        } else {
            self.down[ci] -= 1;
            prev
        };
        let ei = self.ix(e);
        self.edge[ei] -= 1;
        self.pos = s.pos;
        self.lo = s.lo;
        self.hi = s.hi;
        self.max_l = s.max_l;
        self.n_max_l = s.n_max_l;
        self.max_d = s.max_d;
        self.n_max_d = s.n_max_d;
        self.f3 = s.f3;
        self.viol = s.viol;
    }

    fn dfs(&mut self, remaining: usize, stat: &dyn PathStatistic, hist: &mut Vec<u64>) {
        if remaining == 0 {
            let v = stat.value(&PathView { e: self }) as usize;
            if v >= hist.len() {
                hist.resize(v + 1, 0);
            }
            hist[v] += 1;
            return;
        }
        for up_step in [true, false] {
            let s = self.step(up_step);
            self.dfs(remaining - 1, stat, hist);
            self.undo(up_step, s);
        }
    }
}

fn add_into(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if b.len() > a.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Exact law of `statistic` at horizon `n` over all 2^n paths.
pub fn enumerate(n: usize, statistic: &str) -> Result<ExactDistribution> {
    if n > MAX_HORIZON {
        return Err(Error::HorizonTooLarge(n));
    }
    let registry = statistics();
    let stat = registry.get(statistic)?;
    let depth = n.min(SPLIT_DEPTH);
    let hist = (0u64..1 << depth)
        .into_par_iter()
        .map(|prefix| {
            let mut en = Enumerator::new(n);
            for i in 0..depth {
                en.step(prefix >> i & 1 == 1);
            }
            let mut hist = Vec::new();
            en.dfs(n - depth, stat, &mut hist);
            hist
        })
        .reduce(Vec::new, add_into);
    Ok(ExactDistribution::from_histogram(stat.name(), n, &hist))
}

/// Exact pmf of ξ_D(y, T_U(x − 1, 1)) truncated to `0..=max_j`, with the
/// remaining mass kept exactly in `tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedPmf {
    pub x: i64,
    pub k: u64,
    pub y: i64,
    pub masses: Vec<BigRational>,
    pub tail: BigRational,
}

impl StoppedPmf {
    pub fn to_f64(&self) -> Vec<f64> {
        self.masses.iter().map(ratio_to_f64).collect()
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Linear-fractional law: P(0) = p0, P(j) = a·r^{j−1} for j ≥ 1.
fn linear_fractional(
    p0: BigRational,
    a: BigRational,
    r: BigRational,
    max_j: u64,
) -> Vec<BigRational> {
    let mut out = vec![p0];
    let mut term = a;
    for _ in 1..=max_j {
        out.push(term.clone());
        term *= &r;
    }
    out
}

/// First-step closed forms for external x ∈ {2, 3} and k = 0.
///
/// Below the origin (y = −d) each excursion from y + 1 downward is a
/// gambler's-ruin trial, which makes the count linear-fractional.
pub fn exact_stopped_pmf(x: i64, k: u64, y: i64, max_j: u64) -> Result<StoppedPmf> {
    if k != 0 || !(x == 2 || x == 3) {
        return Err(Error::Unsupported(format!(
            "exact stopped pmf is available for x in {{2, 3}} and k = 0, got x = {x}, k = {k}"
        )));
    }
    let point_mass = || {
        let mut m = vec![BigRational::zero(); max_j as usize + 1];
        m[0] = BigRational::one();
        m
    };
    let masses = match (x, y) {
        (2, y) if y >= 0 => point_mass(),
        (3, y) if y >= 1 => point_mass(),
        (3, 0) => linear_fractional(rat(1, 2), rat(1, 4), rat(1, 2), max_j),
        (2, y) => {
            let d = -y;
            linear_fractional(
                rat(d, d + 1),
                rat(1, (d + 1) * (d + 1)),
                rat(d, d + 1),
                max_j,
            )
        }
        (_, y) => {
            let d = -y;
            linear_fractional(
                rat(d, d + 2),
                rat(2, (d + 2) * (d + 2)),
                rat(d + 1, d + 2),
                max_j,
            )
        }
    };
    let total: BigRational = masses
        .iter()
        .cloned()
        .fold(BigRational::zero(), |a, b| a + b);
    Ok(StoppedPmf {
        x,
        k,
        y,
        masses,
        tail: BigRational::one() - total,
    })
}
