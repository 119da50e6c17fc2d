//! Desk-scale embedding of the walk in a Wiener proxy.
//!
//! The proxy is a fine walk with spatial step 1/m and time step 1/m²,
//! kept in integer units: fine site u stands for u/m and fine step i for
//! time i/m². The embedded walk is read off at the successive times the
//! fine path has moved by exactly one unit from its previous exit value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::map_replicas;
use crate::rng::{SeedPair, StepGenerator};
use crate::stats::{fit, quantile, EstimateRow, FitModel, FitResult};

/// Half-width, in fine sites, of the two-sided occupation window.
pub const WINDOW_W: i64 = 4;

/// Embedded increments kept for the fairness test.
const KEPT_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingRow {
    pub x: i64,
    pub eta_r: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTrace {
    pub seed: SeedPair,
    pub m: u64,
    pub coarse_steps: u64,
    pub fine_steps: u64,
    /// Mean and sample variance of the exit-time increments in Wiener time.
    pub tau_mean: f64,
    pub tau_se: f64,
    pub sigma2: f64,
    pub up_steps: u64,
    pub first_steps: Vec<i8>,
    pub n_grid: Vec<u64>,
    /// sup_x |ξ_D(x, n) − η̂_R(x, τ_n)| on `n_grid`.
    pub discrepancy_coupled: Vec<f64>,
    /// sup_x |ξ_D(x, n) − η̂_R(x, n)|, the proxy read at Wiener time n.
    pub discrepancy_clock: Vec<f64>,
    pub halving_time: Option<u64>,
    pub halving: Vec<HalvingRow>,
}

/// Dense counters over a growing integer range.
#[derive(Debug, Clone, Default)]
struct Dense {
    base: i64,
    v: Vec<u64>,
}

impl Dense {
    fn new(half: i64) -> Self {
        Self {
            base: -half,
            v: vec![0; 2 * half as usize + 1],
        }
    }

    #[inline]
    fn add(&mut self, x: i64) {
        let mut i = x - self.base;
        if i < 0 || i as usize >= self.v.len() {
            let len = self.v.len() as i64;
            let lo = self.base.min(x - len);
            let hi = (self.base + len - 1).max(x + len);
            let mut nv = vec![0; (hi - lo + 1) as usize];
            let s = (self.base - lo) as usize;
            nv[s..s + self.v.len()].copy_from_slice(&self.v);
            self.v = nv;
            self.base = lo;
            i = x - self.base;
        }
        self.v[i as usize] += 1;
    }

    #[inline]
    fn get(&self, x: i64) -> u64 {
        let i = x - self.base;
        if i < 0 || i as usize >= self.v.len() {
            0
        } else {
            self.v[i as usize]
        }
    }

    fn span(&self) -> (i64, i64) {
        (self.base, self.base + self.v.len() as i64 - 1)
    }
}

fn sup_gap(down: &Dense, lattice: &Dense, m: u64) -> f64 {
    let (a0, a1) = down.span();
    let (b0, b1) = lattice.span();
    let scale = 1.0 / (2.0 * m as f64);
    (a0.min(b0)..=a1.max(b1))
        .map(|x| (down.get(x) as f64 - lattice.get(x) as f64 * scale).abs())
        .fold(0.0, f64::max)
}

/// Run the fine walk until `coarse_steps` exits have occurred (and at least
/// until Wiener time max(n_grid), so the clock-time discrepancy exists).
pub fn simulate_embedding(
    seed: SeedPair,
    m: u64,
    coarse_steps: u64,
    n_grid: &[u64],
    halving_time: Option<u64>,
) -> Result<EmbeddingTrace> {
    if !(8..=256).contains(&m) || !m.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "m must be a power of two in 8..=256, got {m}"
        )));
    }
    if coarse_steps == 0 || n_grid.iter().any(|&n| n == 0 || n > coarse_steps) {
        return Err(Error::InvalidParameter(
            "grid points must lie in 1..=coarse_steps".into(),
        ));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n_grid must be strictly increasing".into(),
        ));
    }
    let mi = m as i64;
    let mask = mi - 1;
    let shift = m.trailing_zeros();
    let m2 = m * m;
    let mut gen = StepGenerator::new(seed);

    // fine visits at lattice points xm, and all fine visits near the origin
    let mut lattice = Dense::new(64);
    let near = (3 + 1) * mi + WINDOW_W;
    let mut local = vec![0u64; 2 * near as usize + 1];
    let mut down = Dense::new(64);

    let clock_end = n_grid
        .last()
        .copied()
        .unwrap_or(0)
        .max(halving_time.unwrap_or(0))
        * m2;
    let mut u = 0i64;
    let mut anchor = 0i64;
    let mut fine = 0u64;
    let mut last_exit = 0u64;
    let mut k = 0u64;
    let mut up_steps = 0u64;
    let mut first_steps = Vec::new();
    let (mut sum, mut sum2) = (0.0f64, 0.0f64);
    let mut coupled = Vec::with_capacity(n_grid.len());
    let mut clock = vec![f64::NAN; n_grid.len()];
    let mut halving = Vec::new();
    let mut next_coupled = 0usize;
    let mut next_clock = 0usize;
    let mut pending_down: Vec<Option<Dense>> = vec![None; n_grid.len()];
    let mut pending_lattice: Vec<Option<Dense>> = vec![None; n_grid.len()];
    let wiener = |n: u64| n * m2;

    let local_end = halving_time.map_or(0, wiener);
    // m² is a multiple of 64, so every Wiener-time target ends a word
    while k < coarse_steps || fine < clock_end {
        let mut bits = gen.next_u64();
        let track = fine < local_end;
        for _ in 0..64 {
            u += ((bits & 1) as i64) * 2 - 1;
            bits >>= 1;
            fine += 1;
            if track && u.abs() < near {
                local[(u + near) as usize] += 1;
            }
            if u & mask == 0 {
                lattice.add(u >> shift);
                if (u - anchor).abs() == mi && k < coarse_steps {
                    let x = u >> shift;
                    let up = u > anchor;
                    if up {
                        up_steps += 1;
                    } else {
                        down.add(x);
                    }
                    if first_steps.len() < KEPT_STEPS {
                        first_steps.push(if up { 1 } else { -1 });
                    }
                    let dt = (fine - last_exit) as f64 / m2 as f64;
                    sum += dt;
                    sum2 += dt * dt;
                    last_exit = fine;
                    anchor = u;
                    k += 1;
                    if next_coupled < n_grid.len() && n_grid[next_coupled] == k {
                        coupled.push(sup_gap(&down, &lattice, m));
                        // clock side: whichever of τ_n and n·m² comes first is kept
                        let i = next_coupled;
                        match pending_lattice[i].take() {
                            Some(l) => clock[i] = sup_gap(&down, &l, m),
                            None => pending_down[i] = Some(down.clone()),
                        }
                        next_coupled += 1;
                    }
                }
            }
        }
        if next_clock < n_grid.len() && fine == wiener(n_grid[next_clock]) {
            let i = next_clock;
            match pending_down[i].take() {
                Some(d) => clock[i] = sup_gap(&d, &lattice, m),
                None => pending_lattice[i] = Some(lattice.clone()),
            }
            next_clock += 1;
        }
        if fine == local_end && local_end > 0 {
            let scale = 1.0 / (2.0 * m as f64);
            for x in -3..=3i64 {
                let c = (x * mi + near) as usize;
                let w = WINDOW_W as usize;
                let two_sided: u64 = local[c - w..c + w].iter().sum();
                halving.push(HalvingRow {
                    x,
                    eta_r: local[c] as f64 * scale,
                    eta: two_sided as f64 / (2.0 * WINDOW_W as f64 * m as f64),
                });
            }
        }
    }

    let kf = coarse_steps as f64;
    let mean = sum / kf;
    let var = (sum2 - kf * mean * mean) / (kf - 1.0).max(1.0);
    Ok(EmbeddingTrace {
        seed,
        m,
        coarse_steps,
        fine_steps: fine,
        tau_mean: mean,
        tau_se: (var / kf).sqrt(),
        sigma2: var,
        up_steps,
        first_steps,
        n_grid: n_grid.to_vec(),
        discrepancy_coupled: coupled,
        discrepancy_clock: clock,
        halving_time,
        halving,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discrepancy {
    /// Compared at the exit time τ_n.
    Coupled,
    /// Compared at Wiener time n.
    Clock,
}

/// One (n, statistic, value, seed) row of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub statistic: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub statistic: String,
    pub n_grid: Vec<u64>,
    pub medians: Vec<f64>,
    pub fit: FitResult,
    pub points: Vec<CurvePoint>,
}

fn summarize(
    statistic: &str,
    n_grid: &[u64],
    per_seed: &[(u64, Vec<f64>)],
) -> Result<CurveSummary> {
    let medians: Vec<f64> = (0..n_grid.len())
        .map(|i| quantile(&per_seed.iter().map(|s| s.1[i]).collect::<Vec<_>>(), 0.5))
        .collect();
    let pts: Vec<(f64, f64)> = n_grid
        .iter()
        .map(|&n| n as f64)
        .zip(medians.iter().copied())
        .collect();
    let points = per_seed
        .iter()
        .flat_map(|(seed, v)| {
            n_grid.iter().zip(v).map(move |(&n, &value)| CurvePoint {
                n,
                statistic: statistic.to_string(),
                value,
                seed: *seed,
            })
        })
        .collect();
    Ok(CurveSummary {
        statistic: statistic.to_string(),
        n_grid: n_grid.to_vec(),
        medians,
        fit: fit(FitModel::LogLog, &pts)?,
        points,
    })
}

/// Median discrepancy across traces and its log-log slope.
pub fn discrepancy_curve(traces: &[EmbeddingTrace], which: Discrepancy) -> Result<CurveSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidParameter("no traces".into()))?;
    let per_seed: Vec<(u64, Vec<f64>)> = traces
        .iter()
        .map(|t| {
            let v = match which {
                Discrepancy::Coupled => t.discrepancy_coupled.clone(),
                Discrepancy::Clock => t.discrepancy_clock.clone(),
            };
            (t.seed.stream_index, v)
        })
        .collect();
    let name = match which {
        Discrepancy::Coupled => "discrepancy_coupled",
        Discrepancy::Clock => "discrepancy_clock",
    };
    summarize(name, &first.n_grid, &per_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTrace {
    pub seed: SeedPair,
    pub n_grid: Vec<u64>,
    /// sup_x |ξ_D(x + 1, n) − ξ_D(x, n)|
    pub sup_gap: Vec<f64>,
    /// |ξ_D(1, n) − ξ_D(0, n)|
    pub origin_gap: Vec<f64>,
    /// ξ*(n), the largest site local time.
    pub xi_star: Vec<f64>,
}

/// Plain walk observed on `n_grid`.
pub fn neighbor_gap_run(seed: SeedPair, n_grid: &[u64]) -> Result<GapTrace> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n_grid must be positive and strictly increasing".into(),
        ));
    }
    let mut gen = StepGenerator::new(seed);
    let mut down = Dense::new(256);
    let mut visits = Dense::new(256);
    let mut xi_max = 0u64;
    let mut pos = 0i64;
    let mut t = GapTrace {
        seed,
        n_grid: n_grid.to_vec(),
        sup_gap: vec![],
        origin_gap: vec![],
        xi_star: vec![],
    };
    let mut n = 0u64;
    for &target in n_grid {
        while n < target {
            let up = gen.next_bit();
            pos += if up { 1 } else { -1 };
            if !up {
                down.add(pos);
            }
            visits.add(pos);
            xi_max = xi_max.max(visits.get(pos));
            n += 1;
        }
        let (lo, hi) = down.span();
        let gap = (lo - 1..=hi)
            .map(|x| down.get(x + 1).abs_diff(down.get(x)))
            .max()
            .unwrap_or(0);
        t.sup_gap.push(gap as f64);
        t.origin_gap.push(down.get(1).abs_diff(down.get(0)) as f64);
        t.xi_star.push(xi_max as f64);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub curve: CurveSummary,
    /// Ê|ξ_D(1, n) − ξ_D(0, n)|⁴ / n^{1.1} on the grid.
    pub fourth_moment_ratio: Vec<EstimateRow>,
    /// ξ*(n) / √(2n log log n) per trace at the last grid point.
    pub kesten_ratio: Vec<f64>,
}

pub fn neighbor_gap_curve(traces: &[GapTrace]) -> Result<GapSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidParameter("no traces".into()))?;
    let per_seed: Vec<(u64, Vec<f64>)> = traces
        .iter()
        .map(|t| (t.seed.stream_index, t.sup_gap.clone()))
        .collect();
    let curve = summarize("neighbor_gap", &first.n_grid, &per_seed)?;
    let fourth = first
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let vals: Vec<f64> = traces
                .iter()
                .map(|t| t.origin_gap[i].powi(4) / (n as f64).powf(1.1))
                .collect();
            EstimateRow::from_values("fourth_moment_ratio", first.seed.master_seed, &vals)
                .param("n", n)
        })
        .collect();
    let last = first.n_grid.len() - 1;
    let nl = first.n_grid[last] as f64;
    let norm = (2.0 * nl * nl.ln().ln()).sqrt();
    let kesten_ratio = traces.iter().map(|t| t.xi_star[last] / norm).collect();
    Ok(GapSummary {
        curve,
        fourth_moment_ratio: fourth,
        kesten_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    /// Empirical pmf of M_0(0, 1) = ξ_D(1, α_1), last cell holding ≥ len − 1.
    pub m0_histogram: Vec<u64>,
    pub p01: EstimateRow,
    pub p10: EstimateRow,
    pub mean_xi_d1: EstimateRow,
    pub censored: u64,
    pub censor_rate: f64,
    /// Censor rate above 1%.
    pub invalid: bool,
}

pub const BLOCK_CAP: u64 = 10_000_000;
pub const MAX_BLOCK_CENSOR_RATE: f64 = 0.01;

/// Downcrossings to 1 before the first downcrossing to 0 (α_1).
fn m0_sample(rng: &mut StepGenerator, cap: u64) -> Option<u64> {
    let mut pos = 0i64;
    let mut m = 0u64;
    for _ in 0..cap {
        let up = rng.next_bit();
        pos += if up { 1 } else { -1 };
        if !up {
            if pos == 1 {
                m += 1;
            } else if pos == 0 {
                return Some(m);
            }
        }
    }
    None
}

/// Whether a downcrossing to 0 occurs between the first and second
/// downcrossings to 1.
fn m1_10_nonzero(rng: &mut StepGenerator, cap: u64) -> Option<bool> {
    let mut pos = 0i64;
    let mut seen = 0u32;
    let mut hit = false;
    for _ in 0..cap {
        let up = rng.next_bit();
        pos += if up { 1 } else { -1 };
        if !up {
            if pos == 1 {
                seen += 1;
                if seen == 2 {
                    return Some(hit);
                }
            } else if pos == 0 && seen == 1 {
                hit = true;
            }
        }
    }
    None
}

pub fn block_distribution(seed: u64, replicas: u64, cap: u64) -> Result<BlockReport> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("need at least 2 replicas".into()));
    }
    let runs: Vec<(Option<u64>, Option<bool>)> = map_replicas(seed, replicas, |s| {
        let a = m0_sample(&mut StepGenerator::new(s), cap);
        let b = m1_10_nonzero(&mut StepGenerator::new(s.derive(1)), cap);
        (a, b)
    })?;
    let m0: Vec<u64> = runs.iter().filter_map(|r| r.0).collect();
    let b: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.1)
        .map(|h| h as u64 as f64)
        .collect();
    let censored = 2 * replicas - m0.len() as u64 - b.len() as u64;
    let mut hist = vec![0u64; 16];
    for &v in &m0 {
        hist[(v as usize).min(15)] += 1;
    }
    let nonzero: Vec<f64> = m0.iter().map(|&v| (v > 0) as u64 as f64).collect();
    let means: Vec<f64> = m0.iter().map(|&v| v as f64).collect();
    let censor_rate = censored as f64 / (2 * replicas) as f64;
    Ok(BlockReport {
        m0_histogram: hist,
        p01: EstimateRow::from_values("p(0,1)", seed, &nonzero),
        p10: EstimateRow::from_values("p(1,0)", seed, &b),
        mean_xi_d1: EstimateRow::from_values("E xi_D(1,alpha_1)", seed, &means),
        censored,
        censor_rate,
        invalid: censor_rate > MAX_BLOCK_CENSOR_RATE,
    })
}
