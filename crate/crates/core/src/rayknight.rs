//! Patched branching profiles and their comparison with stopped walk
//! downcrossing profiles.
//!
//! Sites are indexed by `y`; the walk is stopped at T_U(p, k + 1) where
//! `p = external_x − 1` is the internal patch parameter. Both regimes are
//! built outward from a seed value at site `p − 1`.

use serde::{Deserialize, Serialize};

use crate::branching::{samplers, KernelKind, OffspringSampler, DEFAULT_SAMPLER};
use crate::error::{Error, Result};
use crate::harness::map_replicas;
use crate::oracle::exact_stopped_pmf;
use crate::registry::{Named, Registry};
use crate::rng::{SeedPair, StepGenerator};
use crate::stats::{histogram, to_pmf, total_variation, two_sample_chi_square};
use crate::walk::{stopped_run, CrossingKind, StoppedProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// p ≥ 1: immigrant segment between the origin and the seam.
    Right,
    /// p ≤ 0: shifted-immigrant segment between the seam and the origin.
    Left,
}

impl Regime {
    pub fn of(p: i64) -> Self {
        if p >= 1 {
            Regime::Right
        } else {
            Regime::Left
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchedProfile {
    /// Internal patch parameter p.
    pub x: i64,
    pub k: u64,
    pub regime: Regime,
    pub convention: String,
    pub window: (i64, i64),
    pub values: Vec<u64>,
}

impl PatchedProfile {
    pub fn at(&self, y: i64) -> Option<u64> {
        let (lo, hi) = self.window;
        (lo..=hi)
            .contains(&y)
            .then(|| self.values[(y - lo) as usize])
    }
}

/// The seam value at `p − 1` and the kernel used to step from site `y`
/// to its neighbour `y ± 1`.
pub trait PatchConvention: Named + Send + Sync {
    fn seed_value(&self, p: i64, k: u64) -> u64;
    /// Kernel moving right from site `y − 1` to `y` (y ≥ p).
    fn right_kernel(&self, p: i64, y: i64) -> KernelKind;
    /// Kernel moving left from site `y + 1` to `y` (y ≤ p − 2).
    fn left_kernel(&self, p: i64, y: i64) -> KernelKind;
}

/// The three-chain patch with the seams exactly as displayed: in the right
/// regime the immigrant chain ends at the origin, in the left regime the
/// shifted chain starts from k.
pub struct AsPrinted;

impl Named for AsPrinted {
    fn name(&self) -> &'static str {
        "as-printed"
    }
}

impl PatchConvention for AsPrinted {
    fn seed_value(&self, _p: i64, k: u64) -> u64 {
        k
    }

    fn right_kernel(&self, p: i64, y: i64) -> KernelKind {
        if p <= 0 && y <= -1 {
            KernelKind::ShiftedImmigrant
        } else {
            KernelKind::Plain
        }
    }

    fn left_kernel(&self, p: i64, y: i64) -> KernelKind {
        if p >= 1 && y >= 0 {
            KernelKind::Immigrant
        } else {
            KernelKind::Plain
        }
    }
}

/// The patch that matches the walk's crossing counts.
///
/// Right regime: the origin has one more upward departure than it has
/// arrivals from above, so the step from 0 down to −1 is still immigrant.
/// Left regime: edge p is balanced at T_U(p, k + 1), so ξ_D(p − 1) = k + 1.
pub struct WalkConsistent;

impl Named for WalkConsistent {
    fn name(&self) -> &'static str {
        "walk-consistent"
    }
}

impl PatchConvention for WalkConsistent {
    fn seed_value(&self, p: i64, k: u64) -> u64 {
        if p >= 1 {
            k
        } else {
            k + 1
        }
    }

    fn right_kernel(&self, p: i64, y: i64) -> KernelKind {
        AsPrinted.right_kernel(p, y)
    }

    fn left_kernel(&self, p: i64, y: i64) -> KernelKind {
        if p >= 1 && y >= -1 {
            KernelKind::Immigrant
        } else {
            KernelKind::Plain
        }
    }
}

pub fn conventions() -> Registry<dyn PatchConvention> {
    Registry::<dyn PatchConvention>::new("patch convention")
        .with(Box::new(WalkConsistent))
        .with(Box::new(AsPrinted))
}

pub const DEFAULT_CONVENTION: &str = "walk-consistent";

fn check_window(window: (i64, i64)) -> Result<()> {
    if window.1 < window.0 {
        return Err(Error::InvalidParameter(format!(
            "empty window {}:{}",
            window.0, window.1
        )));
    }
    Ok(())
}

/// One draw of the patched profile with internal parameter `p`.
pub fn sample_patched_profile(
    p: i64,
    k: u64,
    window: (i64, i64),
    convention: &dyn PatchConvention,
    sampler: &dyn OffspringSampler,
    rng: &mut StepGenerator,
) -> Result<PatchedProfile> {
    check_window(window)?;
    let (lo, hi) = window;
    let seam = p - 1;
    let mut values = vec![0u64; (hi - lo + 1) as usize];
    let mut put = |y: i64, v: u64| {
        if (lo..=hi).contains(&y) {
            values[(y - lo) as usize] = v;
        }
    };
    let v0 = convention.seed_value(p, k);
    put(seam, v0);
    let mut v = v0;
    for y in seam + 1..=hi {
        v = sampler.sample(convention.right_kernel(p, y), v, rng);
        put(y, v);
    }
    let mut v = v0;
    for y in (lo..seam).rev() {
        v = sampler.sample(convention.left_kernel(p, y), v, rng);
        put(y, v);
    }
    Ok(PatchedProfile {
        x: p,
        k,
        regime: Regime::of(p),
        convention: convention.name().to_string(),
        window,
        values,
    })
}

/// ξ_D over `window` at T_U(external_x − 1, k + 1).
pub fn walk_profile_sampler(
    seed: SeedPair,
    external_x: i64,
    k: u64,
    window: (i64, i64),
    cap: u64,
) -> Result<StoppedProfile> {
    stopped_run(
        seed,
        external_x - 1,
        k + 1,
        CrossingKind::Upcross,
        window,
        cap,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateTest {
    pub y: i64,
    pub walk_histogram: Vec<u64>,
    pub chain_histogram: Vec<u64>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// min(1, p·m) over the m tested coordinates.
    pub p_adjusted: f64,
    pub tv: f64,
    /// TV of each side against the closed form, when one exists.
    pub walk_tv_exact: Option<f64>,
    pub chain_tv_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub external_x: i64,
    pub k: u64,
    pub window: (i64, i64),
    pub convention: String,
    pub replicas: u64,
    pub seed: u64,
    pub cap: u64,
    pub coordinates: Vec<CoordinateTest>,
    /// Sites packed into the base-3 joint fingerprint.
    pub fingerprint_sites: (i64, i64),
    pub fingerprint_p_value: f64,
    pub fingerprint_tv: f64,
    pub walk_censored: u64,
    pub walk_censor_rate: f64,
    pub chain_censored: u64,
    pub min_p_adjusted: f64,
    /// Censor rate above 5%.
    pub invalid: bool,
}

impl CompareReport {
    pub fn passes(&self, alpha: f64) -> bool {
        !self.invalid && self.min_p_adjusted > alpha
    }
}

pub const MAX_CENSOR_RATE: f64 = 0.05;
const FINGERPRINT_WIDTH: i64 = 8;

fn fingerprint(values: &[u64]) -> u64 {
    values.iter().rev().fold(0, |acc, &v| acc * 3 + v.min(2))
}

/// Sample both sides and test every window coordinate plus a clipped joint
/// fingerprint.
#[allow(clippy::too_many_arguments)]
pub fn distribution_compare(
    external_x: i64,
    k: u64,
    window: (i64, i64),
    replicas: u64,
    cap: u64,
    seed: u64,
    convention: &str,
    chain_only: bool,
) -> Result<CompareReport> {
    check_window(window)?;
    let conv_registry = conventions();
    let conv = conv_registry.get(convention)?;
    let sampler_registry = samplers();
    let sampler = sampler_registry.get(DEFAULT_SAMPLER)?;
    let p = external_x - 1;
    let (lo, hi) = window;

    // second side either the walk or, for null calibration, an independent
    // copy of the chain
    let walk: Vec<StoppedProfile> = map_replicas(seed, replicas, |s| {
        if chain_only {
            let mut rng = StepGenerator::new(s.derive(2));
            let d = sample_patched_profile(p, k, window, conv, sampler, &mut rng)?;
            Ok(StoppedProfile {
                target_site: p,
                target_count: k + 1,
                kind: CrossingKind::Upcross,
                stop_time: Some(0),
                window,
                down_profile: d.values,
                censored: false,
                cap,
            })
        } else {
            walk_profile_sampler(s, external_x, k, window, cap)
        }
    })?
    .into_iter()
    .collect::<Result<_>>()?;
    let chain: Vec<PatchedProfile> = map_replicas(seed, replicas, |s| {
        let mut rng = StepGenerator::new(s.derive(1));
        sample_patched_profile(p, k, window, conv, sampler, &mut rng)
    })?
    .into_iter()
    .collect::<Result<_>>()?;

    let kept: Vec<&StoppedProfile> = walk.iter().filter(|w| !w.censored).collect();
    let walk_censored = (walk.len() - kept.len()) as u64;
    let m = (hi - lo + 1) as f64;
    let mut coordinates = Vec::new();
    for y in lo..=hi {
        let i = (y - lo) as usize;
        let wh = histogram(kept.iter().map(|w| w.down_profile[i]));
        let ch = histogram(chain.iter().map(|c| c.values[i]));
        let test = two_sample_chi_square(&wh, &ch);
        let exact = exact_stopped_pmf(external_x, k, y, 200)
            .ok()
            .map(|e| e.to_f64());
        coordinates.push(CoordinateTest {
            y,
            chi_square: test.statistic,
            dof: test.dof,
            p_value: test.p_value,
            p_adjusted: (test.p_value * m).min(1.0),
            tv: total_variation(&to_pmf(&wh), &to_pmf(&ch)),
            walk_tv_exact: exact.as_ref().map(|e| total_variation(&to_pmf(&wh), e)),
            chain_tv_exact: exact.as_ref().map(|e| total_variation(&to_pmf(&ch), e)),
            walk_histogram: wh,
            chain_histogram: ch,
        });
    }

    let f_lo = (p - 1 - FINGERPRINT_WIDTH / 2).clamp(lo, (hi - FINGERPRINT_WIDTH + 1).max(lo));
    let f_hi = (f_lo + FINGERPRINT_WIDTH - 1).min(hi);
    let (a, b) = ((f_lo - lo) as usize, (f_hi - lo) as usize + 1);
    let wf = histogram(kept.iter().map(|w| fingerprint(&w.down_profile[a..b])));
    let cf = histogram(chain.iter().map(|c| fingerprint(&c.values[a..b])));
    let ftest = two_sample_chi_square(&wf, &cf);

    let walk_censor_rate = walk_censored as f64 / replicas.max(1) as f64;
    let min_p_adjusted = coordinates.iter().map(|c| c.p_adjusted).fold(1.0, f64::min);
    Ok(CompareReport {
        external_x,
        k,
        window,
        convention: conv.name().to_string(),
        replicas,
        seed,
        cap,
        coordinates,
        fingerprint_sites: (f_lo, f_hi),
        fingerprint_p_value: ftest.p_value,
        fingerprint_tv: total_variation(&to_pmf(&wf), &to_pmf(&cf)),
        walk_censored,
        walk_censor_rate,
        chain_censored: 0,
        min_p_adjusted,
        invalid: walk_censor_rate > MAX_CENSOR_RATE,
    })
}
