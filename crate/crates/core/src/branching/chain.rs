use serde::{Deserialize, Serialize};

use super::{samplers, GeometricSum, KWindow, KernelKind, OffspringSampler};
use crate::error::{Error, Result};
use crate::harness::map_replicas;
use crate::rng::StepGenerator;
use crate::stats::EstimateRow;

/// Transition budget per chain run.
pub const CHAIN_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    Steps(u64),
    Hit(u64),
    Extinct,
    HitOrExtinct(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrajectory {
    pub kind: KernelKind,
    pub start: u64,
    pub states: Vec<u64>,
    /// First index with state ≥ h, for immigrant kinds.
    pub tau_h: Option<usize>,
    /// First index with state ≥ h, for the plain chain.
    pub sigma_h: Option<usize>,
    /// First index with state 0.
    pub omega: Option<usize>,
    pub censored: bool,
}

pub fn chain_run(
    kind: KernelKind,
    start: u64,
    rule: StopRule,
    sampler: &str,
    rng: &mut StepGenerator,
) -> Result<ChainTrajectory> {
    if kind != KernelKind::Plain && rule == StopRule::Extinct {
        return Err(Error::InvalidParameter(
            "only the plain chain goes extinct".into(),
        ));
    }
    let registry = samplers();
    let sampler = registry.get(sampler)?;
    let threshold = match rule {
        StopRule::Hit(h) | StopRule::HitOrExtinct(h) => Some(h),
        _ => None,
    };
    let mut t = ChainTrajectory {
        kind,
        start,
        states: vec![start],
        tau_h: None,
        sigma_h: None,
        omega: None,
        censored: false,
    };
    let mut z = start;
    loop {
        let n = t.states.len() - 1;
        if let Some(h) = threshold {
            if z >= h && t.tau_h.is_none() && t.sigma_h.is_none() {
                match kind {
                    KernelKind::Plain => t.sigma_h = Some(n),
                    _ => t.tau_h = Some(n),
                }
            }
        }
        if z == 0 && t.omega.is_none() {
            t.omega = Some(n);
        }
        let done = match rule {
            StopRule::Steps(s) => n as u64 >= s,
            StopRule::Hit(_) => t.tau_h.or(t.sigma_h).is_some(),
            StopRule::Extinct => t.omega.is_some(),
            StopRule::HitOrExtinct(_) => t.tau_h.or(t.sigma_h).is_some() || t.omega.is_some(),
        };
        if done {
            return Ok(t);
        }
        if n as u64 >= CHAIN_BUDGET {
            t.censored = true;
            return Ok(t);
        }
        z = sampler.sample(kind, z, rng);
        t.states.push(z);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub tau: EstimateRow,
    pub z_tau: EstimateRow,
    /// Per-replica τ_h − (Z_{τ_h} − k); zero in expectation.
    pub residual: EstimateRow,
    pub censored: u64,
}

/// Monte Carlo E[τ_h] and E[Z_{τ_h}] for the immigrant chain from k.
pub fn hitting_moments(k: u64, h: u64, replicas: u64, seed: u64) -> Result<HittingEstimate> {
    if k >= h {
        return Err(Error::InvalidParameter(format!(
            "need k < h, got k = {k}, h = {h}"
        )));
    }
    let runs: Vec<Option<(u64, u64)>> = map_replicas(seed, replicas, |s| {
        let mut rng = StepGenerator::new(s);
        let mut z = k;
        let mut n = 0u64;
        while z < h {
            if n >= CHAIN_BUDGET {
                return None;
            }
            z = GeometricSum.sample(KernelKind::Immigrant, z, &mut rng);
            n += 1;
        }
        Some((n, z))
    })?;
    let done: Vec<(u64, u64)> = runs.iter().flatten().copied().collect();
    let taus: Vec<f64> = done.iter().map(|p| p.0 as f64).collect();
    let zs: Vec<f64> = done.iter().map(|p| p.1 as f64).collect();
    let res: Vec<f64> = done
        .iter()
        .map(|&(t, z)| t as f64 - (z - k) as f64)
        .collect();
    let tag = |row: EstimateRow| row.param("k", k).param("h", h);
    Ok(HittingEstimate {
        tau: tag(EstimateRow::from_values("tau_h", seed, &taus)),
        z_tau: tag(EstimateRow::from_values("z_tau_h", seed, &zs)),
        residual: tag(EstimateRow::from_values(
            "hitting_identity_residual",
            seed,
            &res,
        )),
        censored: (runs.len() - done.len()) as u64,
    })
}

/// P(plain chain from m hits 0 before reaching [h, ∞)).
pub fn ruin_probability(m: u64, h: u64, replicas: u64, seed: u64) -> Result<EstimateRow> {
    if m >= h {
        return Err(Error::InvalidParameter(format!(
            "need m < h, got m = {m}, h = {h}"
        )));
    }
    let hits: Vec<f64> = map_replicas(seed, replicas, |s| {
        let mut rng = StepGenerator::new(s);
        let mut y = m;
        // a critical chain leaves (0, h) quickly; no budget needed in practice
        for _ in 0..CHAIN_BUDGET {
            if y == 0 {
                return 1.0;
            }
            if y >= h {
                return 0.0;
            }
            y = GeometricSum.sample(KernelKind::Plain, y, &mut rng);
        }
        f64::NAN
    })?;
    let hits: Vec<f64> = hits.into_iter().filter(|v| !v.is_nan()).collect();
    Ok(EstimateRow::from_values("ruin_probability", seed, &hits)
        .param("m", m)
        .param("h", h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma41Estimate {
    /// Σ_{n=1}^{τ} (h/2 − Z_n)/(h/2) averaged over replicas.
    pub direct: EstimateRow,
    /// (2h − 1 − (Z_τ + k))(Z_τ − k)/(2h), the optional-stopping form.
    pub dual: EstimateRow,
    pub censored: u64,
}

/// The first-moment statistic of the immigrant chain stopped at τ_{(h−1)/2}.
pub fn lemma41_statistic(k: u64, h: u64, replicas: u64, seed: u64) -> Result<Lemma41Estimate> {
    if h <= 4 {
        return Err(Error::InvalidParameter(format!("need h > 4, got {h}")));
    }
    if !KWindow::CLOSED.contains(h, k) {
        return Err(Error::InvalidParameter(format!("k = {k} is outside K_{h}")));
    }
    let hf = h as f64;
    let runs: Vec<Option<(f64, f64)>> = map_replicas(seed, replicas, |s| {
        let mut rng = StepGenerator::new(s);
        let mut z = k;
        let mut sum = 0i128;
        let mut n = 0u64;
        // Z ≥ (h − 1)/2  ⇔  2Z ≥ h − 1
        while 2 * z + 1 < h {
            if n >= CHAIN_BUDGET {
                return None;
            }
            z = GeometricSum.sample(KernelKind::Immigrant, z, &mut rng);
            sum += h as i128 - 2 * z as i128;
            n += 1;
        }
        let dual = (2.0 * hf - 1.0 - (z + k) as f64) * (z - k) as f64 / (2.0 * hf);
        Some((sum as f64 / hf, dual))
    })?;
    let done: Vec<(f64, f64)> = runs.iter().flatten().copied().collect();
    let direct: Vec<f64> = done.iter().map(|p| p.0).collect();
    let dual: Vec<f64> = done.iter().map(|p| p.1).collect();
    Ok(Lemma41Estimate {
        direct: EstimateRow::from_values("lemma41_direct", seed, &direct)
            .param("k", k)
            .param("h", h),
        dual: EstimateRow::from_values("lemma41_dual", seed, &dual)
            .param("k", k)
            .param("h", h),
        censored: (runs.len() - done.len()) as u64,
    })
}
