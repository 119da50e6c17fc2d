//! Critical geometric Galton-Watson kernels: the plain chain Y (π), the
//! immigrant chain Z (ρ) and the shifted-immigrant chain R (ρ*).

mod chain;
mod exact;
mod window;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::factorial::ln_binomial;

use crate::registry::{Named, Registry};
use crate::rng::StepGenerator;

pub use chain::{
    chain_run, hitting_moments, lemma41_statistic, ruin_probability, ChainTrajectory,
    HittingEstimate, Lemma41Estimate, StopRule, CHAIN_BUDGET,
};
pub use exact::{
    kernel_bands, kernel_power, kernel_tail, martingale_checks, monotonicity_violations, row_sum,
    BandReport, ExactPmf, MartingaleReport, OVERFLOW_TOLERANCE,
};
pub use window::KWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Plain,
    Immigrant,
    ShiftedImmigrant,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [Self::Plain, Self::Immigrant, Self::ShiftedImmigrant];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::Immigrant => "immigrant",
            Self::ShiftedImmigrant => "shifted-immigrant",
        }
    }

    /// Number of geometric offspring summed and the constant added, so the
    /// next state is `shift + Σ_{1..=count} X`.
    #[inline]
    pub fn offspring(&self, i: u64) -> (u64, u64) {
        match self {
            Self::Plain => (i, 0),
            Self::Immigrant => (i + 1, 0),
            Self::ShiftedImmigrant => (i, 1),
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| crate::Error::UnknownName {
                kind: "kernel",
                name: s.to_string(),
                available: "plain, immigrant, shifted-immigrant".into(),
            })
    }
}

/// Largest i + j evaluated through exact integer binomials.
const EXACT_LIMIT: u64 = 60;

fn binomial_u64(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut c = 1u64;
    for t in 0..k {
        // exact at every step: c·(n−t) is divisible by t+1
        c = c * (n - t) / (t + 1);
    }
    c
}

/// π(i, j) = 2^{−i−j}·C(i+j−1, j) for i ≥ 1, δ_0(j) for i = 0.
pub fn pi(i: u64, j: u64) -> f64 {
    if i == 0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    let n = i + j;
    if n <= EXACT_LIMIT {
        binomial_u64(n - 1, j) as f64 * (-(n as f64)).exp2()
    } else {
        pi_log(i, j)
    }
}

fn pi_log(i: u64, j: u64) -> f64 {
    let n = i + j;
    (ln_binomial(n - 1, j) - n as f64 * std::f64::consts::LN_2).exp()
}

pub fn kernel_eval(kind: KernelKind, i: u64, j: u64) -> f64 {
    match kind {
        KernelKind::Plain => pi(i, j),
        KernelKind::Immigrant => pi(i + 1, j),
        KernelKind::ShiftedImmigrant => {
            if j == 0 {
                0.0
            } else {
                pi(i, j - 1)
            }
        }
    }
}

/// P(Σ_{1..=m} X > j) for geometric X, as a regularized incomplete beta.
fn negbin_upper(m: u64, j: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    beta_reg((j + 1) as f64, m as f64, 0.5)
}

pub trait OffspringSampler: Named + Send + Sync {
    fn sample(&self, kind: KernelKind, i: u64, rng: &mut StepGenerator) -> u64;
}

/// Sums geometric offspring straight from fair bits.
pub struct GeometricSum;

impl Named for GeometricSum {
    fn name(&self) -> &'static str {
        "geometric-sum"
    }
}

impl OffspringSampler for GeometricSum {
    #[inline]
    fn sample(&self, kind: KernelKind, i: u64, rng: &mut StepGenerator) -> u64 {
        let (count, shift) = kind.offspring(i);
        shift + rng.geometric_sum(count)
    }
}

/// Walks the cumulative row of the kernel against one uniform.
pub struct InverseCdf;

impl Named for InverseCdf {
    fn name(&self) -> &'static str {
        "inverse-cdf"
    }
}

impl OffspringSampler for InverseCdf {
    fn sample(&self, kind: KernelKind, i: u64, rng: &mut StepGenerator) -> u64 {
        let (m, shift) = kind.offspring(i);
        if m == 0 {
            return shift;
        }
        let u = rng.next_f64();
        let m_f = m as f64;
        // log π(m, j) by the ratio π(m, j+1)/π(m, j) = (m + j)/(2(j + 1))
        let mut ln_p = -m_f * std::f64::consts::LN_2;
        let mut cdf = 0.0;
        let far = m_f + 60.0 * (2.0 * m_f).sqrt() + 60.0;
        let mut j = 0u64;
        loop {
            cdf += ln_p.exp();
            if cdf > u || j as f64 > far {
                return shift + j;
            }
            ln_p += ((m + j) as f64).ln() - std::f64::consts::LN_2 - ((j + 1) as f64).ln();
            j += 1;
        }
    }
}

pub fn samplers() -> Registry<dyn OffspringSampler> {
    Registry::<dyn OffspringSampler>::new("sampler")
        .with(Box::new(GeometricSum))
        .with(Box::new(InverseCdf))
}

pub const DEFAULT_SAMPLER: &str = "geometric-sum";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedPair;
    use crate::stats::{chi_square_gof, histogram, to_pmf, total_variation};

    #[test]
    fn kernel_values() {
        assert_eq!(pi(1, 0), 0.5);
        assert_eq!(pi(1, 1), 0.25);
        assert_eq!(pi(0, 0), 1.0);
        assert_eq!(pi(0, 5), 0.0);
        assert_eq!(kernel_eval(KernelKind::Immigrant, 0, 0), 0.5);
        assert_eq!(kernel_eval(KernelKind::ShiftedImmigrant, 1, 1), 0.5);
        assert_eq!(kernel_eval(KernelKind::ShiftedImmigrant, 3, 0), 0.0);
        // π(2, 1) = 2^{-3}·C(2, 1)
        assert_eq!(pi(2, 1), 0.25);
    }

    #[test]
    fn exact_and_log_routes_agree_at_the_crossover() {
        for n in 40..=EXACT_LIMIT {
            for i in 1..n {
                let j = n - i;
                let (a, b) = (pi(i, j), pi_log(i, j));
                assert!((a - b).abs() <= 1e-13 * a, "i={i} j={j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tail_matches_direct_sum() {
        for m in [1u64, 3, 17] {
            let head: f64 = (0..=10).map(|j| pi(m, j)).sum();
            assert!((1.0 - head - negbin_upper(m, 10)).abs() < 1e-14);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.as_str().parse::<KernelKind>().unwrap(), k);
        }
        assert!("nope".parse::<KernelKind>().is_err());
    }

    #[test]
    fn plain_zero_is_absorbing() {
        let mut rng = StepGenerator::new(SeedPair::new(1, 0));
        for s in samplers().names() {
            let sampler = samplers();
            let sampler = sampler.get(s).unwrap();
            assert!((0..1000).all(|_| sampler.sample(KernelKind::Plain, 0, &mut rng) == 0));
            assert!(
                (0..1000).all(|_| sampler.sample(KernelKind::ShiftedImmigrant, 4, &mut rng) >= 1)
            );
        }
    }

    #[test]
    fn plain_one_is_geometric() {
        let mut rng = StepGenerator::new(SeedPair::new(2, 0));
        let h =
            histogram((0..1_000_000).map(|_| GeometricSum.sample(KernelKind::Plain, 1, &mut rng)));
        let exact: Vec<f64> = (0..h.len() as u64).map(|j| pi(1, j)).collect();
        assert!(total_variation(&to_pmf(&h), &exact) <= 0.01);
    }

    #[test]
    fn inverse_cdf_agrees_with_rows() {
        let mut rng = StepGenerator::new(SeedPair::new(3, 0));
        for kind in KernelKind::ALL {
            for i in [1u64, 5, 50] {
                let h = histogram((0..100_000).map(|_| InverseCdf.sample(kind, i, &mut rng)));
                let mut probs: Vec<f64> = (0..h.len() as u64)
                    .map(|j| kernel_eval(kind, i, j))
                    .collect();
                let head: f64 = probs.iter().sum();
                *probs.last_mut().unwrap() += 1.0 - head;
                let r = chi_square_gof(&h, &probs);
                assert!(r.p_value > 1e-4, "{kind:?} i={i}: {r:?}");
            }
        }
    }
}
