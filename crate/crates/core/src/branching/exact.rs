use serde::{Deserialize, Serialize};

use super::{kernel_eval, negbin_upper, pi, KernelKind};
use crate::error::{Error, Result};

pub const OVERFLOW_TOLERANCE: f64 = 1e-12;

/// P(next state > j | current state i).
pub fn kernel_tail(kind: KernelKind, i: u64, j: u64) -> f64 {
    match kind {
        KernelKind::Plain => negbin_upper(i, j),
        KernelKind::Immigrant => negbin_upper(i + 1, j),
        KernelKind::ShiftedImmigrant => match j {
            0 => 1.0,
            _ => negbin_upper(i, j - 1),
        },
    }
}

/// Σ_{j ≤ head} kernel_eval(kind, i, j) plus the closed-form tail beyond.
pub fn row_sum(kind: KernelKind, i: u64, head: u64) -> f64 {
    let s: f64 = (0..=head).map(|j| kernel_eval(kind, i, j)).sum();
    s + kernel_tail(kind, i, head)
}

/// Marginal law after `steps` transitions, truncated to `0..=cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPmf {
    pub kind: KernelKind,
    pub start: u64,
    pub steps: u64,
    pub cap: u64,
    pub masses: Vec<f64>,
    /// Mass that left `0..=cap` at some step; it is not propagated further.
    pub overflow: f64,
    pub low_precision: bool,
}

impl ExactPmf {
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(j, p)| p * f(j as f64))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.overflow
    }
}

struct Truncated {
    rows: Vec<Vec<f64>>,
    leak: Vec<f64>,
}

impl Truncated {
    fn new(kind: KernelKind, cap: u64) -> Self {
        let rows = (0..=cap)
            .map(|i| (0..=cap).map(|j| kernel_eval(kind, i, j)).collect())
            .collect();
        let leak = (0..=cap).map(|i| kernel_tail(kind, i, cap)).collect();
        Self { rows, leak }
    }

    fn step(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let mut next = vec![0.0; p.len()];
        let mut lost = 0.0;
        for (i, &m) in p.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (n, r) in next.iter_mut().zip(&self.rows[i]) {
                *n += m * r;
            }
            lost += m * self.leak[i];
        }
        (next, lost)
    }
}

/// Exact marginals for 0..=steps transitions.
fn kernel_powers(kind: KernelKind, start: u64, steps: u64, cap: u64) -> Result<Vec<ExactPmf>> {
    if start > cap {
        return Err(Error::InvalidParameter(format!(
            "start {start} exceeds cap {cap}"
        )));
    }
    let t = Truncated::new(kind, cap);
    let mut p = vec![0.0; cap as usize + 1];
    p[start as usize] = 1.0;
    let mut overflow = 0.0;
    let mut out = Vec::with_capacity(steps as usize + 1);
    for s in 0..=steps {
        if s > 0 {
            let (next, lost) = t.step(&p);
            p = next;
            overflow += lost;
        }
        out.push(ExactPmf {
            kind,
            start,
            steps: s,
            cap,
            masses: p.clone(),
            overflow,
            low_precision: overflow > OVERFLOW_TOLERANCE,
        });
    }
    Ok(out)
}

pub fn kernel_power(kind: KernelKind, start: u64, steps: u64, cap: u64) -> Result<ExactPmf> {
    Ok(kernel_powers(kind, start, steps, cap)?
        .pop()
        .expect("at least the initial law"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub k: u64,
    pub n: u64,
    pub cap: u64,
    pub expected_m: f64,
    pub expected_m_prime: f64,
    pub target_m_prime: f64,
    pub overflow: f64,
}

/// E[M_n] and E[M′_n] for the immigrant chain from k.
///
/// Both martingales are affine in the one-time marginals of Z (M_n in the
/// first moments, M′_n in the first two moments of Z_n), so exact
/// marginals determine the expectations.
pub fn martingale_checks(k: u64, n: u64, cap: u64) -> Result<MartingaleReport> {
    let laws = kernel_powers(KernelKind::Immigrant, k, n, cap)?;
    let last = &laws[n as usize];
    if last.low_precision {
        return Err(Error::Overflow {
            mass: last.overflow,
            tolerance: OVERFLOW_TOLERANCE,
        });
    }
    let nf = n as f64;
    let sum: f64 = (1..=n as usize).map(|s| laws[s].mean() - s as f64).sum();
    let expected_m = sum - nf * (last.mean() - nf);
    let expected_m_prime =
        -0.25 * last.expect(|z| z * z) + nf * last.mean() - 0.5 * nf * nf + 0.25 * nf;
    Ok(MartingaleReport {
        k,
        n,
        cap,
        expected_m,
        expected_m_prime,
        target_m_prime: -(k as f64).powi(2) / 4.0,
        overflow: last.overflow,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub h: u64,
    /// Integer range of i and j with |2i − h| < 10√h.
    pub window: (u64, u64),
    pub min_scaled: f64,
    pub max_scaled: f64,
    pub argmin: (u64, u64),
    /// Cells with √h·π(i, j) outside [1e-2, 1e2].
    pub out_of_band: u64,
    pub cells: u64,
    /// √h·max_{i+j=h} π(i, j).
    pub max_diagonal_scaled: f64,
}

pub const BAND: (f64, f64) = (1e-2, 1e2);

pub fn kernel_bands(h: u64) -> BandReport {
    let s = (h as f64).sqrt();
    // |2i − h| < 10√h  ⇔  (2i − h)² < 100h
    let inside = |i: u64| {
        let d = 2 * i as i128 - h as i128;
        d * d < 100 * h as i128
    };
    let lo = (0..=h).find(|&i| inside(i)).unwrap_or(0);
    let hi = (lo..=h + 10 * (s as u64 + 1))
        .take_while(|&i| inside(i))
        .last()
        .unwrap_or(lo);
    let mut r = BandReport {
        h,
        window: (lo, hi),
        min_scaled: f64::INFINITY,
        max_scaled: 0.0,
        argmin: (0, 0),
        out_of_band: 0,
        cells: 0,
        max_diagonal_scaled: 0.0,
    };
    for i in lo.max(1)..=hi {
        for j in lo..=hi {
            let v = s * pi(i, j);
            r.cells += 1;
            if v < r.min_scaled {
                r.min_scaled = v;
                r.argmin = (i, j);
            }
            r.max_scaled = r.max_scaled.max(v);
            if !(BAND.0..=BAND.1).contains(&v) {
                r.out_of_band += 1;
            }
        }
    }
    r.max_diagonal_scaled = (1..=h).map(|i| s * pi(i, h - i)).fold(0.0, f64::max);
    r
}

/// Count of triples j < i₁ < i₂ ≤ max_i with π(i₁, j) ≤ π(i₂, j).
pub fn monotonicity_violations(max_i: u64) -> u64 {
    let n = max_i as usize + 1;
    let table: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| pi(i as u64, j as u64)).collect())
        .collect();
    let mut bad = 0;
    for j in 0..n {
        let col: Vec<f64> = table.iter().map(|row| row[j]).collect();
        for i1 in j + 1..n {
            for i2 in i1 + 1..n {
                if col[i1] <= col[i2] {
                    bad += 1;
                }
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stochastic() {
        for kind in KernelKind::ALL {
            for i in 0..=200 {
                let s = row_sum(kind, i, 2 * i + 40);
                assert!((s - 1.0).abs() <= 1e-12, "{kind:?} i={i}: {s}");
            }
        }
    }

    #[test]
    fn immigrant_one_step_from_zero_is_geometric() {
        let p = kernel_power(KernelKind::Immigrant, 0, 1, 80).unwrap();
        for (j, m) in p.masses.iter().enumerate().take(40) {
            assert_eq!(*m, (-(j as f64 + 1.0)).exp2());
        }
        assert!(!p.low_precision);
    }

    #[test]
    fn plain_zero_stays_put() {
        let p = kernel_power(KernelKind::Plain, 0, 7, 20).unwrap();
        assert_eq!(p.masses[0], 1.0);
        assert_eq!(p.overflow, 0.0);
    }

    #[test]
    fn small_cap_is_flagged() {
        let p = kernel_power(KernelKind::Immigrant, 3, 6, 10).unwrap();
        assert!(p.low_precision && p.overflow > 1e-3);
        assert!((p.total() - 1.0).abs() < 1e-12);
        assert!(matches!(
            martingale_checks(3, 6, 10),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn martingale_examples() {
        let r = martingale_checks(0, 1, 200).unwrap();
        assert!(r.expected_m.abs() < 1e-12 && r.expected_m_prime.abs() < 1e-12);
        let r = martingale_checks(3, 4, 200).unwrap();
        assert!((r.expected_m_prime + 9.0 / 4.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn monotone_in_the_parent_count() {
        assert_eq!(monotonicity_violations(60), 0);
    }

    #[test]
    fn diagonal_peak_scales_like_inverse_root() {
        let r = kernel_bands(100);
        assert_eq!(r.window, (1, 99));
        assert!(r.max_diagonal_scaled <= 0.5);
    }
}
