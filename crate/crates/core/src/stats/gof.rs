use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

/// Minimum expected count per pooled cell.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub cells: usize,
}

impl ChiSquareResult {
    fn trivial() -> Self {
        Self {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
            cells: 1,
        }
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 || x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, x / 2.0)
}

/// Counts of each value `0..=max`.
pub fn histogram<I: IntoIterator<Item = u64>>(values: I) -> Vec<u64> {
    let mut h = Vec::new();
    for v in values {
        let v = v as usize;
        if v >= h.len() {
            h.resize(v + 1, 0);
        }
        h[v] += 1;
    }
    h
}

pub fn to_pmf(hist: &[u64]) -> Vec<f64> {
    let n: u64 = hist.iter().sum();
    hist.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

/// ½·Σ|p − q| over the union of supports.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Pool adjacent cells left to right until each has weight ≥ `min`;
/// a light remainder is folded into the last pooled cell.
fn pool_boundaries(weights: &[f64], min: f64) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= min {
            out.push((start, i + 1));
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < weights.len() {
        match out.last_mut() {
            Some(last) => last.1 = weights.len(),
            None => out.push((0, weights.len())),
        }
    }
    out
}

/// One-sample test of `observed` counts against cell probabilities.
///
/// `probs` should cover the whole support (put any tail mass in the last
/// cell); cells are pooled to expected count ≥ 5.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), probs.len(), "cell count mismatch");
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return ChiSquareResult::trivial();
    }
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let cells = pool_boundaries(&expected, MIN_EXPECTED);
    if cells.len() < 2 {
        return ChiSquareResult::trivial();
    }
    let mut stat = 0.0;
    for &(a, b) in &cells {
        let o: u64 = observed[a..b].iter().sum();
        let e: f64 = expected[a..b].iter().sum();
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
        } else if o > 0 {
            stat = f64::INFINITY;
        }
    }
    let dof = cells.len() - 1;
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value: if stat.is_finite() {
            chi_square_sf(stat, dof)
        } else {
            0.0
        },
        cells: cells.len(),
    }
}

/// Two-sample homogeneity test on aligned value histograms (2×K table).
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> ChiSquareResult {
    let len = a.len().max(b.len());
    let get = |h: &[u64], i: usize| h.get(i).copied().unwrap_or(0);
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return ChiSquareResult::trivial();
    }
    let n = (na + nb) as f64;
    let ra = na as f64 / n;
    let rb = nb as f64 / n;
    // the smaller row governs the expected-count floor
    let col: Vec<f64> = (0..len)
        .map(|i| (get(a, i) + get(b, i)) as f64 * ra.min(rb))
        .collect();
    let cells = pool_boundaries(&col, MIN_EXPECTED);
    if cells.len() < 2 {
        return ChiSquareResult::trivial();
    }
    let mut stat = 0.0;
    for &(s, e) in &cells {
        let oa: u64 = (s..e).map(|i| get(a, i)).sum();
        let ob: u64 = (s..e).map(|i| get(b, i)).sum();
        let c = (oa + ob) as f64;
        let ea = c * ra;
        let eb = c * rb;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    let dof = cells.len() - 1;
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value: chi_square_sf(stat, dof),
        cells: cells.len(),
    }
}
