use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum; order-dependent only at the last ulp.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Streaming count/mean/M2 with Chan's pairwise merge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        Moments { count: n, mean, m2 }
    }

    pub fn from_values(values: &[f64]) -> Moments {
        let n = values.len() as u64;
        if n == 0 {
            return Moments::default();
        }
        let mean = neumaier_sum(values.iter().copied()) / n as f64;
        let m2 = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        Moments { count: n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Sample standard deviation over √count.
    pub fn se(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// A named Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub statistic: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub estimate: f64,
    pub se: f64,
    pub replicas: u64,
    pub seed: u64,
}

impl EstimateRow {
    pub fn from_values(statistic: &str, seed: u64, values: &[f64]) -> Self {
        let m = Moments::from_values(values);
        Self {
            statistic: statistic.to_string(),
            parameters: BTreeMap::new(),
            estimate: m.mean,
            se: m.se(),
            replicas: m.count,
            seed,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    /// Sample q-quantile; the SE is half the spread of the order statistics
    /// one binomial standard deviation either side of q.
    pub fn from_quantile(statistic: &str, seed: u64, values: &[f64], q: f64) -> Self {
        let n = values.len() as f64;
        let d = (q * (1.0 - q) / n).sqrt();
        let lo = quantile(values, (q - d).max(0.0));
        let hi = quantile(values, (q + d).min(1.0));
        Self {
            statistic: statistic.to_string(),
            parameters: BTreeMap::from([("quantile".to_string(), q.into())]),
            estimate: quantile(values, q),
            se: (hi - lo) / 2.0,
            replicas: values.len() as u64,
            seed,
        }
    }

    /// mean(num) / mean(den), SE by the delta method.
    pub fn from_ratio(statistic: &str, seed: u64, num: &[f64], den: &[f64]) -> Self {
        assert_eq!(num.len(), den.len(), "paired samples");
        let a = Moments::from_values(num);
        let b = Moments::from_values(den);
        let n = a.count as f64;
        let cov = neumaier_sum(
            num.iter()
                .zip(den)
                .map(|(x, y)| (x - a.mean) * (y - b.mean)),
        ) / (n - 1.0).max(1.0);
        let r = a.mean / b.mean;
        let var = (a.variance() - 2.0 * r * cov + r * r * b.variance()) / (b.mean * b.mean * n);
        Self {
            statistic: statistic.to_string(),
            parameters: BTreeMap::new(),
            estimate: r,
            se: var.max(0.0).sqrt(),
            replicas: a.count,
            seed,
        }
    }

    /// Signed distance from `target` in standard errors.
    pub fn z(&self, target: f64) -> f64 {
        (self.estimate - target) / self.se
    }
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
