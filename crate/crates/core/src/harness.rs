//! Replica orchestration: seeded workers, named experiments and the
//! transience profile.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::branching::{hitting_moments, lemma41_statistic, KWindow};
use crate::embedding::{
    block_distribution, discrepancy_curve, neighbor_gap_curve, neighbor_gap_run,
    simulate_embedding, CurvePoint, Discrepancy, BLOCK_CAP,
};
use crate::error::{Error, Result};
use crate::events::{
    audit_containment_disjointness, count_path_events, EventConfig, PathCountReport,
};
use crate::rayknight::{distribution_compare, DEFAULT_CONVENTION};
use crate::registry::{Named, Registry};
use crate::rng::{SeedPair, StepGenerator};
use crate::stats::{fit, EstimateRow, FitModel, FitResult};
use crate::walk::{audit_prop24, Walk, DEFAULT_CAP};

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".into())
}

/// Run `f` on streams 0..replicas of `seed`, in parallel, results in
/// replica order. A panicking replica aborts the run and names its seed.
pub fn map_replicas<T, F>(seed: u64, replicas: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(SeedPair) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = SeedPair::new(seed, r);
            catch_unwind(AssertUnwindSafe(|| f(s))).map_err(|p| Error::ReplicaPanicked {
                seed,
                stream: r,
                message: panic_message(p),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaConfig {
    pub experiment: String,
    pub master_seed: u64,
    pub replicas: u64,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ReplicaConfig {
    pub fn new(experiment: &str, master_seed: u64, replicas: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            master_seed,
            replicas,
            params: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        match self.params.keys().find(|k| !allowed.contains(k.as_str())) {
            Some(k) => Err(Error::InvalidParameter(format!(
                "unknown parameter `{k}` for {} (accepted: {})",
                self.experiment,
                allowed.into_iter().collect::<Vec<_>>().join(", ")
            ))),
            None => Ok(()),
        }
    }

    fn bad(&self, key: &str, want: &str) -> Error {
        Error::InvalidParameter(format!("parameter `{key}` must be {want}"))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| self.bad(key, "a nonnegative integer")),
        }
    }

    pub fn i64_or(&self, key: &str, default: i64) -> Result<i64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_i64().ok_or_else(|| self.bad(key, "an integer")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| self.bad(key, "a number")),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| self.bad(key, "a string")),
        }
    }

    pub fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>> {
        match self.params.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| {
                    v.as_u64()
                        .ok_or_else(|| self.bad(key, "a list of nonnegative integers"))
                })
                .collect(),
            Some(_) => Err(self.bad(key, "a list of nonnegative integers")),
        }
    }

    /// `"a:b"` or `[a, b]`.
    pub fn window_or(&self, key: &str, default: (i64, i64)) -> Result<(i64, i64)> {
        match self.params.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => parse_window(s),
            Some(Value::Array(a)) if a.len() == 2 => match (a[0].as_i64(), a[1].as_i64()) {
                (Some(lo), Some(hi)) => Ok((lo, hi)),
                _ => Err(self.bad(key, "`a:b` or [a, b]")),
            },
            Some(_) => Err(self.bad(key, "`a:b` or [a, b]")),
        }
    }
}

pub fn parse_window(s: &str) -> Result<(i64, i64)> {
    let err = || Error::InvalidParameter(format!("window `{s}` is not of the form a:b"));
    let (a, b) = s.split_once(':').ok_or_else(err)?;
    let lo = a.trim().parse().map_err(|_| err())?;
    let hi = b.trim().parse().map_err(|_| err())?;
    if lo > hi {
        return Err(Error::InvalidParameter(format!("window `{s}` is empty")));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<EstimateRow>,
    /// Set when a validity check failed (for example a censor rate).
    pub invalid: bool,
}

pub trait Experiment: Named + Send + Sync {
    fn run(&self, cfg: &ReplicaConfig) -> Result<ExperimentOutput>;
}

macro_rules! experiment {
    ($ty:ident, $name:literal) => {
        pub struct $ty;
        impl Named for $ty {
            fn name(&self) -> &'static str {
                $name
            }
        }
    };
}

experiment!(CountEvents, "count-events");
experiment!(Hitting, "hitting");
experiment!(Lemma41, "lemma41");
experiment!(RayKnight, "rayknight");
experiment!(Embedding, "embedding");
experiment!(Transience, "transience");

pub fn experiments() -> Registry<dyn Experiment> {
    Registry::<dyn Experiment>::new("experiment")
        .with(Box::new(CountEvents))
        .with(Box::new(Hitting))
        .with(Box::new(Lemma41))
        .with(Box::new(RayKnight))
        .with(Box::new(Embedding))
        .with(Box::new(Transience))
}

pub fn run_replicas(cfg: &ReplicaConfig) -> Result<ExperimentOutput> {
    if cfg.replicas < 2 {
        return Err(Error::InvalidParameter(
            "replicas must be at least 2".into(),
        ));
    }
    experiments().get(&cfg.experiment)?.run(cfg)
}

fn exact_row(statistic: &str, seed: u64, replicas: u64, value: f64) -> EstimateRow {
    EstimateRow {
        statistic: statistic.to_string(),
        parameters: Default::default(),
        estimate: value,
        se: 0.0,
        replicas,
        seed,
    }
}

fn fit_row(statistic: &str, seed: u64, replicas: u64, f: &FitResult) -> EstimateRow {
    // SE of a least-squares slope from the residuals
    let n = f.residuals.len() as f64;
    let se = if f.correlation.abs() < 1.0 && n > 2.0 {
        f.slope.abs()
            * ((1.0 - f.correlation * f.correlation) / (f.correlation * f.correlation * (n - 2.0)))
                .sqrt()
    } else {
        0.0
    };
    exact_row(statistic, seed, replicas, f.slope)
        .param("intercept", f.intercept)
        .param("correlation", f.correlation)
        .param("model", format!("{:?}", f.model))
        .with_se(se)
}

trait WithSe {
    fn with_se(self, se: f64) -> Self;
}

impl WithSe for EstimateRow {
    fn with_se(mut self, se: f64) -> Self {
        self.se = se;
        self
    }
}

/// Summary of a batch of per-path event reports on a grid of ceilings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub h_grid: Vec<u64>,
    pub rows: Vec<EstimateRow>,
    /// E[N_H] against log H; needs three grid points.
    pub mean_fit: Option<FitResult>,
    pub containment_violations: u64,
    pub disjointness_paths: u64,
    pub n_exceeds_ntilde_literal_paths: u64,
    pub n_exceeds_ntilde_aligned_paths: u64,
    pub f3_below_n_paths: u64,
}

pub fn summarize_events(
    reports: &[PathCountReport],
    h_grid: &[u64],
    cfg: EventConfig,
    seed: u64,
) -> Result<EventSummary> {
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for &h in h_grid {
        let l = (h as f64).ln();
        let n: Vec<f64> = reports.iter().map(|r| r.n_at(h) as f64).collect();
        let nt: Vec<f64> = reports.iter().map(|r| r.n_tilde_at(h) as f64).collect();
        let n2: Vec<f64> = n.iter().map(|v| v * v / (l * l)).collect();
        let nt2: Vec<f64> = nt.iter().map(|v| v * v / l).collect();
        let above: Vec<f64> = n.iter().map(|&v| (v > l.ln()) as u64 as f64).collect();
        let mean = EstimateRow::from_values("N_H", seed, &n).param("H", h);
        means.push((h as f64, mean.estimate));
        rows.push(mean);
        rows.push(EstimateRow::from_values("Ntilde_H", seed, &nt).param("H", h));
        rows.push(EstimateRow::from_values("N_H_sq_over_log2H", seed, &n2).param("H", h));
        rows.push(
            EstimateRow::from_ratio("Ntilde_sq_over_mean_logH", seed, &nt2, &nt).param("H", h),
        );
        rows.push(EstimateRow::from_values("P(N_H>loglogH)", seed, &above).param("H", h));
    }
    let mean_fit = if means.len() >= 3 {
        Some(fit(FitModel::LogLinear, &means)?)
    } else {
        None
    };
    if let Some(f) = &mean_fit {
        rows.push(fit_row("N_H_vs_logH_slope", seed, reports.len() as u64, f));
    }
    let mut s = EventSummary {
        h_grid: h_grid.to_vec(),
        rows,
        mean_fit,
        containment_violations: 0,
        disjointness_paths: 0,
        n_exceeds_ntilde_literal_paths: 0,
        n_exceeds_ntilde_aligned_paths: 0,
        f3_below_n_paths: 0,
    };
    for r in reports {
        let a = audit_containment_disjointness(r, cfg);
        s.containment_violations += a.containment_violations.len() as u64;
        s.disjointness_paths += !a.disjointness_violations.is_empty() as u64;
        s.n_exceeds_ntilde_literal_paths += (a.n_exceeds_ntilde_literal > 0) as u64;
        s.n_exceeds_ntilde_aligned_paths += (a.n_exceeds_ntilde_aligned > 0) as u64;
        s.f3_below_n_paths += a.f3_below_n as u64;
    }
    let k = reports.len() as u64;
    for (name, v) in [
        ("containment_violations", s.containment_violations),
        ("disjointness_violation_paths", s.disjointness_paths),
        ("N_exceeds_Ntilde_paths", s.n_exceeds_ntilde_aligned_paths),
        ("f3_below_N_paths", s.f3_below_n_paths),
    ] {
        s.rows.push(exact_row(name, seed, k, v as f64));
    }
    Ok(s)
}

pub const DEFAULT_H_GRID: [u64; 5] = [50, 100, 200, 400, 800];

impl Experiment for CountEvents {
    fn run(&self, cfg: &ReplicaConfig) -> Result<ExperimentOutput> {
        cfg.check_keys(&["H", "H_grid", "h_min_n", "h_min_tilde"])?;
        let h_max = cfg.u64_or("H", 800)?;
        let grid: Vec<u64> = cfg
            .u64_list_or("H_grid", &DEFAULT_H_GRID)?
            .into_iter()
            .filter(|&h| h <= h_max)
            .collect();
        let ecfg = EventConfig {
            h_min_n: cfg.u64_or("h_min_n", 8)?,
            h_min_tilde: cfg.u64_or("h_min_tilde", 50)?,
            window: KWindow::OPEN,
        };
        let reports = map_replicas(cfg.master_seed, cfg.replicas, |s| {
            count_path_events(s, h_max, ecfg)
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let s = summarize_events(&reports, &grid, ecfg, cfg.master_seed)?;
        Ok(ExperimentOutput {
            rows: s.rows,
            invalid: false,
        })
    }
}

impl Experiment for Hitting {
    fn run(&self, cfg: &ReplicaConfig) -> Result<ExperimentOutput> {
        cfg.check_keys(&["k", "h"])?;
        let e = hitting_moments(
            cfg.u64_or("k", 0)?,
            cfg.u64_or("h", 100)?,
            cfg.replicas,
            cfg.master_seed,
        )?;
        let censored = exact_row("censored", cfg.master_seed, cfg.replicas, e.censored as f64);
        Ok(ExperimentOutput {
            rows: vec![e.tau, e.z_tau, e.residual, censored],
            invalid: e.censored > 0,
        })
    }
}

impl Experiment for Lemma41 {
    fn run(&self, cfg: &ReplicaConfig) -> Result<ExperimentOutput> {
        cfg.check_keys(&["k", "h"])?;
        let h = cfg.u64_or("h", 400)?;
        let k = match cfg.params.get("k") {
            Some(_) => cfg.u64_or("k", 0)?,
            None => KWindow::OPEN
                .middle(h)
                .ok_or_else(|| Error::InvalidParameter(format!("K_{h} has no integer member")))?,
        };
        let e = lemma41_statistic(k, h, cfg.replicas, cfg.master_seed)?;
        let scaled = |r: &EstimateRow, name: &str| {
            let mut r = r.clone();
            r.statistic = name.into();
            r.estimate /= (h as f64).sqrt();
            r.se /= (h as f64).sqrt();
            r
        };
        let rows = vec![
            scaled(&e.direct, "lemma41_direct_over_sqrt_h"),
            scaled(&e.dual, "lemma41_dual_over_sqrt_h"),
            e.direct,
            e.dual,
            exact_row("censored", cfg.master_seed, cfg.replicas, e.censored as f64),
        ];
        Ok(ExperimentOutput {
            rows,
            invalid: e.censored > 0,
        })
    }
}

impl Experiment for RayKnight {
    fn run(&self, cfg: &ReplicaConfig) -> Result<ExperimentOutput> {
        cfg.check_keys(&["x", "k", "window", "cap", "convention"])?;
        let x = cfg.i64_or("x", 3)?;
        let k = cfg.u64_or("k", 0)?;
        let window = cfg.window_or("window", (-2, x + 3))?;
        let r = distribution_compare(
            x,
            k,
            window,
            cfg.replicas,
            cfg.u64_or("cap", DEFAULT_CAP)?,
            cfg.master_seed,
            cfg.str_or("convention", DEFAULT_CONVENTION)?,
            false,
        )?;
        let seed = cfg.master_seed;
        let n = cfg.replicas;
        let tag = |row: EstimateRow| {
            row.param("x", x)
                .param("k", k)
                .param("window", format!("{}:{}", window.0, window.1))
                .param("convention", r.convention.clone())
        };
        let mut rows: Vec<EstimateRow> = r
            .coordinates
            .iter()
            .flat_map(|c| {
                [
                    tag(exact_row("coordinate_p_adjusted", seed, n, c.p_adjusted).param("y", c.y)),
                    tag(exact_row("coordinate_tv", seed, n, c.tv).param("y", c.y)),
                ]
            })
            .collect();
        rows.push(tag(exact_row("min_p_adjusted", seed, n, r.min_p_adjusted)));
        rows.push(tag(exact_row(
            "fingerprint_p_value",
            seed,
            n,
            r.fingerprint_p_value,
        )));
        rows.push(tag(exact_row(
            "walk_censor_rate",
            seed,
            n,
            r.walk_censor_rate,
        )));
        Ok(ExperimentOutput {
            rows,
            invalid: r.invalid,
        })
    }
}

pub const DEFAULT_N_GRID: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

/// Embedding study: estimate rows plus every per-seed curve point.
pub fn embedding_study(cfg: &ReplicaConfig) -> Result<(ExperimentOutput, Vec<CurvePoint>)> {
    cfg.check_keys(&["m", "n_grid", "halving_t", "block_replicas", "cap"])?;
    let seed = cfg.master_seed;
    let m = cfg.u64_or("m", 64)?;
    let grid = cfg.u64_list_or("n_grid", &DEFAULT_N_GRID)?;
    let n = *grid
        .last()
        .ok_or_else(|| Error::InvalidParameter("n_grid is empty".into()))?;
    let halving = cfg.u64_or("halving_t", 10_000.min(n))?;
    let traces = map_replicas(seed, cfg.replicas, |s| {
        simulate_embedding(s, m, n, &grid, Some(halving))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let gaps = map_replicas(seed, cfg.replicas, |s| neighbor_gap_run(s.derive(1), &grid))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for which in [Discrepancy::Coupled, Discrepancy::Clock] {
        let c = discrepancy_curve(&traces, which)?;
        for &g in &grid {
            let vals: Vec<f64> = c
                .points
                .iter()
                .filter(|p| p.n == g)
                .map(|p| p.value)
                .collect();
            rows.push(
                EstimateRow::from_quantile(&c.statistic, seed, &vals, 0.5)
                    .param("n", g)
                    .param("m", m),
            );
        }
        rows.push(
            fit_row(
                &format!("{}_slope", c.statistic),
                seed,
                cfg.replicas,
                &c.fit,
            )
            .param("m", m),
        );
        curves.extend(c.points);
    }
    let g = neighbor_gap_curve(&gaps)?;
    curves.extend(g.curve.points.iter().cloned());
    for t in &gaps {
        for (&n, &v) in t.n_grid.iter().zip(&t.xi_star) {
            curves.push(CurvePoint {
                n,
                statistic: "xi_star".into(),
                value: v,
                seed: t.seed.stream_index,
            });
        }
    }
    rows.push(fit_row(
        "neighbor_gap_slope",
        seed,
        cfg.replicas,
        &g.curve.fit,
    ));
    rows.extend(g.fourth_moment_ratio);
    rows.push(EstimateRow::from_values("kesten_ratio", seed, &g.kesten_ratio).param("n", n));
    let tau: Vec<f64> = traces.iter().map(|t| t.tau_mean).collect();
    let sigma: Vec<f64> = traces.iter().map(|t| t.sigma2).collect();
    rows.push(EstimateRow::from_values("tau_mean", seed, &tau).param("m", m));
    rows.push(EstimateRow::from_values("sigma2", seed, &sigma).param("m", m));
    for x in -3..=3i64 {
        let rel: Vec<f64> = traces
            .iter()
            .filter_map(|t| t.halving.iter().find(|h| h.x == x))
            .map(|h| h.eta_r - h.eta / 2.0)
            .collect();
        rows.push(
            EstimateRow::from_values("eta_r_minus_half_eta", seed, &rel)
                .param("x", x)
                .param("t", halving),
        );
    }
    // block_replicas = 0 skips the downcrossing-block law
    let block_replicas = cfg.u64_or("block_replicas", 100_000)?;
    if block_replicas == 0 {
        return Ok((
            ExperimentOutput {
                rows,
                invalid: false,
            },
            curves,
        ));
    }
    let b = block_distribution(seed, block_replicas, cfg.u64_or("cap", BLOCK_CAP)?)?;
    let total = b.m0_histogram.iter().sum::<u64>() as f64;
    for (j, &c) in b.m0_histogram.iter().enumerate().take(4) {
        let p = c as f64 / total;
        rows.push(
            exact_row("P(M0=j)", seed, total as u64, p)
                .with_se((p * (1.0 - p) / total).sqrt())
                .param("j", j as u64),
        );
    }
    rows.push(b.p01);
    rows.push(b.p10);
    rows.push(b.mean_xi_d1);
    rows.push(exact_row(
        "block_censor_rate",
        seed,
        block_replicas,
        b.censor_rate,
    ));
    Ok((
        ExperimentOutput {
            rows,
            invalid: b.invalid,
        },
        curves,
    ))
}

impl Experiment for Embedding {
    fn run(&self, cfg: &ReplicaConfig) -> Result<ExperimentOutput> {
        embedding_study(cfg).map(|r| r.0)
    }
}

/// Dyadic n in [10^4, 10^7].
pub fn dyadic_grid() -> Vec<u64> {
    (14..=23).map(|e| 1u64 << e).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceRow {
    pub n: u64,
    pub median_tilde: EstimateRow,
    pub p10_tilde: EstimateRow,
    pub median_u: EstimateRow,
    pub p10_u: EstimateRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceProfile {
    pub gamma: f64,
    pub replicas: u64,
    pub seed: u64,
    pub rows: Vec<TransienceRow>,
    /// Probes where some favorite edge x lacks x − 1 among the favorite
    /// downcrossing sites.
    pub prop24_violations: u64,
}

impl TransienceProfile {
    /// Medians of the normalized minimal favorite edge.
    pub fn medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.median_tilde.estimate).collect()
    }

    pub fn estimate_rows(&self) -> Vec<EstimateRow> {
        self.rows
            .iter()
            .flat_map(|r| [&r.median_tilde, &r.p10_tilde, &r.median_u, &r.p10_u])
            .cloned()
            .collect()
    }
}

/// Per replica: (Ũ(n), U(n)) at each probe, and the probe audit count.
fn transience_path(seed: SeedPair, grid: &[u64]) -> (Vec<(u64, u64)>, u64) {
    let mut gen = StepGenerator::new(seed);
    let mut walk = Walk::new();
    let mut out = Vec::with_capacity(grid.len());
    let mut bad = 0;
    for &n in grid {
        while walk.state.n < n {
            walk.advance(gen.next_step());
        }
        let led = &walk.ledger;
        bad += !audit_prop24(led) as u64;
        out.push((
            led.min_abs_favorite_edge().unwrap_or(0),
            led.min_abs_favorite_down().unwrap_or(0),
        ));
    }
    (out, bad)
}

pub fn transience_profile(
    seed: u64,
    replicas: u64,
    gamma: f64,
    grid: &[u64],
) -> Result<TransienceProfile> {
    if gamma <= 11.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must exceed 11, got {gamma}"
        )));
    }
    if replicas < 2 || grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 2 {
        return Err(Error::InvalidParameter(
            "need ≥ 2 replicas and a strictly increasing grid above 1".into(),
        ));
    }
    let paths = map_replicas(seed, replicas, |s| transience_path(s, grid))?;
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let nf = n as f64;
            let norm = nf.ln().powf(gamma) / nf.sqrt();
            let tilde: Vec<f64> = paths.iter().map(|p| p.0[i].0 as f64 * norm).collect();
            let u: Vec<f64> = paths.iter().map(|p| p.0[i].1 as f64 * norm).collect();
            let tag = |r: EstimateRow| r.param("n", n).param("gamma", gamma);
            TransienceRow {
                n,
                median_tilde: tag(EstimateRow::from_quantile(
                    "Utilde_normalized",
                    seed,
                    &tilde,
                    0.5,
                )),
                p10_tilde: tag(EstimateRow::from_quantile(
                    "Utilde_normalized",
                    seed,
                    &tilde,
                    0.1,
                )),
                median_u: tag(EstimateRow::from_quantile("U_normalized", seed, &u, 0.5)),
                p10_u: tag(EstimateRow::from_quantile("U_normalized", seed, &u, 0.1)),
            }
        })
        .collect();
    Ok(TransienceProfile {
        gamma,
        replicas,
        seed,
        rows,
        prop24_violations: paths.iter().map(|p| p.1).sum(),
    })
}

impl Experiment for Transience {
    fn run(&self, cfg: &ReplicaConfig) -> Result<ExperimentOutput> {
        cfg.check_keys(&["gamma", "n_grid"])?;
        let grid = cfg.u64_list_or("n_grid", &dyadic_grid())?;
        let p = transience_profile(
            cfg.master_seed,
            cfg.replicas,
            cfg.f64_or("gamma", 12.0)?,
            &grid,
        )?;
        let mut rows = p.estimate_rows();
        rows.push(exact_row(
            "prop24_violations",
            p.seed,
            p.replicas,
            p.prop24_violations as f64,
        ));
        Ok(ExperimentOutput {
            rows,
            invalid: p.prop24_violations > 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_name_the_replica() {
        let r = map_replicas(7, 10, |s| {
            if s.stream_index == 3 {
                panic!("boom");
            }
            s.stream_index
        });
        match r {
            Err(Error::ReplicaPanicked {
                seed: 7,
                stream: 3,
                message,
            }) => assert_eq!(message, "boom"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replicas_come_back_in_order() {
        let v = map_replicas(1, 50, |s| s.stream_index).unwrap();
        assert_eq!(v, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn fair_step_mean() {
        let v: Vec<f64> =
            map_replicas(3, 10_000, |s| StepGenerator::new(s).next_step() as f64).unwrap();
        let r = EstimateRow::from_values("step", 3, &v);
        assert!(r.z(0.0).abs() < 3.0);
    }

    #[test]
    fn unknown_params_rejected() {
        let cfg = ReplicaConfig::new("hitting", 1, 10).with("hh", 3);
        assert!(run_replicas(&cfg).is_err());
        assert!(run_replicas(&ReplicaConfig::new("nope", 1, 10)).is_err());
        assert!(run_replicas(&ReplicaConfig::new("hitting", 1, 1)).is_err());
    }

    #[test]
    fn config_round_trip() {
        let cfg = ReplicaConfig::new("count-events", 7, 100).with("H", 100);
        let back = ReplicaConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert!(ReplicaConfig::from_json(
            r#"{"experiment":"x","master_seed":1,"replicas":2,"extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let cfg = ReplicaConfig::new("hitting", 11, 500)
            .with("k", 2)
            .with("h", 20);
        let a = serde_json::to_string(&run_replicas(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_replicas(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn count_events_finds_events() {
        let cfg = ReplicaConfig::new("count-events", 5, 300)
            .with("H", 100)
            .with("H_grid", vec![50u64, 100]);
        let out = run_replicas(&cfg).unwrap();
        let n100 = out
            .rows
            .iter()
            .find(|r| r.statistic == "Ntilde_H" && r.parameters["H"] == 100)
            .unwrap();
        assert!(n100.estimate >= 0.0);
        let c = out
            .rows
            .iter()
            .find(|r| r.statistic == "containment_violations")
            .unwrap();
        assert_eq!(c.estimate, 0.0);
    }

    #[test]
    fn transience_small() {
        let p = transience_profile(2, 20, 12.0, &[64, 256, 1024]).unwrap();
        assert_eq!(p.prop24_violations, 0);
        assert_eq!(p.rows.len(), 3);
        assert!(transience_profile(2, 20, 11.0, &[64]).is_err());
        assert!(transience_profile(2, 20, 12.0, &[64, 64]).is_err());
    }

    #[test]
    fn windows_parse() {
        assert_eq!(parse_window("-2:6").unwrap(), (-2, 6));
        assert_eq!(parse_window("0:0").unwrap(), (0, 0));
        assert!(parse_window("3:1").is_err());
        assert!(parse_window("3").is_err());
    }
}
