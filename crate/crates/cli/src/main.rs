//! `favedge`: command-line driver for the simulation and verification toolkit.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use favedge::branching::{kernel_eval, row_sum, KWindow, KernelKind};
use favedge::embedding::CurvePoint;
use favedge::events::{count_path_events, EventConfig};
use favedge::harness::{
    dyadic_grid, embedding_study, map_replicas, parse_window, run_replicas, transience_profile,
    ReplicaConfig,
};
use favedge::oracle::enumerate;
use favedge::rayknight::{distribution_compare, DEFAULT_CONVENTION};
use favedge::rng::SeedPair;
use favedge::stats::EstimateRow;
use favedge::walk::{simulate, DEFAULT_CAP};

use output::{Sink, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "favedge",
    version,
    about = "Favorite edges of simple random walk: exact oracle and seeded Monte Carlo"
)]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    /// JSON replica config {experiment, master_seed, replicas, params}; replaces
    /// the experiment flags of count-events, rayknight-test, embed and transience.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Walk snapshots at probe times.
    Simulate(SimulateArgs),
    /// Exact law of a path statistic by enumeration of all 2^n paths.
    Oracle(OracleArgs),
    /// Rows of the branching kernels.
    Kernels(KernelArgs),
    /// Walk-side against chain-side stopped downcrossing profiles.
    RayknightTest(RayknightArgs),
    /// Per-path event counts, one record per replica.
    CountEvents(CountArgs),
    /// Embedding discrepancy, neighbor gaps and downcrossing blocks.
    Embed(EmbedArgs),
    /// Normalized minimal favorite edge and site across replicas.
    Transience(TransienceArgs),
    /// Parse an emitted JSON, JSON lines or CSV file and summarize it.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Comma-separated probe times; defaults to the last step.
    #[arg(long, value_delimiter = ',')]
    probes: Vec<u64>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "favorites")]
    stat: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelChoice {
    Plain,
    Immigrant,
    ShiftedImmigrant,
    All,
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "all")]
    kind: KernelChoice,
    /// Comma-separated row indices.
    #[arg(long, value_delimiter = ',', default_value = "0,1,5")]
    i: Vec<u64>,
    #[arg(long, default_value_t = 10)]
    max_j: u64,
}

#[derive(Debug, Args)]
struct RayknightArgs {
    /// External site; the walk stops at the (k+1)-th upcrossing into x − 1.
    #[arg(long)]
    x: Option<i64>,
    #[arg(long)]
    k: Option<u64>,
    /// Window `a:b`; defaults to -2:x+3.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Step budget per walk replica before it counts as censored.
    #[arg(long)]
    cap: Option<u64>,
    /// walk-consistent (default) or as-printed.
    #[arg(long)]
    convention: Option<String>,
}

#[derive(Debug, Args)]
struct CountArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long = "H")]
    h: Option<u64>,
    #[arg(long)]
    h_min_n: Option<u64>,
    #[arg(long)]
    h_min_tilde: Option<u64>,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds (traces).
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    /// Replicas for the downcrossing-block law; 0 skips it.
    #[arg(long)]
    block_replicas: Option<u64>,
}

#[derive(Debug, Args)]
struct TransienceArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
}

/// What went wrong, mapped to an exit code.
enum Failure {
    Usage(String),
    Invalid,
}

impl From<favedge::Error> for Failure {
    fn from(e: favedge::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid) => {
            eprintln!("report flagged invalid");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut sink = Sink::open(cli.out.as_deref(), cli.format)?;
    let config = match &cli.config {
        Some(p) => Some(ReplicaConfig::from_json(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let needs_no_config = |name: &str| match &config {
        Some(_) => Err(Failure::Usage(format!("--config does not apply to {name}"))),
        None => Ok(()),
    };
    match cli.command {
        Command::Simulate(a) => {
            needs_no_config("simulate")?;
            simulate_cmd(a, &mut sink)
        }
        Command::Oracle(a) => {
            needs_no_config("oracle")?;
            oracle_cmd(a, &mut sink)
        }
        Command::Kernels(a) => {
            needs_no_config("kernels")?;
            kernels_cmd(a, &mut sink)
        }
        Command::RayknightTest(a) => rayknight_cmd(a, config, &mut sink),
        Command::CountEvents(a) => count_cmd(a, config, &mut sink),
        Command::Embed(a) => embed_cmd(a, config, &mut sink),
        Command::Transience(a) => transience_cmd(a, config, &mut sink),
        Command::Report(a) => {
            needs_no_config("report")?;
            let summary = output::summarize_file(&a.input)?;
            sink.one(&summary, &Table::from_record(&summary)?)?;
            Ok(sink.finish()?)
        }
    }
}

/// Flags given alongside --config are rejected rather than silently ignored.
fn config_for(
    config: Option<ReplicaConfig>,
    experiment: &str,
    flags_given: bool,
) -> Result<Option<ReplicaConfig>, Failure> {
    match config {
        None => Ok(None),
        Some(_) if flags_given => Err(Failure::Usage(
            "experiment flags cannot be combined with --config".into(),
        )),
        Some(c) if c.experiment != experiment => Err(Failure::Usage(format!(
            "config experiment `{}` does not match subcommand (expected `{experiment}`)",
            c.experiment
        ))),
        Some(c) => Ok(Some(c)),
    }
}

fn emit_rows(rows: &[EstimateRow], invalid: bool, sink: &mut Sink) -> Outcome {
    sink.lines(rows, &Table::estimate_rows(rows))?;
    sink.finish()?;
    if invalid {
        Err(Failure::Invalid)
    } else {
        Ok(())
    }
}

fn run_config(cfg: &ReplicaConfig, sink: &mut Sink) -> Outcome {
    let out = run_replicas(cfg)?;
    emit_rows(&out.rows, out.invalid, sink)
}

fn simulate_cmd(a: SimulateArgs, sink: &mut Sink) -> Outcome {
    let probes = if a.probes.is_empty() {
        vec![a.steps]
    } else {
        a.probes
    };
    let snaps = simulate(SeedPair::new(a.seed, a.stream), a.steps, &probes)?;
    let mut t = Table::new(&[
        "n",
        "position",
        "previous",
        "favorite_edges",
        "favorite_down_sites",
        "max_edge_local",
        "max_down",
        "min_favorite_edge",
        "min_favorite_down",
    ]);
    let join = |v: &[i64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let opt = |v: Option<u64>| v.map_or(String::new(), |x| x.to_string());
    for s in &snaps {
        t.push(vec![
            s.n.to_string(),
            s.position.to_string(),
            s.previous.to_string(),
            join(&s.favorite_edges),
            join(&s.favorite_down_sites),
            s.max_edge_local.to_string(),
            s.max_down.to_string(),
            opt(s.min_favorite_edge),
            opt(s.min_favorite_down),
        ]);
    }
    sink.lines(&snaps, &t)?;
    Ok(sink.finish()?)
}

#[derive(Serialize)]
struct OracleRow<'a> {
    statistic: &'a str,
    n: usize,
    value: u64,
    numerator: u64,
    denominator: String,
    probability: f64,
}

fn oracle_cmd(a: OracleArgs, sink: &mut Sink) -> Outcome {
    let d = enumerate(a.n, &a.stat)?;
    match sink.format() {
        Format::Json => {
            // the distribution itself is the record
            sink.raw_line(&d.to_json()?)?;
        }
        Format::Csv => {
            let rows: Vec<OracleRow> = d
                .support
                .iter()
                .zip(&d.numerators)
                .map(|(&value, &numerator)| OracleRow {
                    statistic: &d.statistic,
                    n: d.n,
                    value,
                    numerator,
                    denominator: format!("2^{}", d.denominator_log2),
                    probability: d.probability(value),
                })
                .collect();
            sink.lines(&rows, &Table::from_records(&rows)?)?;
        }
    }
    Ok(sink.finish()?)
}

#[derive(Serialize)]
struct KernelRow {
    kind: &'static str,
    quantity: &'static str,
    i: u64,
    j: Option<u64>,
    value: f64,
}

fn kernels_cmd(a: KernelArgs, sink: &mut Sink) -> Outcome {
    let kinds: Vec<KernelKind> = match a.kind {
        KernelChoice::Plain => vec![KernelKind::Plain],
        KernelChoice::Immigrant => vec![KernelKind::Immigrant],
        KernelChoice::ShiftedImmigrant => vec![KernelKind::ShiftedImmigrant],
        KernelChoice::All => KernelKind::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    for kind in kinds {
        for &i in &a.i {
            for j in 0..=a.max_j {
                rows.push(KernelRow {
                    kind: kind.as_str(),
                    quantity: "pmf",
                    i,
                    j: Some(j),
                    value: kernel_eval(kind, i, j),
                });
            }
            // the head sum with its analytic tail; 1 up to rounding
            rows.push(KernelRow {
                kind: kind.as_str(),
                quantity: "row_sum",
                i,
                j: None,
                value: row_sum(kind, i, a.max_j),
            });
        }
    }
    sink.lines(&rows, &Table::from_records(&rows)?)?;
    Ok(sink.finish()?)
}

fn rayknight_cmd(a: RayknightArgs, config: Option<ReplicaConfig>, sink: &mut Sink) -> Outcome {
    let given = a.x.is_some()
        || a.k.is_some()
        || a.window.is_some()
        || a.replicas.is_some()
        || a.seed.is_some()
        || a.cap.is_some()
        || a.convention.is_some();
    if let Some(cfg) = config_for(config, "rayknight", given)? {
        return run_config(&cfg, sink);
    }
    let x = a.x.unwrap_or(3);
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => (-2, x + 3),
    };
    let r = distribution_compare(
        x,
        a.k.unwrap_or(0),
        window,
        a.replicas.unwrap_or(100_000),
        a.cap.unwrap_or(DEFAULT_CAP),
        a.seed.unwrap_or(0),
        a.convention.as_deref().unwrap_or(DEFAULT_CONVENTION),
        false,
    )?;
    let mut t = Table::new(&[
        "y",
        "chi_square",
        "dof",
        "p_value",
        "p_adjusted",
        "tv",
        "walk_tv_exact",
        "chain_tv_exact",
    ]);
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for c in &r.coordinates {
        t.push(vec![
            c.y.to_string(),
            c.chi_square.to_string(),
            c.dof.to_string(),
            c.p_value.to_string(),
            c.p_adjusted.to_string(),
            c.tv.to_string(),
            opt(c.walk_tv_exact),
            opt(c.chain_tv_exact),
        ]);
    }
    sink.one(&r, &t)?;
    sink.finish()?;
    if r.invalid {
        Err(Failure::Invalid)
    } else {
        Ok(())
    }
}

fn count_cmd(a: CountArgs, config: Option<ReplicaConfig>, sink: &mut Sink) -> Outcome {
    let given = a.seed.is_some()
        || a.replicas.is_some()
        || a.h.is_some()
        || a.h_min_n.is_some()
        || a.h_min_tilde.is_some();
    if let Some(cfg) = config_for(config, "count-events", given)? {
        return run_config(&cfg, sink);
    }
    let cfg = EventConfig {
        h_min_n: a.h_min_n.unwrap_or(8),
        h_min_tilde: a.h_min_tilde.unwrap_or(50),
        window: KWindow::OPEN,
    };
    let h = a.h.unwrap_or(200);
    let reports = map_replicas(a.seed.unwrap_or(0), a.replicas.unwrap_or(100), |s| {
        count_path_events(s, h, cfg)
    })?
    .into_iter()
    .collect::<favedge::Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "seed",
        "stream",
        "H",
        "stop_time",
        "N_H",
        "Ntilde_H",
        "f1",
        "f2",
        "f3",
        "f4plus",
        "events",
    ]);
    for r in &reports {
        t.push(vec![
            r.seed.to_string(),
            r.stream.to_string(),
            r.h_max.to_string(),
            r.stop_time.to_string(),
            r.n_at(h).to_string(),
            r.n_tilde_at(h).to_string(),
            r.f[0].to_string(),
            r.f[1].to_string(),
            r.f[2].to_string(),
            r.f[3].to_string(),
            r.events.len().to_string(),
        ]);
    }
    sink.lines(&reports, &t)?;
    Ok(sink.finish()?)
}

fn embed_cmd(a: EmbedArgs, config: Option<ReplicaConfig>, sink: &mut Sink) -> Outcome {
    let given = a.seed.is_some()
        || a.replicas.is_some()
        || a.m.is_some()
        || a.n_grid.is_some()
        || a.block_replicas.is_some();
    let cfg = match config_for(config, "embedding", given)? {
        Some(c) => c,
        None => {
            let mut c =
                ReplicaConfig::new("embedding", a.seed.unwrap_or(0), a.replicas.unwrap_or(20));
            if let Some(m) = a.m {
                c = c.with("m", m);
            }
            if let Some(g) = a.n_grid {
                c = c.with("n_grid", g);
            }
            if let Some(b) = a.block_replicas {
                c = c.with("block_replicas", b);
            }
            c
        }
    };
    let (out, curves) = embedding_study(&cfg)?;
    match sink.format() {
        // curves are the CSV product; rows are the JSON product
        Format::Csv => {
            sink.lines(&curves, &Table::from_records::<CurvePoint>(&curves)?)?;
            sink.finish()?;
            if out.invalid {
                Err(Failure::Invalid)
            } else {
                Ok(())
            }
        }
        Format::Json => emit_rows(&out.rows, out.invalid, sink),
    }
}

fn transience_cmd(a: TransienceArgs, config: Option<ReplicaConfig>, sink: &mut Sink) -> Outcome {
    let given = a.seed.is_some() || a.replicas.is_some() || a.gamma.is_some() || a.n_grid.is_some();
    if let Some(cfg) = config_for(config, "transience", given)? {
        return run_config(&cfg, sink);
    }
    let grid = a.n_grid.unwrap_or_else(dyadic_grid);
    let p = transience_profile(
        a.seed.unwrap_or(0),
        a.replicas.unwrap_or(200),
        a.gamma.unwrap_or(12.0),
        &grid,
    )?;
    emit_rows(&p.estimate_rows(), p.prop24_violations > 0, sink)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_excludes_flags() {
        let c = ReplicaConfig::new("count-events", 1, 10);
        assert!(matches!(
            config_for(Some(c.clone()), "count-events", true),
            Err(Failure::Usage(_))
        ));
        assert!(matches!(
            config_for(Some(c.clone()), "transience", false),
            Err(Failure::Usage(_))
        ));
        assert!(matches!(
            config_for(Some(c), "count-events", false),
            Ok(Some(_))
        ));
        assert!(matches!(config_for(None, "embed", true), Ok(None)));
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["favedge", "--format", "csv", "count-events", "--H", "60"])
            .unwrap();
        assert_eq!(cli.format, Format::Csv);
        assert!(matches!(
            cli.command,
            Command::CountEvents(CountArgs { h: Some(60), .. })
        ));
        let cli = Cli::try_parse_from(["favedge", "rayknight-test", "--window", "-2:5"]).unwrap();
        assert!(
            matches!(cli.command, Command::RayknightTest(RayknightArgs { window: Some(ref w), .. }) if w == "-2:5")
        );
        assert!(Cli::try_parse_from(["favedge", "oracle"]).is_err());
        assert!(Cli::try_parse_from(["favedge", "nope"]).is_err());
    }
}
