//! The three subcommands, callable without going through the binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use tomoforge::harness::{aggregate, convergence_k, histogram, run_experiment, SCHEMA_VERSION};
use tomoforge::{ExperimentConfig, Method, Metric, RngSeed, TrialResult};

use crate::csvio;
use crate::manifest::{config_hash, RunManifest};
use crate::verify::{run_checks, Level, Probes};
use crate::{CliError, CliResult, SEED_ENV};

pub const TRIALS_FILE: &str = "trials.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Parses and validates a config file, applying the seed override from
/// `seed_env` (normally the value of `TOMOFORGE_SEED`).
pub fn load_config(path: &Path, seed_env: Option<&str>) -> CliResult<(ExperimentConfig, bool)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let overridden = match seed_env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => {
            let seed = s
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={s} is not an unsigned 64-bit integer")))?;
            cfg.root_seed = RngSeed(seed);
            true
        }
        None => false,
    };
    Ok((cfg, overridden))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn method_order(results: &[TrialResult]) -> Vec<Method> {
    let mut order = Vec::new();
    for r in results {
        if !order.contains(&r.method) {
            order.push(r.method);
        }
    }
    order
}

/// Runs the sweep described by `config_path` and writes all outputs into
/// `out_dir`. Per-trial failures are recorded, not fatal.
pub fn cmd_run(config_path: &Path, out_dir: &Path, threads: Option<usize>) -> CliResult<RunManifest> {
    let seed_env = std::env::var(SEED_ENV).ok();
    let (cfg, seed_overridden) = load_config(config_path, seed_env.as_deref())?;
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let started_at = now();
    log::info!(
        "{} states x {} K values x {} methods on {} threads",
        cfg.n_states,
        cfg.k_values.len(),
        cfg.methods.len(),
        pool.current_num_threads()
    );
    let results = pool
        .install(|| run_experiment(&cfg))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let aggregates = aggregate(&results);
    let finished_at = now();

    let path = |name: &str| out_dir.join(name);
    csvio::write_trials(&path(TRIALS_FILE), &results)?;
    csvio::write_aggregates(&path(AGGREGATES_FILE), &aggregates)?;
    csvio::write_timings(&path(TIMINGS_FILE), &results)?;

    let mut failures = BTreeMap::new();
    let mut converged = BTreeMap::new();
    for m in method_order(&results) {
        let n = results.iter().filter(|r| r.method == m && r.failed()).count();
        failures.insert(m.to_string(), n);
        converged.insert(m.to_string(), convergence_k(&results, m, cfg.convergence_cutoff));
    }
    let outputs = [TRIALS_FILE, AGGREGATES_FILE, TIMINGS_FILE]
        .into_iter()
        .map(|n| (n.trim_end_matches(".csv").to_string(), path(n).display().to_string()))
        .collect();
    let manifest = RunManifest {
        config_hash: config_hash(&cfg),
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at,
        root_seed: cfg.root_seed.0,
        seed_overridden,
        threads: pool.current_num_threads(),
        n_trials: results.len(),
        outputs,
        failures,
        convergence_k: converged,
        config: serde_json::to_value(&cfg).expect("config serializes"),
    };
    let manifest_path = path(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&manifest_path, json).map_err(|e| CliError::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Runs the invariant checks, reporting failures on stderr.
pub fn cmd_verify(level: Level, probes: &Probes) -> CliResult<()> {
    let outcomes = run_checks(level, probes);
    let mut failed = 0;
    for o in &outcomes {
        if o.passed {
            log::info!("ok   {} ({:.0} ms)", o.name, o.millis);
        } else {
            failed += 1;
            eprintln!("FAIL {}: {}", o.name, o.detail);
        }
    }
    eprintln!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        Err(CliError::Verify(failed))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportKind {
    Curve,
    Histogram,
}

#[derive(Debug, Clone)]
pub struct ReportArgs {
    pub trials: PathBuf,
    pub kind: ReportKind,
    pub metric: String,
    pub out: PathBuf,
    pub bins: usize,
    /// Defaults to `[0, 1]` for fidelities and the data extent otherwise.
    pub range: Option<(f64, f64)>,
}

fn default_range(metric: Metric, values: &[f64]) -> (f64, f64) {
    if matches!(metric, Metric::FidelityToTarget | Metric::FidelityToMaxent) {
        return (0.0, 1.0);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Writes a curve (per-`(k, method)` summary) or per-group histograms of
/// one metric from a `trials.csv`. Failed trials are left out.
pub fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let metric: Metric = args
        .metric
        .parse()
        .map_err(|_| CliError::UnknownMetric(args.metric.clone()))?;
    let results = csvio::read_trials(&args.trials)?;
    match args.kind {
        ReportKind::Curve => {
            let rows: Vec<_> = aggregate(&results)
                .into_iter()
                .filter(|a| a.metric == metric.name())
                .collect();
            csvio::write_curve(&args.out, &rows)
        }
        ReportKind::Histogram => {
            let mut groups: Vec<(Method, usize, Vec<f64>)> = Vec::new();
            for m in method_order(&results) {
                let mut ks: Vec<usize> = results.iter().filter(|r| r.method == m).map(|r| r.k).collect();
                ks.sort_unstable();
                ks.dedup();
                for k in ks {
                    let vals = results
                        .iter()
                        .filter(|r| r.method == m && r.k == k && !r.failed())
                        .map(|r| r.metric(metric))
                        .filter(|v| v.is_finite())
                        .collect();
                    groups.push((m, k, vals));
                }
            }
            let all: Vec<f64> = groups.iter().flat_map(|g| g.2.iter().copied()).collect();
            let range = args.range.unwrap_or_else(|| default_range(metric, &all));
            let hists = groups
                .into_iter()
                .map(|(m, k, vals)| {
                    histogram(&vals, args.bins, range)
                        .map(|h| (m, k, h))
                        .map_err(|e| CliError::Config(e.to_string()))
                })
                .collect::<CliResult<Vec<_>>>()?;
            csvio::write_histograms(&args.out, &hists)
        }
    }
}
