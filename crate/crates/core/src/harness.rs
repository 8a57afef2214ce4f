//! Randomized sweeps: sample target states, measure random subsets of a
//! product SIC POVM, reconstruct with every configured method and collect
//! comparison metrics.
//!
//! Seeds are derived from the root seed as `("state", i)`, `("plan", i, k)`
//! and `("noise", i, k)`, so adding a method or reordering work never changes
//! the sampled states, subsets or noise.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    maxent_estimate, pvqt_estimate, MaxEntOptions, Method, Reconstruction, SolveStatus,
};
use crate::measure::{add_noise, expectations, FrequencyVector, NoiseModel};
use crate::metrics::{kl_from_uniform, unmeasured_vector};
use crate::povm::{select_subset, sic_product, Povm, SubsetPlan};
use crate::rng::RngSeed;
use crate::sdp::SdpOptions;
use crate::states::{fidelity, haar_pure, random_rank_r, trace_distance, vn_entropy, DensityMatrix, MAX_QUBITS};

/// Current config schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdp_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdp_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxent_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxent_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
}

impl ToleranceOverrides {
    pub fn sdp_options(&self) -> SdpOptions {
        let mut o = SdpOptions::default();
        if let Some(t) = self.sdp_tol {
            o.tol = t;
        }
        if let Some(n) = self.sdp_max_iter {
            o.max_iter = n;
        }
        o
    }

    pub fn maxent_options(&self) -> MaxEntOptions {
        let mut o = MaxEntOptions::default();
        if let Some(t) = self.maxent_tol {
            o.tol = t;
        }
        if let Some(n) = self.maxent_max_iter {
            o.max_iter = n;
        }
        if let Some(c) = self.lambda_cap {
            o.lambda_cap = c;
        }
        o
    }
}

fn default_rank() -> usize {
    1
}

fn default_cutoff() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub n_qubits: usize,
    pub n_states: usize,
    #[serde(default = "default_rank")]
    pub rank: usize,
    pub k_values: Vec<usize>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub noise_model: NoiseModel,
    pub root_seed: RngSeed,
    /// Trace-distance threshold defining convergence to the target.
    #[serde(default = "default_cutoff")]
    pub convergence_cutoff: f64,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn n_effects(&self) -> usize {
        1 << (2 * self.n_qubits)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::InvalidQubits(self.n_qubits));
        }
        if self.n_states == 0 {
            return bad("n_states must be positive".into());
        }
        if self.rank == 0 || self.rank > self.dim() {
            return Err(Error::InvalidRank {
                rank: self.rank,
                dim: self.dim(),
            });
        }
        if self.k_values.is_empty() {
            return bad("k_values is empty".into());
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k_values must be strictly ascending".into());
        }
        let n = self.n_effects();
        if let Some(&k) = self.k_values.iter().find(|&&k| k > n) {
            return Err(Error::InvalidK { k, n });
        }
        if self.methods.is_empty() {
            return bad("methods is empty".into());
        }
        if !(0.0..1.0).contains(&self.noise_level) {
            return bad(format!("noise_level {} outside [0, 1)", self.noise_level));
        }
        if !(self.convergence_cutoff > 0.0) {
            return bad("convergence_cutoff must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub state_id: usize,
    pub k: usize,
    pub method: Method,
    pub fidelity_to_target: f64,
    pub trace_dist_to_target: f64,
    pub fidelity_to_maxent: f64,
    pub vn_entropy: f64,
    /// 0 when nothing is unmeasured or the unmeasured mass is zero.
    pub kl_uniform: f64,
    pub total_unmeasured_mass: f64,
    pub solver_status: SolveStatus,
    pub wall_time_ms: f64,
}

impl TrialResult {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::FidelityToTarget => self.fidelity_to_target,
            Metric::TraceDistToTarget => self.trace_dist_to_target,
            Metric::FidelityToMaxent => self.fidelity_to_maxent,
            Metric::VnEntropy => self.vn_entropy,
            Metric::KlUniform => self.kl_uniform,
            Metric::TotalUnmeasuredMass => self.total_unmeasured_mass,
        }
    }

    pub fn failed(&self) -> bool {
        self.solver_status.is_failure()
    }
}

/// Aggregated per-trial quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    FidelityToTarget,
    TraceDistToTarget,
    FidelityToMaxent,
    VnEntropy,
    KlUniform,
    TotalUnmeasuredMass,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::FidelityToTarget,
        Metric::TraceDistToTarget,
        Metric::FidelityToMaxent,
        Metric::VnEntropy,
        Metric::KlUniform,
        Metric::TotalUnmeasuredMass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::FidelityToTarget => "fidelity_to_target",
            Metric::TraceDistToTarget => "trace_dist_to_target",
            Metric::FidelityToMaxent => "fidelity_to_maxent",
            Metric::VnEntropy => "vn_entropy",
            Metric::KlUniform => "kl_uniform",
            Metric::TotalUnmeasuredMass => "total_unmeasured_mass",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric '{s}'")))
    }
}

fn unmeasured_stats(rho: &DensityMatrix, povm: &Povm, plan: &SubsetPlan) -> Result<(f64, f64)> {
    if plan.unmeasured().is_empty() {
        return Ok((0.0, 0.0));
    }
    let u = unmeasured_vector(rho, povm, plan)?;
    let kl = match kl_from_uniform(&u) {
        Ok(v) => v,
        Err(Error::ZeroMass) => 0.0,
        Err(e) => return Err(e),
    };
    Ok((kl, u.total_mass))
}

/// The target state of trial `state_id`.
pub fn sample_target(cfg: &ExperimentConfig, state_id: usize) -> Result<DensityMatrix> {
    let mut rng = cfg.root_seed.derive("state", &[state_id as u64]).rng();
    if cfg.rank == 1 {
        haar_pure(cfg.n_qubits, &mut rng)
    } else {
        random_rank_r(cfg.dim(), cfg.rank, &mut rng)
    }
}

/// Measured subset and (possibly noisy) frequencies shared by every method
/// of trial `(state_id, k)`.
pub fn trial_data(
    cfg: &ExperimentConfig,
    povm: &Povm,
    target: &DensityMatrix,
    state_id: usize,
    k: usize,
) -> Result<(SubsetPlan, FrequencyVector)> {
    let idx = [state_id as u64, k as u64];
    let plan = select_subset(povm.len(), k, &mut cfg.root_seed.derive("plan", &idx).rng())?;
    let exact = expectations(target, povm, &plan)?;
    let data = add_noise(
        &exact,
        cfg.noise_level,
        cfg.noise_model,
        &mut cfg.root_seed.derive("noise", &idx).rng(),
    );
    Ok((plan, data))
}

/// All trials for one target state, in `(k, method)` order.
fn run_state(cfg: &ExperimentConfig, povm: &Povm, state_id: usize) -> Result<Vec<TrialResult>> {
    let target = sample_target(cfg, state_id)?;
    let sdp_opts = cfg.tolerances.sdp_options();
    let me_opts = cfg.tolerances.maxent_options();
    let mut out = Vec::with_capacity(cfg.k_values.len() * cfg.methods.len());
    for &k in &cfg.k_values {
        let (plan, data) = trial_data(cfg, povm, &target, state_id, k)?;
        let f = &data.values;
        let measured = povm.select(plan.measured());

        let timed = |m: Method| -> (Result<Reconstruction>, f64) {
            let t0 = Instant::now();
            let r = match m {
                Method::MaxEnt => maxent_estimate(cfg.dim(), &measured, f, &me_opts),
                Method::Pvqt(p) => pvqt_estimate(povm, &plan, f, p, &sdp_opts),
            };
            (r, t0.elapsed().as_secs_f64() * 1e3)
        };
        let (maxent, maxent_ms) = timed(Method::MaxEnt);
        let maxent_rho = maxent.as_ref().ok().map(|r| r.rho.clone());

        for &method in &cfg.methods {
            let (rec, ms) = match method {
                Method::MaxEnt => (maxent.clone(), maxent_ms),
                m => timed(m),
            };
            let row = match rec {
                Ok(r) => {
                    let fid_me = match &maxent_rho {
                        Some(me) => fidelity(&r.rho, me)?,
                        None => f64::NAN,
                    };
                    let (kl, mass) = unmeasured_stats(&r.rho, povm, &plan)?;
                    TrialResult {
                        state_id,
                        k,
                        method,
                        fidelity_to_target: fidelity(&r.rho, &target)?,
                        trace_dist_to_target: trace_distance(&r.rho, &target)?,
                        fidelity_to_maxent: fid_me,
                        vn_entropy: vn_entropy(&r.rho),
                        kl_uniform: kl,
                        total_unmeasured_mass: mass,
                        solver_status: r.diagnostics.status,
                        wall_time_ms: ms,
                    }
                }
                Err(e) => {
                    log::warn!("state {state_id}, k {k}, {method}: {e}");
                    TrialResult {
                        state_id,
                        k,
                        method,
                        fidelity_to_target: f64::NAN,
                        trace_dist_to_target: f64::NAN,
                        fidelity_to_maxent: f64::NAN,
                        vn_entropy: f64::NAN,
                        kl_uniform: f64::NAN,
                        total_unmeasured_mass: f64::NAN,
                        solver_status: SolveStatus::NumericalTrouble,
                        wall_time_ms: ms,
                    }
                }
            };
            out.push(row);
        }
    }
    Ok(out)
}

/// Runs the sweep on the current rayon pool. Results are ordered by
/// `(state_id, k, method position in the config)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let povm = sic_product(cfg.n_qubits)?;
    let per_state: Vec<Result<Vec<TrialResult>>> = (0..cfg.n_states)
        .into_par_iter()
        .map(|i| run_state(cfg, &povm, i))
        .collect();
    let mut out = Vec::new();
    for r in per_state {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub k: usize,
    pub method: Method,
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// Successful trials.
    pub count: usize,
    pub failures: usize,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary statistics of `values`; `None` when empty.
pub fn summarize(values: &[f64]) -> Option<(f64, f64, f64, f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Some((
        mean,
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.25),
        quantile_sorted(&v, 0.75),
        v[0],
        v[v.len() - 1],
    ))
}

/// One row per `(k, method, metric)`; failed trials are excluded from the
/// statistics and counted in `failures`. Groups follow first appearance of
/// each method, with `k` ascending.
pub fn aggregate(results: &[TrialResult]) -> Vec<AggregateRow> {
    let mut method_order: Vec<Method> = Vec::new();
    for r in results {
        if !method_order.contains(&r.method) {
            method_order.push(r.method);
        }
    }
    let mut groups: BTreeMap<(usize, usize), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        let mi = method_order.iter().position(|m| *m == r.method).expect("seen");
        groups.entry((r.k, mi)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((k, mi), trials) in groups {
        let ok: Vec<&&TrialResult> = trials.iter().filter(|t| !t.failed()).collect();
        let failures = trials.len() - ok.len();
        for metric in Metric::ALL {
            let vals: Vec<f64> = ok.iter().map(|t| t.metric(metric)).filter(|v| v.is_finite()).collect();
            let (mean, median, q1, q3, min, max) =
                summarize(&vals).unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN));
            out.push(AggregateRow {
                k,
                method: method_order[mi],
                metric: metric.name().to_string(),
                mean,
                median,
                q1,
                q3,
                min,
                max,
                count: vals.len(),
                failures,
            });
        }
    }
    out
}

/// Smallest `k` at which every successful trial of `method` is within
/// `cutoff` trace distance of its target, if any.
pub fn convergence_k(results: &[TrialResult], method: Method, cutoff: f64) -> Option<usize> {
    let mut by_k: BTreeMap<usize, bool> = BTreeMap::new();
    for r in results.iter().filter(|r| r.method == method && !r.failed()) {
        let e = by_k.entry(r.k).or_insert(true);
        *e &= r.trace_dist_to_target < cutoff;
    }
    by_k.into_iter().find(|&(_, ok)| ok).map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram on `[lo, hi]`. Bins are right-open except the last,
/// which includes `hi`; values outside the range are not counted.
pub fn histogram(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if !(hi > lo) {
        return Err(Error::Config(format!("empty histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        if !(lo..=hi).contains(&v) {
            continue;
        }
        let mut b = (((v - lo) / width).floor() as usize).min(bins - 1);
        // guard against rounding in the division
        while b > 0 && v < edges[b] {
            b -= 1;
        }
        while b + 1 < bins && v >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}
