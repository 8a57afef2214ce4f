//! Acceptance criteria A1-A11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use tomoforge::estimators::{
    compile_pvqt, compile_vqt, compile_vqt_inf, estimate_compiled, maxent_estimate, pvqt_estimate,
    MaxEntOptions,
};
use tomoforge::harness::{run_experiment, sample_target, trial_data, SCHEMA_VERSION};
use tomoforge::measure::expectations;
use tomoforge::metrics::{kl_from_uniform, unmeasured_vector};
use tomoforge::povm::{computational_basis, qubit_sic, select_subset, sic_product};
use tomoforge::sdp::{reference_programs, solve};
use tomoforge::states::{random_rank_r, trace_distance, vn_entropy};
use tomoforge::{
    CMatrix, DensityMatrix, ExperimentConfig, Method, PvqtParams, RngSeed, SdpOptions, SdpStatus,
    SubsetPlan, TrialResult,
};

type Outcome = Result<String, String>;

/// Orderings between means treat values within this relative distance as
/// tied: once every method recovers the target, the compared quantities are
/// equal up to solver accuracy.
const TIE_REL: f64 = 1e-6;

fn at_least(a: f64, b: f64) -> bool {
    a >= b || (b - a) <= TIE_REL * a.abs().max(b.abs())
}

const MAXENT: Method = Method::MaxEnt;
const VQT: Method = Method::Pvqt(PvqtParams::VQT);
const VQT_INF: Method = Method::Pvqt(PvqtParams::VQT_INF);
const PVQT: Method = Method::Pvqt(PvqtParams { alpha: 1.0, beta: 0.01 });

fn config(n_states: usize, rank: usize, k_values: Vec<usize>, methods: Vec<Method>, noise: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        n_qubits: 3,
        n_states,
        rank,
        k_values,
        methods,
        noise_level: noise,
        noise_model: Default::default(),
        root_seed: RngSeed(seed),
        convergence_cutoff: 1e-4,
        tolerances: Default::default(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Metric values of `method` at `k` over successful trials.
fn values(results: &[TrialResult], method: Method, k: usize, f: impl Fn(&TrialResult) -> f64) -> Vec<f64> {
    results
        .iter()
        .filter(|r| r.method == method && r.k == k && !r.failed())
        .map(f)
        .collect()
}

/// Means of a metric for two methods over the trials where both succeeded.
fn paired_means(
    results: &[TrialResult],
    a: Method,
    b: Method,
    k: usize,
    f: impl Fn(&TrialResult) -> f64,
) -> (f64, f64, usize) {
    let pick = |m: Method| -> BTreeMap<usize, f64> {
        results
            .iter()
            .filter(|r| r.method == m && r.k == k && !r.failed() && f(r).is_finite())
            .map(|r| (r.state_id, f(r)))
            .collect()
    };
    let (pa, pb) = (pick(a), pick(b));
    let shared: Vec<usize> = pa.keys().filter(|s| pb.contains_key(s)).copied().collect();
    let ma = mean(&shared.iter().map(|s| pa[s]).collect::<Vec<_>>());
    let mb = mean(&shared.iter().map(|s| pb[s]).collect::<Vec<_>>());
    (ma, mb, shared.len())
}

fn failures(results: &[TrialResult]) -> usize {
    results.iter().filter(|r| r.failed()).count()
}

fn a1() -> Outcome {
    let cfg = config(20, 1, vec![64], vec![MAXENT, VQT, VQT_INF, PVQT], 0.0, 101);
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let worst = res.iter().map(|r| r.trace_dist_to_target).fold(0.0, f64::max);
    let nan = res.iter().any(|r| r.trace_dist_to_target.is_nan());
    if failures(&res) == 0 && !nan && worst < 1e-4 {
        Ok(format!("{} trials, max trace distance {worst:.2e}", res.len()))
    } else {
        Err(format!("{} failed trials, max trace distance {worst:.2e}", failures(&res)))
    }
}

fn a2() -> Outcome {
    let cfg = config(50, 1, vec![32], vec![MAXENT, VQT_INF], 0.0, 102);
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let me = mean(&values(&res, MAXENT, 32, |r| r.fidelity_to_target));
    let vi = mean(&values(&res, VQT_INF, 32, |r| r.fidelity_to_target));
    let msg = format!("mean fidelity MaxEnt {me:.6}, VQT-inf {vi:.6}, {} failed", failures(&res));
    if me > 0.99 && vi > 0.99 && (me - vi).abs() < 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a3() -> Outcome {
    let povm = sic_product(3).map_err(|e| e.to_string())?;
    let opts = SdpOptions::default();
    let mut worst: f64 = 0.0;
    let root = RngSeed(103);
    for i in 0..10u64 {
        let target = tomoforge::states::haar_pure(3, &mut root.derive("state", &[i]).rng()).unwrap();
        for k in [8usize, 16, 32] {
            let plan = select_subset(64, k, &mut root.derive("plan", &[i, k as u64]).rng()).unwrap();
            let f = expectations(&target, &povm, &plan).unwrap().values;
            let measured = povm.select(plan.measured());
            let unmeasured = povm.select(plan.unmeasured());
            let pairs = [
                (PvqtParams::VQT, compile_vqt(&measured, &unmeasured, &f).unwrap()),
                (PvqtParams::VQT_INF, compile_vqt_inf(&measured, &unmeasured, &f).unwrap()),
            ];
            for (params, direct) in pairs {
                let via = compile_pvqt(&measured, &unmeasured, &f, params).unwrap();
                let a = estimate_compiled(&via, &measured, &f, &opts).map_err(|e| e.to_string())?;
                let b = estimate_compiled(&direct, &measured, &f, &opts).map_err(|e| e.to_string())?;
                worst = worst.max(trace_distance(&a.rho, &b.rho).unwrap());
            }
        }
    }
    if worst < 1e-6 {
        Ok(format!("60 pairs, max trace distance {worst:.2e}"))
    } else {
        Err(format!("max trace distance {worst:.2e}"))
    }
}

fn a4() -> Outcome {
    use rand::Rng;
    let povm = computational_basis(8);
    let (mut worst_td, mut worst_kl): (f64, f64) = (0.0, 0.0);
    for i in 0..10u64 {
        let mut rng = RngSeed(104).derive("diag", &[i]).rng();
        let w: Vec<f64> = (0..8).map(|_| 0.02 + rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        let target = DensityMatrix::diagonal(&w.iter().map(|x| x / s).collect::<Vec<_>>()).unwrap();
        for k in [2, 4, 6] {
            let plan = SubsetPlan::prefix(8, k).unwrap();
            let f = expectations(&target, &povm, &plan).unwrap().values;
            let me = maxent_estimate(8, &povm.select(plan.measured()), &f, &MaxEntOptions::default())
                .map_err(|e| e.to_string())?;
            let vi = pvqt_estimate(&povm, &plan, &f, PvqtParams::VQT_INF, &SdpOptions::default())
                .map_err(|e| e.to_string())?;
            if me.diagnostics.status.is_failure() || vi.diagnostics.status.is_failure() {
                return Err(format!("solver failure at state {i}, K = {k}"));
            }
            worst_td = worst_td.max(trace_distance(&me.rho, &vi.rho).unwrap());
            for rho in [&me.rho, &vi.rho] {
                let kl = kl_from_uniform(&unmeasured_vector(rho, &povm, &plan).unwrap()).unwrap();
                worst_kl = worst_kl.max(kl);
            }
        }
    }
    let msg = format!("max trace distance {worst_td:.2e}, max KL {worst_kl:.2e}");
    if worst_td < 1e-5 && worst_kl < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// The A5-A7 sweep.
fn sweep_a5() -> Result<(ExperimentConfig, Vec<TrialResult>), String> {
    let cfg = config(50, 1, vec![16, 24, 32], vec![MAXENT, VQT, VQT_INF, PVQT], 0.0, 105);
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    Ok((cfg, res))
}

fn a5(res: &[TrialResult]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for k in [16, 24, 32] {
        let (p, v, n) = paired_means(res, PVQT, VQT_INF, k, |r| r.fidelity_to_maxent);
        ok &= at_least(p, v);
        parts.push(format!("K={k}: PVQT {p:.9} vs VQT-inf {v:.9} (n={n})"));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn a6(res: &[TrialResult]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for k in [16, 24, 32] {
        let (vi, v, n) = paired_means(res, VQT_INF, VQT, k, |r| r.kl_uniform);
        ok &= at_least(v, vi);
        parts.push(format!("K={k}: VQT-inf {vi:.9e} vs VQT {v:.9e} (n={n})"));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn a7(cfg: &ExperimentConfig) -> Outcome {
    let povm = sic_product(3).unwrap();
    let opts = SdpOptions::default();
    let (mut checked, mut worst) = (0usize, f64::INFINITY);
    let mut violations = Vec::new();
    for s in 0..cfg.n_states {
        let target = sample_target(cfg, s).unwrap();
        for &k in &cfg.k_values {
            let (plan, data) = trial_data(cfg, &povm, &target, s, k).unwrap();
            let f = &data.values;
            let me = maxent_estimate(8, &povm.select(plan.measured()), f, &MaxEntOptions::default())
                .map_err(|e| e.to_string())?;
            if me.diagnostics.status.is_failure() {
                continue;
            }
            let s_me = vn_entropy(&me.rho);
            for params in [PvqtParams::VQT, PvqtParams::VQT_INF, PvqtParams { alpha: 1.0, beta: 0.01 }] {
                let r = pvqt_estimate(&povm, &plan, f, params, &opts).map_err(|e| e.to_string())?;
                if r.diagnostics.status.is_failure() || r.deltas.iter().any(|&d| d > 1e-6) {
                    continue;
                }
                checked += 1;
                let margin = s_me - vn_entropy(&r.rho);
                worst = worst.min(margin);
                if margin < -1e-4 {
                    violations.push(format!("state {s}, K={k}, {params:?}: {margin:.2e}"));
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(format!("{checked} reconstructions checked, min S(MaxEnt) - S(VQT) = {worst:.2e}"))
    } else {
        Err(format!("{} of {checked} violate: {}", violations.len(), violations.join(", ")))
    }
}

fn a8() -> Outcome {
    let ks = [16, 32, 45];
    let cfg = config(30, 2, ks.to_vec(), vec![MAXENT, VQT, VQT_INF, PVQT], 0.05, 108);
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [MAXENT, VQT, VQT_INF, PVQT] {
        let curve: Vec<f64> = ks
            .iter()
            .map(|&k| mean(&values(&res, m, k, |r| r.trace_dist_to_target)))
            .collect();
        let monotone = curve.windows(2).all(|w| w[1] < w[0]);
        ok &= monotone && curve[2] < 5e-2;
        parts.push(format!("{m}: {:.3e} > {:.3e} > {:.3e}", curve[0], curve[1], curve[2]));
    }
    parts.push(format!("{} failed", failures(&res)));
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

/// Linear inversion on the qubit SIC: `rho = sum c_j E_j` with
/// `G c = f`, `G_ij = tr(E_i E_j)`, solved by Gaussian elimination.
fn linear_inversion(effects: &[CMatrix], f: &[f64]) -> CMatrix {
    let n = effects.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| effects[i].trace_product_re(&effects[j])).collect();
            row.push(f[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let mut rho = CMatrix::zeros(2, 2);
    for j in 0..n {
        rho.axpy(a[j][n] / a[j][j], &effects[j]);
    }
    rho
}

fn a9() -> Outcome {
    let sic = qubit_sic();
    let plan = SubsetPlan::prefix(4, 4).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let target = random_rank_r(2, 2, &mut RngSeed(109).derive("state", &[i]).rng()).unwrap();
        let f = expectations(&target, &sic, &plan).unwrap().values;
        let me = maxent_estimate(2, sic.effects(), &f, &MaxEntOptions::default()).map_err(|e| e.to_string())?;
        let oracle = DensityMatrix::new(linear_inversion(sic.effects(), &f)).map_err(|e| e.to_string())?;
        worst = worst.max(trace_distance(&me.rho, &oracle).unwrap());
    }
    if worst < 1e-6 {
        Ok(format!("20 states, max trace distance {worst:.2e}"))
    } else {
        Err(format!("max trace distance {worst:.2e}"))
    }
}

fn a10() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for r in reference_programs() {
        let sol = solve(&r.problem, &SdpOptions::default()).map_err(|e| e.to_string())?;
        let err = (sol.objective - r.optimum).abs();
        ok &= sol.status == SdpStatus::Optimal && err < 1e-7;
        parts.push(format!("{} |err| {err:.1e}", r.name));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn a11() -> Outcome {
    let preset = concat!(env!("CARGO_MANIFEST_DIR"), "/presets/fig2_3q_pure.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_tomoforge"))
            .args(["run", "--config", preset, "--out"])
            .arg(&out)
            .env_remove("TOMOFORGE_SEED")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run {run} exited with {status}"));
        }
        outputs.push(std::fs::read(out.join("trials.csv")).map_err(|e| e.to_string())?);
    }
    if outputs[0] == outputs[1] {
        Ok(format!("two runs, {} identical bytes", outputs[0].len()))
    } else {
        Err("trials.csv differs between runs".into())
    }
}

fn main() {
    let t_all = Instant::now();
    let mut failed = 0;
    let mut report = |id: &str, t: Instant, o: Outcome| {
        let secs = t.elapsed().as_secs_f64();
        match o {
            Ok(msg) => println!("{id} PASS ({secs:.1} s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{id} FAIL ({secs:.1} s): {msg}");
            }
        }
    };
    let t = Instant::now();
    report("A1", t, a1());
    let t = Instant::now();
    report("A2", t, a2());
    let t = Instant::now();
    report("A3", t, a3());
    let t = Instant::now();
    report("A4", t, a4());
    let t = Instant::now();
    match sweep_a5() {
        Ok((cfg, res)) => {
            report("A5", t, a5(&res));
            report("A6", t, a6(&res));
            let t = Instant::now();
            report("A7", t, a7(&cfg));
        }
        Err(e) => {
            for id in ["A5", "A6", "A7"] {
                report(id, t, Err(e.clone()));
            }
        }
    }
    let t = Instant::now();
    report("A8", t, a8());
    let t = Instant::now();
    report("A9", t, a9());
    let t = Instant::now();
    report("A10", t, a10());
    let t = Instant::now();
    report("A11", t, a11());
    println!("acceptance: {} failed, {:.1} s total", failed, t_all.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
