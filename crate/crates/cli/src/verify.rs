//! Built-in invariant checks behind `tomoforge verify`.
//!
//! Checks run against a [`Probes`] table so that tests can substitute a
//! deliberately broken implementation and confirm the suite notices.

use std::time::Instant;

use rand::Rng as _;
use tomoforge::cxmat::herm_eig;
use tomoforge::estimators::{
    compile_pvqt, compile_vqt, compile_vqt_inf, estimate_compiled, maxent_estimate, pvqt_estimate,
    MaxEntOptions,
};
use tomoforge::harness::{histogram, quantile_sorted};
use tomoforge::measure::expectations;
use tomoforge::metrics::{kl_from_uniform, unmeasured_vector};
use tomoforge::povm::{computational_basis, qubit_sic, select_subset, sic_product};
use tomoforge::sdp::{reference_programs, solve};
use tomoforge::states::{haar_pure, random_rank_r, trace_distance, vn_entropy};
use tomoforge::{
    CMatrix, DensityMatrix, Povm, PvqtParams, RngSeed, SdpOptions, SdpStatus, SubsetPlan, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Fast,
    Full,
}

pub type FidelityFn = fn(&DensityMatrix, &DensityMatrix) -> tomoforge::Result<f64>;

/// Implementations under test.
#[derive(Clone, Copy)]
pub struct Probes {
    pub fidelity: FidelityFn,
}

impl Default for Probes {
    fn default() -> Self {
        Probes {
            fidelity: tomoforge::states::fidelity,
        }
    }
}

type Check = fn(&Probes) -> Result<(), String>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: f64,
}

const SEED: RngSeed = RngSeed(0x7e57_5eed);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sample_states(n_qubits: usize, tag: &str, count: usize) -> Result<Vec<DensityMatrix>, String> {
    let d = 1 << n_qubits;
    (0..count)
        .map(|i| {
            let mut rng = SEED.derive(tag, &[i as u64]).rng();
            match i % 3 {
                0 => haar_pure(n_qubits, &mut rng),
                1 => random_rank_r(d, 2, &mut rng),
                _ => random_rank_r(d, d, &mut rng),
            }
            .map_err(err)
        })
        .collect()
}

fn random_ket(d: usize, rng: &mut impl rand::Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

fn fidelity_identity(p: &Probes) -> Result<(), String> {
    for rho in sample_states(2, "fid_id", 9)? {
        let f = (p.fidelity)(&rho, &rho).map_err(err)?;
        ensure((f - 1.0).abs() < 1e-9, || format!("F(rho, rho) = {f}"))?;
    }
    Ok(())
}

fn fidelity_symmetry_and_range(p: &Probes) -> Result<(), String> {
    let states = sample_states(2, "fid_sym", 9)?;
    for a in &states {
        for b in &states {
            let ab = (p.fidelity)(a, b).map_err(err)?;
            let ba = (p.fidelity)(b, a).map_err(err)?;
            ensure((0.0..=1.0).contains(&ab), || format!("F = {ab} outside [0, 1]"))?;
            ensure((ab - ba).abs() < 1e-9, || format!("F(a,b) = {ab}, F(b,a) = {ba}"))?;
        }
    }
    Ok(())
}

fn fidelity_pure_overlap(p: &Probes) -> Result<(), String> {
    let mut rng = SEED.derive("fid_pure", &[]).rng();
    for _ in 0..10 {
        let psi = random_ket(4, &mut rng);
        let phi = random_ket(4, &mut rng);
        let overlap: C64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
        let want = overlap.norm_sqr();
        let a = DensityMatrix::pure(&psi).map_err(err)?;
        let b = DensityMatrix::pure(&phi).map_err(err)?;
        let got = (p.fidelity)(&a, &b).map_err(err)?;
        ensure((got - want).abs() < 1e-9, || format!("pure-state F = {got}, |<psi|phi>|^2 = {want}"))?;
    }
    let zero = DensityMatrix::diagonal(&[1.0, 0.0]).map_err(err)?;
    let one = DensityMatrix::diagonal(&[0.0, 1.0]).map_err(err)?;
    let f = (p.fidelity)(&zero, &one).map_err(err)?;
    ensure(f.abs() < 1e-12, || format!("orthogonal states have F = {f}"))
}

fn trace_distance_bounds(p: &Probes) -> Result<(), String> {
    let states = sample_states(2, "td", 9)?;
    for a in &states {
        ensure(trace_distance(a, a).map_err(err)? < 1e-9, || "T(rho, rho) != 0".into())?;
        for b in &states {
            let t = trace_distance(a, b).map_err(err)?;
            let f = (p.fidelity)(a, b).map_err(err)?;
            ensure((0.0..=1.0).contains(&t), || format!("T = {t} outside [0, 1]"))?;
            // Fuchs-van de Graaf
            ensure(1.0 - f.sqrt() <= t + 1e-9 && t <= (1.0 - f).max(0.0).sqrt() + 1e-9, || {
                format!("T = {t} and F = {f} violate 1 - sqrt F <= T <= sqrt(1 - F)")
            })?;
        }
    }
    Ok(())
}

fn entropy_extremes(_: &Probes) -> Result<(), String> {
    for d in [2, 4, 8] {
        let s = vn_entropy(&DensityMatrix::maximally_mixed(d));
        ensure((s - (d as f64).ln()).abs() < 1e-12, || format!("S(I/{d}) = {s}"))?;
    }
    let mut rng = SEED.derive("entropy", &[]).rng();
    let s = vn_entropy(&haar_pure(3, &mut rng).map_err(err)?);
    ensure(s.abs() < 1e-9, || format!("pure-state entropy {s}"))
}

fn sic_structure(_: &Probes) -> Result<(), String> {
    let q = qubit_sic();
    let g = q.gram();
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { 0.25 } else { 1.0 / 12.0 };
            ensure((g[(i, j)] - want).abs() < 1e-12, || {
                format!("qubit SIC overlap ({i},{j}) = {}", g[(i, j)])
            })?;
        }
    }
    let p3 = sic_product(3).map_err(err)?;
    ensure(p3.len() == 64, || format!("3-qubit product SIC has {} effects", p3.len()))?;
    let mut sum = CMatrix::zeros(8, 8);
    for e in p3.effects() {
        sum.axpy(1.0, e);
        let w = herm_eig(e).map_err(err)?.eigenvalues;
        ensure(w.iter().filter(|&&x| x > 1e-12).count() == 1, || "effect is not rank one".into())?;
    }
    let dev = (&sum - &CMatrix::identity(8)).max_abs();
    ensure(dev < 1e-12, || format!("effects sum to identity only within {dev:.3e}"))
}

fn sdp_reference_programs(_: &Probes) -> Result<(), String> {
    for r in reference_programs() {
        let sol = solve(&r.problem, &SdpOptions::default()).map_err(err)?;
        ensure(sol.status == SdpStatus::Optimal, || format!("{}: status {:?}", r.name, sol.status))?;
        ensure((sol.objective - r.optimum).abs() < 1e-7, || {
            format!("{}: objective {} vs {}", r.name, sol.objective, r.optimum)
        })?;
    }
    Ok(())
}

fn maxent_eigenbasis(_: &Probes) -> Result<(), String> {
    // measuring two of three basis projectors leaves the third at 1 - sum
    let povm = computational_basis(3);
    let measured = povm.select(&[0, 1]);
    let r = maxent_estimate(3, &measured, &[0.5, 0.2], &MaxEntOptions::default()).map_err(err)?;
    let want = DensityMatrix::diagonal(&[0.5, 0.2, 0.3]).map_err(err)?;
    let t = trace_distance(&r.rho, &want).map_err(err)?;
    ensure(t < 1e-8, || format!("MaxEnt off by {t:.3e} in trace distance"))
}

fn quartiles_and_histogram(_: &Probes) -> Result<(), String> {
    let v = [1.0, 2.0, 3.0, 4.0];
    let q = [quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75)];
    ensure(q == [1.75, 2.5, 3.25], || format!("quartiles of 1..4 = {q:?}"))?;
    let values: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let h = histogram(&values, 10, (0.0, 1.0)).map_err(err)?;
    let total: usize = h.counts.iter().sum();
    ensure(total == 100, || format!("histogram holds {total} of 100 values"))?;
    ensure(h.counts.iter().all(|&c| c == 10), || format!("uneven counts {:?}", h.counts))
}

fn seed_derivation(_: &Probes) -> Result<(), String> {
    let a = SEED.derive("plan", &[3, 16]);
    ensure(a == SEED.derive("plan", &[3, 16]), || "derivation is not a function".into())?;
    ensure(a != SEED.derive("plan", &[16, 3]), || "index order ignored".into())?;
    ensure(a != SEED.derive("noise", &[3, 16]), || "tag ignored".into())?;
    let x: u64 = a.rng().random();
    let y: u64 = a.rng().random();
    ensure(x == y, || "generator is not reproducible".into())
}

fn kl_of_uniform(_: &Probes) -> Result<(), String> {
    let povm = computational_basis(4);
    let plan = SubsetPlan::prefix(4, 1).map_err(err)?;
    let rho = DensityMatrix::diagonal(&[0.4, 0.2, 0.2, 0.2]).map_err(err)?;
    let kl = kl_from_uniform(&unmeasured_vector(&rho, &povm, &plan).map_err(err)?).map_err(err)?;
    ensure(kl.abs() < 1e-12, || format!("KL of a uniform tail = {kl}"))
}

fn quorum_reconstruction(p: &Probes) -> Result<(), String> {
    let povm = sic_product(3).map_err(err)?;
    let plan = SubsetPlan::prefix(64, 64).map_err(err)?;
    let opts = SdpOptions::default();
    for i in 0..3 {
        let target = haar_pure(3, &mut SEED.derive("quorum", &[i]).rng()).map_err(err)?;
        let f = expectations(&target, &povm, &plan).map_err(err)?.values;
        let me = maxent_estimate(8, povm.effects(), &f, &MaxEntOptions::default()).map_err(err)?;
        let mut recs = vec![("maxent", me.rho)];
        for (name, params) in [("vqt", PvqtParams::VQT), ("vqt_inf", PvqtParams::VQT_INF)] {
            recs.push((name, pvqt_estimate(&povm, &plan, &f, params, &opts).map_err(err)?.rho));
        }
        for (name, rho) in recs {
            let t = trace_distance(&rho, &target).map_err(err)?;
            ensure(t < 1e-4, || format!("state {i}, {name}: trace distance {t:.3e} at quorum"))?;
            let f = (p.fidelity)(&rho, &target).map_err(err)?;
            ensure(f > 1.0 - 1e-4, || format!("state {i}, {name}: fidelity {f} at quorum"))?;
        }
    }
    Ok(())
}

fn eigenbasis_equivalence(_: &Probes) -> Result<(), String> {
    let povm = computational_basis(8);
    for i in 0..3u64 {
        let mut rng = SEED.derive("eigenbasis", &[i]).rng();
        let w: Vec<f64> = (0..8).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let target = DensityMatrix::diagonal(&w.iter().map(|x| x / total).collect::<Vec<_>>()).map_err(err)?;
        for k in [2, 4, 6] {
            let plan = SubsetPlan::prefix(8, k).map_err(err)?;
            let f = expectations(&target, &povm, &plan).map_err(err)?.values;
            let me = maxent_estimate(8, &povm.select(plan.measured()), &f, &MaxEntOptions::default())
                .map_err(err)?;
            let vi = pvqt_estimate(&povm, &plan, &f, PvqtParams::VQT_INF, &SdpOptions::default())
                .map_err(err)?;
            let t = trace_distance(&me.rho, &vi.rho).map_err(err)?;
            ensure(t < 1e-5, || format!("state {i}, K = {k}: MaxEnt and VQT-inf differ by {t:.3e}"))?;
        }
    }
    Ok(())
}

fn limit_case_identities(_: &Probes) -> Result<(), String> {
    let povm: Povm = sic_product(2).map_err(err)?;
    let opts = SdpOptions::default();
    for i in 0..3u64 {
        let target = haar_pure(2, &mut SEED.derive("limits", &[i]).rng()).map_err(err)?;
        for k in [4, 8, 12] {
            let plan = select_subset(16, k, &mut SEED.derive("limits_plan", &[i, k as u64]).rng())
                .map_err(err)?;
            let f = expectations(&target, &povm, &plan).map_err(err)?.values;
            let measured = povm.select(plan.measured());
            let unmeasured = povm.select(plan.unmeasured());
            for (params, direct) in [
                (PvqtParams::VQT, compile_vqt(&measured, &unmeasured, &f).map_err(err)?),
                (PvqtParams::VQT_INF, compile_vqt_inf(&measured, &unmeasured, &f).map_err(err)?),
            ] {
                let via = compile_pvqt(&measured, &unmeasured, &f, params).map_err(err)?;
                let a = estimate_compiled(&via, &measured, &f, &opts).map_err(err)?;
                let b = estimate_compiled(&direct, &measured, &f, &opts).map_err(err)?;
                let t = trace_distance(&a.rho, &b.rho).map_err(err)?;
                ensure(t < 1e-6, || format!("state {i}, K = {k}, {params:?}: paths differ by {t:.3e}"))?;
            }
        }
    }
    Ok(())
}

/// `(name, minimum level, check)`.
const CHECKS: &[(&str, Level, Check)] = &[
    ("fidelity_identity", Level::Fast, fidelity_identity),
    ("fidelity_symmetry_and_range", Level::Fast, fidelity_symmetry_and_range),
    ("fidelity_pure_overlap", Level::Fast, fidelity_pure_overlap),
    ("trace_distance_bounds", Level::Fast, trace_distance_bounds),
    ("entropy_extremes", Level::Fast, entropy_extremes),
    ("sic_structure", Level::Fast, sic_structure),
    ("sdp_reference_programs", Level::Fast, sdp_reference_programs),
    ("maxent_eigenbasis", Level::Fast, maxent_eigenbasis),
    ("quartiles_and_histogram", Level::Fast, quartiles_and_histogram),
    ("seed_derivation", Level::Fast, seed_derivation),
    ("kl_of_uniform", Level::Fast, kl_of_uniform),
    ("quorum_reconstruction", Level::Full, quorum_reconstruction),
    ("eigenbasis_equivalence", Level::Full, eigenbasis_equivalence),
    ("limit_case_identities", Level::Full, limit_case_identities),
];

pub fn check_names(level: Level) -> Vec<&'static str> {
    CHECKS
        .iter()
        .filter(|(_, l, _)| level == Level::Full || *l == Level::Fast)
        .map(|(n, _, _)| *n)
        .collect()
}

/// Runs every check at `level`; a panicking check counts as a failure.
pub fn run_checks(level: Level, probes: &Probes) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .filter(|(_, l, _)| level == Level::Full || *l == Level::Fast)
        .map(|&(name, _, check)| {
            let t0 = Instant::now();
            let result = std::panic::catch_unwind(|| check(probes))
                .unwrap_or_else(|_| Err("check panicked".to_string()));
            let millis = t0.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(()) => CheckOutcome {
                    name,
                    passed: true,
                    detail: String::new(),
                    millis,
                },
                Err(detail) => CheckOutcome {
                    name,
                    passed: false,
                    detail,
                    millis,
                },
            }
        })
        .collect()
}
