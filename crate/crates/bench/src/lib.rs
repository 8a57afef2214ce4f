//! Shared fixtures for the benchmarks in `benches/`.

use tomoforge::measure::expectations;
use tomoforge::povm::{select_subset, sic_product};
use tomoforge::states::haar_pure;
use tomoforge::{CMatrix, Povm, RngSeed, SubsetPlan};

/// A 3-qubit pure target measured on `k` random product-SIC effects.
pub struct Instance {
    pub povm: Povm,
    pub plan: SubsetPlan,
    pub measured: Vec<CMatrix>,
    pub f: Vec<f64>,
}

pub fn instance(n_qubits: usize, k: usize, seed: u64) -> Instance {
    let root = RngSeed(seed);
    let povm = sic_product(n_qubits).expect("valid qubit count");
    let target = haar_pure(n_qubits, &mut root.derive("state", &[]).rng()).expect("valid qubit count");
    let plan = select_subset(povm.len(), k, &mut root.derive("plan", &[]).rng()).expect("valid k");
    let f = expectations(&target, &povm, &plan).expect("dimensions agree").values;
    let measured = povm.select(plan.measured());
    Instance {
        povm,
        plan,
        measured,
        f,
    }
}
