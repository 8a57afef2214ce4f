//! POVMs: the single-qubit tetrahedral SIC, its n-fold tensor power, and the
//! split of effect indices into measured and unmeasured subsets.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cxmat::{herm_eig, kron, CMatrix, C64, RMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    effects: Vec<CMatrix>,
}

impl Povm {
    /// Checks PSD-ness (1e-10) and completeness (1e-9 entrywise).
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let dim = effects.first().map(CMatrix::rows).ok_or(Error::EmptyMeasuredSet)?;
        let mut total = CMatrix::zeros(dim, dim);
        for e in &effects {
            if e.shape() != (dim, dim) {
                return Err(Error::ShapeMismatch {
                    left: (dim, dim),
                    right: e.shape(),
                });
            }
            let min = herm_eig(e)?.eigenvalues[0];
            if min < -1e-10 {
                return Err(Error::InvalidState(format!("effect eigenvalue {min:.3e}")));
            }
            total += e;
        }
        let dev = (&total - &CMatrix::identity(dim)).max_abs();
        if dev > 1e-9 {
            return Err(Error::InvalidState(format!("effects sum to identity only within {dev:.3e}")));
        }
        Ok(Povm { dim, effects })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn effect(&self, i: usize) -> &CMatrix {
        &self.effects[i]
    }

    pub fn select(&self, indices: &[usize]) -> Vec<CMatrix> {
        indices.iter().map(|&i| self.effects[i].clone()).collect()
    }

    /// `G_ij = tr(E_i E_j)`.
    pub fn gram(&self) -> RMatrix {
        let n = self.len();
        let mut g = RMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.effects[i].trace_product_re(&self.effects[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PovmJson::from(self)).expect("POVM serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: PovmJson = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let effects = raw
            .effects
            .into_iter()
            .map(|pairs| {
                CMatrix::from_vec(
                    raw.dim,
                    raw.dim,
                    pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Povm::new(effects)
    }
}

/// On-disk form: `{"dim": d, "effects": [[[re, im], ...], ...]}` with each
/// effect flattened row-major.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmJson {
    dim: usize,
    effects: Vec<Vec<[f64; 2]>>,
}

impl From<&Povm> for PovmJson {
    fn from(p: &Povm) -> Self {
        PovmJson {
            dim: p.dim,
            effects: p
                .effects
                .iter()
                .map(|e| e.as_slice().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

/// Tetrahedral qubit SIC: `E_k = |psi_k><psi_k| / 2` with `|psi_0> = |0>` and
/// `|psi_k> = |0>/sqrt(3) + sqrt(2/3) e^{2 pi i k / 3} |1>` for `k = 1, 2, 3`.
pub fn qubit_sic() -> Povm {
    let mut effects = Vec::with_capacity(4);
    effects.push(CMatrix::outer(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).scale(0.5));
    let a = (1.0f64 / 3.0).sqrt();
    let b = (2.0f64 / 3.0).sqrt();
    for k in 1..=3 {
        let phase = C64::from_polar(b, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
        effects.push(CMatrix::outer(&[C64::new(a, 0.0), phase]).scale(0.5));
    }
    Povm {
        dim: 2,
        effects,
    }
}

/// `n`-fold tensor power; the first factor's index is the most significant.
pub fn tensor_povm(base: &Povm, n: usize) -> Result<Povm> {
    if n == 0 {
        return Err(Error::InvalidQubits(0));
    }
    let mut effects = base.effects.clone();
    for _ in 1..n {
        effects = effects
            .iter()
            .flat_map(|a| base.effects.iter().map(move |b| kron(a, b)))
            .collect();
    }
    Ok(Povm {
        dim: base.dim.pow(n as u32),
        effects,
    })
}

/// Product of qubit SICs on `n_qubits` qubits (`4^n` effects).
pub fn sic_product(n_qubits: usize) -> Result<Povm> {
    tensor_povm(&qubit_sic(), n_qubits)
}

/// Projectors onto the computational basis of `C^dim`.
pub fn computational_basis(dim: usize) -> Povm {
    let effects = (0..dim)
        .map(|k| {
            let mut e = CMatrix::zeros(dim, dim);
            e[(k, k)] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    Povm { dim, effects }
}

/// Which effects were measured. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPlan {
    measured: Vec<usize>,
    unmeasured: Vec<usize>,
}

impl SubsetPlan {
    /// `measured` in the given order; the unmeasured list is the ascending
    /// complement in `0..n`.
    pub fn new(measured: Vec<usize>, n: usize) -> Result<Self> {
        let k = measured.len();
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, n });
        }
        let mut seen = vec![false; n];
        for &i in &measured {
            if i >= n || seen[i] {
                return Err(Error::InvalidK { k, n });
            }
            seen[i] = true;
        }
        let unmeasured = (0..n).filter(|&i| !seen[i]).collect();
        Ok(SubsetPlan {
            measured,
            unmeasured,
        })
    }

    /// Explicit split; both lists are kept in the given order.
    pub fn from_parts(measured: Vec<usize>, unmeasured: Vec<usize>) -> Result<Self> {
        let n = measured.len() + unmeasured.len();
        let k = measured.len();
        let mut seen = vec![false; n];
        for &i in measured.iter().chain(&unmeasured) {
            if i >= n || seen[i] {
                return Err(Error::InvalidK { k, n });
            }
            seen[i] = true;
        }
        if k == 0 {
            return Err(Error::InvalidK { k, n });
        }
        Ok(SubsetPlan {
            measured,
            unmeasured,
        })
    }

    /// The first `k` effects, in index order.
    pub fn prefix(n: usize, k: usize) -> Result<Self> {
        Self::new((0..k).collect(), n)
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn unmeasured(&self) -> &[usize] {
        &self.unmeasured
    }

    pub fn k(&self) -> usize {
        self.measured.len()
    }

    pub fn n(&self) -> usize {
        self.measured.len() + self.unmeasured.len()
    }
}

/// The first `k` entries of a uniformly random permutation of `0..n`.
pub fn select_subset(n: usize, k: usize, rng: &mut impl Rng) -> Result<SubsetPlan> {
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let measured = perm[..k].to_vec();
    let mut unmeasured = perm[k..].to_vec();
    unmeasured.sort_unstable();
    Ok(SubsetPlan {
        measured,
        unmeasured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sic_completeness_and_trace() {
        let sic = qubit_sic();
        let mut total = CMatrix::zeros(2, 2);
        for e in sic.effects() {
            assert_abs_diff_eq!(e.trace().re, 0.5, epsilon = 1e-14);
            total += e;
        }
        assert!((&total - &CMatrix::identity(2)).max_abs() < 1e-12);
        Povm::new(sic.effects().to_vec()).unwrap();
    }

    #[test]
    fn sic_pairwise_traces() {
        let sic = qubit_sic();
        for j in 0..4 {
            for k in 0..4 {
                let want = if j == k { 0.25 } else { 1.0 / 12.0 };
                let got = sic.effect(j).trace_product_re(sic.effect(k));
                assert_abs_diff_eq!(got, want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn tensor_counts() {
        assert_eq!(sic_product(3).unwrap().len(), 64);
        assert_eq!(sic_product(3).unwrap().dim(), 8);
        assert_eq!(sic_product(4).unwrap().len(), 256);
    }

    #[test]
    fn tensor_completeness() {
        for n in 1..=3 {
            let p = sic_product(n).unwrap();
            Povm::new(p.effects().to_vec()).unwrap();
        }
    }

    #[test]
    fn tensor_index_order() {
        let sic = qubit_sic();
        let p = tensor_povm(&sic, 2).unwrap();
        // index 1 = (qubit 1: effect 0, qubit 2: effect 1)
        assert_eq!(p.effect(1), &kron(sic.effect(0), sic.effect(1)));
        assert_eq!(p.effect(4), &kron(sic.effect(1), sic.effect(0)));
    }

    #[test]
    fn full_plan_has_no_unmeasured() {
        let plan = select_subset(16, 16, &mut RngSeed(3).rng()).unwrap();
        assert!(plan.unmeasured().is_empty());
        assert_eq!(plan.k(), 16);
    }

    #[test]
    fn plans_are_deterministic_and_disjoint() {
        let a = select_subset(64, 20, &mut RngSeed(11).rng()).unwrap();
        let b = select_subset(64, 20, &mut RngSeed(11).rng()).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.measured().iter().chain(a.unmeasured()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_k() {
        let mut rng = RngSeed(0).rng();
        assert!(matches!(select_subset(4, 0, &mut rng), Err(Error::InvalidK { .. })));
        assert!(matches!(select_subset(4, 5, &mut rng), Err(Error::InvalidK { .. })));
        assert!(SubsetPlan::new(vec![1, 1], 4).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = sic_product(2).unwrap();
        let back = Povm::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(p.to_json().starts_with(r#"{"dim":4,"effects":[[["#));
    }

    #[test]
    fn computational_basis_is_povm() {
        let p = computational_basis(8);
        assert_eq!(p.len(), 8);
        Povm::new(p.effects().to_vec()).unwrap();
    }
}
