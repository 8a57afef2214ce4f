//! Density matrices, random state sampling and state-comparison metrics.
//!
//! Fidelity follows the squared (Jozsa) convention
//! `F(rho, sigma) = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cxmat::{herm_eig, CMatrix, HermEig, C64};
use crate::error::{Error, Result};

/// Tolerance for the Hermitian, unit-trace and PSD checks on a state.
pub const STATE_TOL: f64 = 1e-9;

pub const MAX_QUBITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates the Hermitian, unit trace and PSD invariants (each within
    /// [`STATE_TOL`]) and stores the Hermitian part.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.rows(),
                cols: mat.cols(),
            });
        }
        let dev = mat.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::InvalidState(format!("Hermitian deviation {dev:.3e}")));
        }
        let mat = mat.hermitian_part();
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = herm_eig(&mat)?.eigenvalues[0];
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix { mat })
    }

    /// Projects a nearly valid matrix (e.g. a solver iterate) onto the state
    /// space: Hermitian part, eigenvalues clipped at zero, trace renormalized.
    pub fn from_approx(mat: &CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.rows(),
                cols: mat.cols(),
            });
        }
        let eig = herm_eig(&mat.hermitian_part())?;
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&w| w.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidState("no positive spectrum".into()));
        }
        let scaled: Vec<f64> = clipped.iter().map(|w| w / total).collect();
        Ok(DensityMatrix {
            mat: eig.compose(&scaled),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            mat: CMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Ok(DensityMatrix {
            mat: CMatrix::outer(psi).scale(1.0 / norm2),
        })
    }

    /// Diagonal state; `probs` must be a probability vector.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diag(probs))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        herm_eig(&self.mat).expect("state is Hermitian").eigenvalues
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_product_re(&self.mat)
    }

    /// `tr(E rho)` for a Hermitian `effect`.
    pub fn expectation(&self, effect: &CMatrix) -> f64 {
        effect.trace_product_re(&self.mat)
    }
}

fn complex_normal(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state on `n_qubits` qubits: a normalized vector of
/// independent complex standard normals.
pub fn haar_pure(n_qubits: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::InvalidQubits(n_qubits));
    }
    let d = 1usize << n_qubits;
    let psi: Vec<C64> = (0..d).map(|_| complex_normal(rng)).collect();
    DensityMatrix::pure(&psi)
}

/// Rank-`rank` state `G G^H / tr(G G^H)` from a `dim x rank` Ginibre matrix.
pub fn random_rank_r(dim: usize, rank: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::InvalidRank { rank, dim });
    }
    let g = CMatrix::from_fn(dim, rank, |_, _| complex_normal(rng));
    let ggh = &g * &g.adjoint();
    let tr = ggh.trace().re;
    Ok(DensityMatrix {
        mat: ggh.scale(1.0 / tr).hermitian_part(),
    })
}

fn check_dims(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimMismatch {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    Ok(())
}

/// Eigenvalues below this multiple of `f64::EPSILON * dim * w_max` are
/// rounding noise and are treated as zero.
const RANK_FLOOR: f64 = 4.0;

fn numerical_support(eig: &HermEig) -> Vec<usize> {
    let d = eig.dim();
    let w_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = RANK_FLOOR * f64::EPSILON * d as f64 * w_max;
    (0..d).filter(|&k| eig.eigenvalues[k] > floor).collect()
}

/// Squared fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clipped into
/// `[0, 1]`.
///
/// Evaluated as `sum sqrt(eig(B^H sigma B))` with `B = V_r sqrt(W_r)` over
/// the numerical support of whichever argument has the smaller rank, so
/// eigenvalues that are pure rounding noise never pass through a square root.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let (ea, eb) = (herm_eig(&rho.mat)?, herm_eig(&sigma.mat)?);
    let (sa, sb) = (numerical_support(&ea), numerical_support(&eb));
    let (eig, support, other) = if sb.len() < sa.len() {
        (eb, sb, &rho.mat)
    } else {
        (ea, sa, &sigma.mat)
    };
    let d = eig.dim();
    let r = support.len();
    let b = CMatrix::from_fn(d, r, |i, c| {
        let k = support[c];
        eig.vectors[(i, k)] * eig.eigenvalues[k].sqrt()
    });
    let inner = (&(&b.adjoint() * other) * &b).hermitian_part();
    let ie = herm_eig(&inner)?;
    let w_max = ie.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = RANK_FLOOR * f64::EPSILON * r as f64 * w_max;
    let root_sum: f64 = ie.eigenvalues.iter().filter(|&&w| w > floor).map(|&w| w.sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// `1/2 sum |eig(rho - sigma)|`, clipped into `[0, 1]`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let diff = &rho.mat - &sigma.mat;
    let t: f64 = herm_eig(&diff)?.eigenvalues.iter().map(|w| w.abs()).sum();
    Ok((0.5 * t).clamp(0.0, 1.0))
}

/// Von Neumann entropy in nats; `0 ln 0 = 0`.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum()
}
