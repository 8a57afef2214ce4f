//! Variational tomography programs.
//!
//! Scalar layout of every compiled problem: `Delta_0 .. Delta_{K-1}` for the
//! measured effects, then `delta` (the infinity-norm bound on unmeasured
//! probabilities) when the program has one.

use log::warn;

use crate::cxmat::CMatrix;
use crate::error::{Error, Result};
use crate::povm::{Povm, SubsetPlan};
use crate::sdp::{solve, SdpOptions, SdpProblem, SdpSolution, SdpStatus};
use crate::states::DensityMatrix;

use super::{constraint_residual, Method, PvqtParams, Reconstruction, SolveStatus, SolverDiagnostics};

/// Frequencies below this are replaced by it in the relative tolerance
/// `Delta_i f_i`, which would otherwise vanish and pin `tr(E_i rho) = 0`.
pub const ZERO_FREQUENCY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CompiledTomography {
    pub problem: SdpProblem,
    pub method: Method,
    pub n_measured: usize,
    /// Scalar index of `delta`, if present.
    pub delta_inf_index: Option<usize>,
    /// Measured positions whose frequency was raised to the floor.
    pub floored: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TomographySolution {
    pub rho: DensityMatrix,
    pub deltas: Vec<f64>,
    pub delta_inf: Option<f64>,
    pub sdp: SdpSolution,
}

fn check_inputs(measured: &[CMatrix], unmeasured: &[CMatrix], f: &[f64]) -> Result<usize> {
    if measured.is_empty() {
        return Err(Error::EmptyMeasuredSet);
    }
    if f.len() != measured.len() {
        return Err(Error::DimMismatch {
            expected: measured.len(),
            actual: f.len(),
        });
    }
    let d = measured[0].rows();
    for e in measured.iter().chain(unmeasured) {
        if e.shape() != (d, d) {
            return Err(Error::ShapeMismatch {
                left: (d, d),
                right: e.shape(),
            });
        }
    }
    Ok(d)
}

/// Shared part: `tr rho = 1`, the two-sided tolerance rows and unit cost on
/// every `Delta_i`.
fn base_problem(d: usize, measured: &[CMatrix], f: &[f64], n_scalars: usize) -> (SdpProblem, Vec<usize>) {
    let mut p = SdpProblem::new(d, n_scalars);
    p.add_eq(Some(CMatrix::identity(d)), vec![], 1.0);
    let mut floored = Vec::new();
    for (i, (e, &fi)) in measured.iter().zip(f).enumerate() {
        let width = if fi < ZERO_FREQUENCY_FLOOR {
            floored.push(i);
            ZERO_FREQUENCY_FLOOR
        } else {
            fi
        };
        p.set_scalar_cost(i, 1.0);
        p.add_ineq(Some(e.clone()), vec![(i, -width)], fi);
        p.add_ineq(Some(-e), vec![(i, -width)], -fi);
    }
    if !floored.is_empty() {
        warn!(
            "{} measured frequencies below {ZERO_FREQUENCY_FLOOR:e}; tolerance width floored",
            floored.len()
        );
    }
    (p, floored)
}

fn sum_of(effects: &[CMatrix], d: usize) -> CMatrix {
    effects.iter().fold(CMatrix::zeros(d, d), |acc, e| &acc + e)
}

/// `min sum Delta + alpha tr(U rho) + beta delta` with `U` the sum of
/// unmeasured effects and `tr(E_j rho) <= delta` for each unmeasured `j`.
/// Terms with a zero weight are left out, as is `delta` when nothing is
/// unmeasured.
pub fn compile_pvqt(
    measured: &[CMatrix],
    unmeasured: &[CMatrix],
    f: &[f64],
    params: PvqtParams,
) -> Result<CompiledTomography> {
    let params = PvqtParams::new(params.alpha, params.beta)?;
    let d = check_inputs(measured, unmeasured, f)?;
    let k = measured.len();
    let with_delta = params.beta > 0.0 && !unmeasured.is_empty();
    let n_scalars = k + usize::from(with_delta);
    let (mut p, floored) = base_problem(d, measured, f, n_scalars);
    if params.alpha > 0.0 && !unmeasured.is_empty() {
        p.cost_matrix = Some(sum_of(unmeasured, d).scale(params.alpha));
    }
    if with_delta {
        p.set_scalar_cost(k, params.beta);
        for e in unmeasured {
            p.add_ineq(Some(e.clone()), vec![(k, -1.0)], 0.0);
        }
    }
    Ok(CompiledTomography {
        problem: p,
        method: Method::Pvqt(params),
        n_measured: k,
        delta_inf_index: with_delta.then_some(k),
        floored,
    })
}

/// Pure VQT: `min sum Delta + sum_unmeasured tr(E_j rho)`.
pub fn compile_vqt(measured: &[CMatrix], unmeasured: &[CMatrix], f: &[f64]) -> Result<CompiledTomography> {
    let d = check_inputs(measured, unmeasured, f)?;
    let (mut p, floored) = base_problem(d, measured, f, measured.len());
    if !unmeasured.is_empty() {
        p.cost_matrix = Some(sum_of(unmeasured, d));
    }
    Ok(CompiledTomography {
        problem: p,
        method: Method::Pvqt(PvqtParams::VQT),
        n_measured: measured.len(),
        delta_inf_index: None,
        floored,
    })
}

/// VQT-infinity: `min sum Delta + delta` with `tr(E_j rho) <= delta`.
pub fn compile_vqt_inf(
    measured: &[CMatrix],
    unmeasured: &[CMatrix],
    f: &[f64],
) -> Result<CompiledTomography> {
    let d = check_inputs(measured, unmeasured, f)?;
    let k = measured.len();
    if unmeasured.is_empty() {
        let (p, floored) = base_problem(d, measured, f, k);
        return Ok(CompiledTomography {
            problem: p,
            method: Method::Pvqt(PvqtParams::VQT_INF),
            n_measured: k,
            delta_inf_index: None,
            floored,
        });
    }
    let (mut p, floored) = base_problem(d, measured, f, k + 1);
    p.set_scalar_cost(k, 1.0);
    for e in unmeasured {
        p.add_ineq(Some(e.clone()), vec![(k, -1.0)], 0.0);
    }
    Ok(CompiledTomography {
        problem: p,
        method: Method::Pvqt(PvqtParams::VQT_INF),
        n_measured: k,
        delta_inf_index: Some(k),
        floored,
    })
}

/// Solves a compiled program and extracts `(rho, Delta, delta)`. The matrix
/// block is symmetrized, clipped to PSD and renormalized to unit trace.
pub fn solve_tomography_sdp(compiled: &CompiledTomography, opts: &SdpOptions) -> Result<TomographySolution> {
    let sol = solve(&compiled.problem, opts)?;
    let rho = DensityMatrix::from_approx(&sol.x)?;
    let deltas = sol.s[..compiled.n_measured].to_vec();
    let delta_inf = compiled.delta_inf_index.map(|i| sol.s[i]);
    Ok(TomographySolution {
        rho,
        deltas,
        delta_inf,
        sdp: sol,
    })
}

fn wrap(compiled: &CompiledTomography, sol: TomographySolution, measured: &[CMatrix], f: &[f64]) -> Reconstruction {
    let residual = constraint_residual(&sol.rho, measured, f);
    Reconstruction {
        diagnostics: SolverDiagnostics {
            status: SolveStatus::from(sol.sdp.status),
            iterations: sol.sdp.iterations,
            constraint_residual: residual,
            solver_residual: sol.sdp.residuals.max(),
        },
        rho: sol.rho,
        method: compiled.method,
        deltas: sol.deltas,
        delta_inf: sol.delta_inf,
    }
}

/// PVQT(alpha, beta) reconstruction from the measured part of `plan`.
pub fn pvqt_estimate(
    povm: &Povm,
    plan: &SubsetPlan,
    f: &[f64],
    params: PvqtParams,
    opts: &SdpOptions,
) -> Result<Reconstruction> {
    if plan.n() != povm.len() {
        return Err(Error::DimMismatch {
            expected: povm.len(),
            actual: plan.n(),
        });
    }
    let measured = povm.select(plan.measured());
    let unmeasured = povm.select(plan.unmeasured());
    let compiled = compile_pvqt(&measured, &unmeasured, f, params)?;
    let sol = solve_tomography_sdp(&compiled, opts)?;
    if sol.sdp.status != SdpStatus::Optimal {
        warn!("{} finished with status {}", compiled.method, sol.sdp.status.as_str());
    }
    Ok(wrap(&compiled, sol, &measured, f))
}

/// Solves an already compiled program, e.g. one from [`compile_vqt`].
pub fn estimate_compiled(
    compiled: &CompiledTomography,
    measured: &[CMatrix],
    f: &[f64],
    opts: &SdpOptions,
) -> Result<Reconstruction> {
    let sol = solve_tomography_sdp(compiled, opts)?;
    Ok(wrap(compiled, sol, measured, f))
}
