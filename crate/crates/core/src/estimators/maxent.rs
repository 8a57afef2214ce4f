//! Maximum-entropy reconstruction.
//!
//! The MaxEnt state for data `f_i = tr(E_i rho)` has the exponential-family
//! form `rho = exp(-H) / N` with `H = sum_i l_i E_i` and `N = tr exp(-H)`.
//! The multipliers solve `tr(E_i exp(-H)) = N f_i`. Derivatives of `exp(-H)`
//! are taken in the eigenbasis of `H` with the divided-difference (Daleckii-
//! Krein) rule: `d exp(-H)[E] = V (Gamma o V^H E V) V^H`, where
//! `Gamma_ab = (g_a - g_b) / (h_a - h_b)` and `g = exp(-h)`.
//!
//! The fit minimizes the normalized residual `tr(E_i rho) - f_i`, which has
//! the same zeros as `tr(E_i exp(-H)) - N f_i` but cannot be driven to zero
//! by shrinking `exp(-H)` as a whole.

use crate::cxmat::{herm_eig, CMatrix, HermEig, RMatrix, C64};
use crate::error::{Error, Result};
use crate::states::DensityMatrix;

use super::{constraint_residual, Method, Reconstruction, SolveStatus, SolverDiagnostics};

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeVector {
    pub lambdas: Vec<f64>,
    /// `tr exp(-sum l_i E_i)`.
    pub normalization: f64,
}

impl LagrangeVector {
    pub fn new(lambdas: Vec<f64>, effects: &[CMatrix]) -> Result<Self> {
        check_lengths(&lambdas, effects)?;
        let h = generator(&lambdas, effects)?;
        let normalization = herm_eig(&h)?.eigenvalues.iter().map(|&w| (-w).exp()).sum();
        Ok(LagrangeVector {
            lambdas,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MaxEntOptions {
    /// Success threshold on `max_i |tr(E_i rho) - f_i|`.
    pub tol: f64,
    /// Stop once the normalized residual norm falls below this.
    pub residual_stop: f64,
    /// Stop once an accepted step is this small relative to `|l|`.
    pub step_stop: f64,
    /// Stop once an accepted step lowers the cost by less than this
    /// fraction; with inconsistent data the fit has then settled on a
    /// least-squares point even if the multipliers keep drifting.
    pub cost_stop: f64,
    pub max_iter: usize,
    pub damping_init: f64,
    pub lambda_cap: f64,
}

impl Default for MaxEntOptions {
    fn default() -> Self {
        MaxEntOptions {
            tol: 1e-8,
            residual_stop: 1e-10,
            step_stop: 1e-12,
            cost_stop: 1.5e-8,
            max_iter: 500,
            damping_init: 1e-3,
            lambda_cap: 1e3,
        }
    }
}

fn check_lengths(lambdas: &[f64], effects: &[CMatrix]) -> Result<()> {
    if lambdas.len() != effects.len() {
        return Err(Error::DimMismatch {
            expected: effects.len(),
            actual: lambdas.len(),
        });
    }
    Ok(())
}

fn generator(lambdas: &[f64], effects: &[CMatrix]) -> Result<CMatrix> {
    let d = effects.first().map(CMatrix::rows).ok_or(Error::EmptyMeasuredSet)?;
    let mut h = CMatrix::zeros(d, d);
    for (l, e) in lambdas.iter().zip(effects) {
        if e.shape() != (d, d) {
            return Err(Error::ShapeMismatch {
                left: (d, d),
                right: e.shape(),
            });
        }
        h.axpy(*l, e);
    }
    Ok(h)
}

/// `exp(-H)` and its directional derivatives, evaluated once per multiplier
/// vector. Weights are shifted by `exp(h_min)` for range safety; `shift`
/// records the factor so unshifted quantities can be recovered.
struct Expansion {
    eig: HermEig,
    /// `exp(-(h - h_min))`.
    weights: Vec<f64>,
    shift: f64,
    /// `V^H E_j V`.
    rotated: Vec<CMatrix>,
}

impl Expansion {
    fn new(lambdas: &[f64], effects: &[CMatrix]) -> Result<Self> {
        let h = generator(lambdas, effects)?;
        let eig = herm_eig(&h)?;
        let hmin = eig.eigenvalues[0];
        let weights = eig.eigenvalues.iter().map(|&w| (-(w - hmin)).exp()).collect();
        let v = &eig.vectors;
        let vh = v.adjoint();
        let rotated = effects.iter().map(|e| &(&vh * e) * v).collect();
        Ok(Expansion {
            eig,
            weights,
            shift: hmin,
            rotated,
        })
    }

    /// `sum g_a`: the shifted normalization.
    fn norm_shifted(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `tr(E_i exp(-(H - h_min)))`.
    fn effect_mass(&self, i: usize) -> f64 {
        let e = &self.rotated[i];
        self.weights.iter().enumerate().map(|(a, g)| g * e[(a, a)].re).sum()
    }

    /// Divided differences of `exp(-x)` at the (shifted) spectrum.
    fn gamma(&self) -> RMatrix {
        let h = &self.eig.eigenvalues;
        let n = h.len();
        RMatrix::from_fn(n, n, |a, b| {
            let (ga, gb) = (self.weights[a], self.weights[b]);
            let (hi, lo, g_lo) = if h[a] >= h[b] { (h[a], h[b], ga.max(gb)) } else { (h[b], h[a], ga.max(gb)) };
            let gap = hi - lo;
            if gap < 1e-12 {
                -0.5 * (ga + gb)
            } else {
                // -(g_lo) (1 - exp(-gap)) / gap, with g_lo the larger weight
                -g_lo * (-(-gap).exp_m1()) / gap
            }
        })
    }

    /// `K_ij = tr(E_i d exp(-(H - h_min))[E_j])`.
    fn derivative_traces(&self) -> RMatrix {
        let k = self.rotated.len();
        let gamma = self.gamma();
        let n = gamma.rows();
        let weighted: Vec<CMatrix> = self
            .rotated
            .iter()
            .map(|e| CMatrix::from_fn(n, n, |a, b| e[(a, b)] * gamma[(a, b)]))
            .collect();
        let mut out = RMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v: f64 = self.rotated[i]
                    .as_slice()
                    .iter()
                    .zip(weighted[j].as_slice())
                    .map(|(x, y): (&C64, &C64)| x.re * y.re + x.im * y.im)
                    .sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    fn state(&self) -> CMatrix {
        let z = self.norm_shifted();
        self.eig.map_values(&self.weights, 1.0 / z)
    }
}

impl HermEig {
    fn map_values(&self, values: &[f64], scale: f64) -> CMatrix {
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        self.compose(&scaled)
    }
}

/// `tr(E_i exp(-sum l E)) - N f_i` for each measured effect.
pub fn maxent_residual(lam: &LagrangeVector, effects: &[CMatrix], f: &[f64]) -> Result<Vec<f64>> {
    check_lengths(&lam.lambdas, effects)?;
    check_lengths(f, effects)?;
    let ex = Expansion::new(&lam.lambdas, effects)?;
    let unshift = (-ex.shift).exp();
    let n = ex.norm_shifted() * unshift;
    Ok((0..effects.len())
        .map(|i| ex.effect_mass(i) * unshift - n * f[i])
        .collect())
}

/// Jacobian of [`maxent_residual`] with respect to the multipliers:
/// `J_ij = tr(E_i dexp[E_j]) + f_i tr(E_j exp(-H))`.
pub fn maxent_jacobian(lam: &LagrangeVector, effects: &[CMatrix], f: &[f64]) -> Result<RMatrix> {
    check_lengths(&lam.lambdas, effects)?;
    check_lengths(f, effects)?;
    let ex = Expansion::new(&lam.lambdas, effects)?;
    let unshift = (-ex.shift).exp();
    let kt = ex.derivative_traces();
    let mass: Vec<f64> = (0..effects.len()).map(|j| ex.effect_mass(j)).collect();
    let k = effects.len();
    Ok(RMatrix::from_fn(k, k, |i, j| (kt[(i, j)] + f[i] * mass[j]) * unshift))
}

/// Normalized MaxEnt fitting problem `r_i(l) = tr(E_i rho(l)) - f_i`.
pub struct MaxEntModel<'a> {
    effects: &'a [CMatrix],
    f: &'a [f64],
}

struct Evaluated {
    ex: Expansion,
    residual: Vec<f64>,
    cost: f64,
}

impl<'a> MaxEntModel<'a> {
    pub fn new(effects: &'a [CMatrix], f: &'a [f64]) -> Result<Self> {
        check_lengths(f, effects)?;
        Ok(MaxEntModel { effects, f })
    }

    fn evaluate(&self, lambdas: &[f64]) -> Result<Evaluated> {
        let ex = Expansion::new(lambdas, self.effects)?;
        let z = ex.norm_shifted();
        let residual: Vec<f64> = (0..self.effects.len())
            .map(|i| ex.effect_mass(i) / z - self.f[i])
            .collect();
        let cost = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
        Ok(Evaluated { ex, residual, cost })
    }

    /// Normalized residual.
    pub fn residual(&self, lambdas: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(lambdas)?.residual)
    }

    /// Jacobian of the normalized residual:
    /// `(K_ij + p_i tr(E_j exp(-H))) / N` with `p_i = tr(E_i rho)`.
    pub fn jacobian(&self, lambdas: &[f64]) -> Result<RMatrix> {
        let ev = self.evaluate(lambdas)?;
        Ok(self.jacobian_of(&ev))
    }

    fn jacobian_of(&self, ev: &Evaluated) -> RMatrix {
        let z = ev.ex.norm_shifted();
        let kt = ev.ex.derivative_traces();
        let k = self.effects.len();
        let mass: Vec<f64> = (0..k).map(|j| ev.ex.effect_mass(j)).collect();
        RMatrix::from_fn(k, k, |i, j| (kt[(i, j)] + mass[i] / z * mass[j]) / z)
    }
}

/// MaxEnt state for measured `effects` with frequencies `f` on a
/// `dim`-dimensional system. With no effects this is `I / dim`.
pub fn maxent_estimate(
    dim: usize,
    effects: &[CMatrix],
    f: &[f64],
    opts: &MaxEntOptions,
) -> Result<Reconstruction> {
    check_lengths(f, effects)?;
    if let Some(e) = effects.iter().find(|e| e.shape() != (dim, dim)) {
        return Err(Error::DimMismatch {
            expected: dim,
            actual: e.rows(),
        });
    }
    if effects.is_empty() {
        return Ok(Reconstruction {
            rho: DensityMatrix::maximally_mixed(dim),
            method: Method::MaxEnt,
            deltas: vec![],
            delta_inf: None,
            diagnostics: SolverDiagnostics {
                status: SolveStatus::Optimal,
                iterations: 0,
                constraint_residual: 0.0,
                solver_residual: 0.0,
            },
        });
    }

    let model = MaxEntModel::new(effects, f)?;
    let k = effects.len();
    let mut lambdas = vec![0.0; k];
    let mut ev = model.evaluate(&lambdas)?;
    let mut damping = opts.damping_init;
    let mut status = SolveStatus::NoConvergence;
    let mut iterations = 0;
    let mut cap_blocked = false;

    'outer: while iterations < opts.max_iter {
        if norm(&ev.residual) < opts.residual_stop {
            status = SolveStatus::Optimal;
            break;
        }
        let jac = model.jacobian_of(&ev);
        let jtj = jac.gram();
        let grad = jac.apply_transpose(&ev.residual);
        let scale = (0..k).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        loop {
            iterations += 1;
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += damping * scale;
            }
            let step = match a.cholesky() {
                Ok(ch) => ch.solve(&grad.iter().map(|g| -g).collect::<Vec<_>>()),
                Err(_) => {
                    damping *= 10.0;
                    if damping > 1e16 {
                        status = SolveStatus::Optimal;
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = lambdas.iter().zip(&step).map(|(l, s)| l + s).collect();
            if trial.iter().any(|t| t.abs() > opts.lambda_cap) {
                cap_blocked = true;
                damping *= 10.0;
                if damping > 1e16 {
                    break 'outer;
                }
                continue;
            }
            let cand = model.evaluate(&trial)?;
            if cand.cost < ev.cost {
                let moved = norm(
                    &trial.iter().zip(&lambdas).map(|(a, b)| a - b).collect::<Vec<_>>(),
                );
                let size = norm(&lambdas);
                let stalled = ev.cost - cand.cost <= opts.cost_stop * ev.cost;
                lambdas = trial;
                ev = cand;
                cap_blocked = false;
                damping = (damping / 10.0).max(1e-15);
                if moved <= opts.step_stop * size.max(1.0) || stalled {
                    status = SolveStatus::Optimal;
                    break 'outer;
                }
                break;
            }
            damping *= 10.0;
            if damping > 1e16 {
                // no descent direction left: least-squares stationary point
                status = SolveStatus::Optimal;
                break 'outer;
            }
            if iterations >= opts.max_iter {
                break 'outer;
            }
        }
    }
    if norm(&ev.residual) < opts.residual_stop {
        status = SolveStatus::Optimal;
    }
    let converged = norm(&ev.residual) < opts.tol;
    let at_cap = lambdas.iter().any(|l| l.abs() >= 0.999 * opts.lambda_cap);
    if (cap_blocked || at_cap) && !converged {
        status = SolveStatus::LambdaCap;
    }

    let rho = DensityMatrix::from_approx(&ev.ex.state())?;
    let residual = constraint_residual(&rho, effects, f);
    Ok(Reconstruction {
        rho,
        method: Method::MaxEnt,
        deltas: vec![],
        delta_inf: None,
        diagnostics: SolverDiagnostics {
            status,
            iterations,
            constraint_residual: residual,
            solver_residual: norm(&ev.residual),
        },
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Used only by tests: `exp(-sum l E)` through the generic matrix function.
#[cfg(test)]
pub(crate) fn exp_generator(lambdas: &[f64], effects: &[CMatrix]) -> CMatrix {
    crate::cxmat::func_hermitian(&generator(lambdas, effects).unwrap(), |w| (-w).exp()).unwrap()
}
