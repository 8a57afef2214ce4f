//! Dense linear semidefinite programs over one Hermitian PSD block plus
//! nonnegative scalars:
//!
//! ```text
//! minimize    tr(C X) + c . s
//! subject to  tr(A_j X) + a_j . s  = b_j
//!             tr(G_k X) + g_k . s <= h_k
//!             X >= 0 (Hermitian PSD),  s >= 0
//! ```
//!
//! Inequalities receive their own slack scalars, giving the standard form
//! `A(X) + a s = b`. The solver is an infeasible-start primal-dual
//! path-following method with Nesterov-Todd scaling on the matrix block and
//! Mehrotra's predictor-corrector. Each Newton system is reduced to the
//! Schur complement `M_ij = tr(A_i W A_j W) + sum_k a_ik (s_k / z_k) a_jk`
//! and factored by Cholesky.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::cxmat::{herm_eig, CMatrix, RMatrix, C64};
use crate::error::{Error, Result};

/// One linear row: `tr(matrix X) + sum coef * s[index]` compared with `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// `None` means the zero matrix.
    pub matrix: Option<CMatrix>,
    pub scalars: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(matrix: Option<CMatrix>, scalars: Vec<(usize, f64)>, rhs: f64) -> Self {
        Constraint {
            matrix,
            scalars,
            rhs,
        }
    }

    pub fn eval(&self, x: &CMatrix, s: &[f64]) -> f64 {
        let mut v = self.matrix.as_ref().map_or(0.0, |m| m.trace_product_re(x));
        for &(k, coef) in &self.scalars {
            v += coef * s[k];
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    /// Order of the Hermitian block; 0 for a purely scalar program.
    pub dim: usize,
    pub n_scalars: usize,
    pub cost_matrix: Option<CMatrix>,
    pub cost_scalars: Vec<f64>,
    pub equalities: Vec<Constraint>,
    pub inequalities: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(dim: usize, n_scalars: usize) -> Self {
        SdpProblem {
            dim,
            n_scalars,
            cost_matrix: None,
            cost_scalars: vec![0.0; n_scalars],
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn with_cost_matrix(mut self, c: CMatrix) -> Self {
        self.cost_matrix = Some(c);
        self
    }

    pub fn set_scalar_cost(&mut self, k: usize, c: f64) {
        self.cost_scalars[k] = c;
    }

    pub fn add_eq(&mut self, matrix: Option<CMatrix>, scalars: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(Constraint::new(matrix, scalars, rhs));
    }

    pub fn add_ineq(&mut self, matrix: Option<CMatrix>, scalars: Vec<(usize, f64)>, rhs: f64) {
        self.inequalities.push(Constraint::new(matrix, scalars, rhs));
    }

    pub fn n_constraints(&self) -> usize {
        self.equalities.len() + self.inequalities.len()
    }

    pub fn objective_at(&self, x: &CMatrix, s: &[f64]) -> f64 {
        let mat = self.cost_matrix.as_ref().map_or(0.0, |c| c.trace_product_re(x));
        mat + self.cost_scalars.iter().zip(s).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Debug dump for cross-checking against other solvers.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: SdpProblem = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if self.cost_scalars.len() != self.n_scalars {
            return Err(Error::DimMismatch {
                expected: self.n_scalars,
                actual: self.cost_scalars.len(),
            });
        }
        let check_mat = |m: &CMatrix| -> Result<()> {
            if m.shape() != (d, d) {
                return Err(Error::ShapeMismatch {
                    left: (d, d),
                    right: m.shape(),
                });
            }
            let deviation = m.hermitian_deviation();
            if deviation > 1e-10 {
                return Err(Error::NonHermitian {
                    deviation,
                    tolerance: 1e-10,
                });
            }
            Ok(())
        };
        if let Some(c) = &self.cost_matrix {
            check_mat(c)?;
        }
        for row in self.equalities.iter().chain(&self.inequalities) {
            if let Some(m) = &row.matrix {
                check_mat(m)?;
            }
            for &(k, _) in &row.scalars {
                if k >= self.n_scalars {
                    return Err(Error::DimMismatch {
                        expected: self.n_scalars,
                        actual: k + 1,
                    });
                }
            }
        }
        if self.n_constraints() == 0 {
            return Err(Error::Config("SDP has no constraints".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalTrouble,
}

impl SdpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::MaxIter => "max_iter",
            SdpStatus::NumericalTrouble => "numerical_trouble",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub mu: f64,
    pub residuals: Residuals,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// Stop when primal, dual and relative gap residuals are all below this.
    pub tol: f64,
    pub max_iter: usize,
    pub mehrotra: bool,
    /// Initial diagonal regularization of the Schur complement.
    pub regularization: f64,
    pub record_trace: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol: 1e-8,
            max_iter: 200,
            mehrotra: true,
            regularization: 1e-12,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: CMatrix,
    /// The problem's own scalars (inequality slacks are not included).
    pub s: Vec<f64>,
    /// Multipliers: equalities first, then inequalities (`<= 0` at optimum).
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub status: SdpStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    pub trace: Vec<IterationLog>,
}

/// The real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn real_embed(h: &CMatrix) -> Result<RMatrix> {
    if !h.is_square() {
        return Err(Error::NotSquare {
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    let deviation = h.hermitian_deviation();
    if deviation > 1e-10 {
        return Err(Error::NonHermitian {
            deviation,
            tolerance: 1e-10,
        });
    }
    let n = h.rows();
    Ok(RMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    }))
}

/// Inverse of [`real_embed`]: reads the complex block back out.
pub fn complex_block(r: &RMatrix) -> CMatrix {
    let n = r.rows() / 2;
    CMatrix::from_fn(n, n, |i, j| C64::new(r[(i, j)], r[(i + n, j)]))
}

/// Standard form with inequality slacks appended to the scalar vector.
struct StandardForm {
    d: usize,
    m: usize,
    mats: Vec<Option<CMatrix>>,
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c_mat: CMatrix,
    c: Vec<f64>,
    /// Rows rewritten by [`pair_ranged_rows`].
    pairs: Vec<(usize, usize)>,
}

/// Two-sided bounds `tr(A X) + .. <= u`, `-tr(A X) + .. <= -l` make the
/// Schur complement nearly singular once both slacks vanish: the two rows
/// differ only in their tiny scalar parts. Each such pair is replaced by its
/// orthogonal difference and sum, `(r_j - r_k) / sqrt 2` and
/// `(r_j + r_k) / sqrt 2`; the sum row has no matrix part, so its small
/// diagonal entry is formed without cancellation. Residual norms and `b . y`
/// are unchanged.
fn pair_ranged_rows(
    first_ineq: usize,
    mats: &mut [Option<CMatrix>],
    rows: &mut [Vec<(usize, f64)>],
    b: &mut [f64],
) -> Vec<(usize, usize)> {
    let n = mats.len();
    let mut used = vec![false; n];
    let mut pairs = Vec::new();
    for j in first_ineq..n {
        if used[j] {
            continue;
        }
        let Some(aj) = mats[j].clone() else { continue };
        let partner = (j + 1..n).find(|&k| {
            !used[k]
                && mats[k].as_ref().is_some_and(|ak| {
                    ak.as_slice().iter().zip(aj.as_slice()).all(|(x, y)| *x == -*y)
                })
        });
        let Some(k) = partner else { continue };
        used[j] = true;
        used[k] = true;
        let combine = |sign: f64| {
            let mut out: Vec<(usize, f64)> = Vec::new();
            for &(idx, c) in rows[j].iter() {
                out.push((idx, c * FRAC_1_SQRT_2));
            }
            for &(idx, c) in rows[k].iter() {
                let c = sign * c * FRAC_1_SQRT_2;
                match out.iter_mut().find(|(i, _)| *i == idx) {
                    Some(e) => e.1 += c,
                    None => out.push((idx, c)),
                }
            }
            out.retain(|&(_, c)| c != 0.0);
            out
        };
        let diff = combine(-1.0);
        let sum = combine(1.0);
        let (bj, bk) = (b[j], b[k]);
        mats[j] = Some(aj.scale(2.0 * FRAC_1_SQRT_2));
        mats[k] = None;
        rows[j] = diff;
        rows[k] = sum;
        b[j] = (bj - bk) * FRAC_1_SQRT_2;
        b[k] = (bj + bk) * FRAC_1_SQRT_2;
        pairs.push((j, k));
    }
    pairs
}

impl StandardForm {
    fn from_problem(p: &SdpProblem) -> Self {
        let n_eq = p.equalities.len();
        let m = p.n_scalars + p.inequalities.len();
        let mut mats = Vec::new();
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for row in &p.equalities {
            mats.push(row.matrix.clone());
            rows.push(row.scalars.clone());
            b.push(row.rhs);
        }
        for (k, row) in p.inequalities.iter().enumerate() {
            mats.push(row.matrix.clone());
            let mut sc = row.scalars.clone();
            sc.push((p.n_scalars + k, 1.0));
            rows.push(sc);
            b.push(row.rhs);
        }
        debug_assert_eq!(mats.len(), n_eq + p.inequalities.len());
        let pairs = pair_ranged_rows(n_eq, &mut mats, &mut rows, &mut b);
        let mut c = p.cost_scalars.clone();
        c.resize(m, 0.0);
        StandardForm {
            d: p.dim,
            m,
            mats,
            rows,
            b,
            c_mat: p
                .cost_matrix
                .clone()
                .unwrap_or_else(|| CMatrix::zeros(p.dim, p.dim)),
            c,
            pairs,
        }
    }

    /// Multipliers of the rows as given in the problem.
    fn original_y(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for &(j, k) in &self.pairs {
            out[j] = (y[j] + y[k]) * FRAC_1_SQRT_2;
            out[k] = (y[k] - y[j]) * FRAC_1_SQRT_2;
        }
        out
    }

    fn p(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &CMatrix, s: &[f64]) -> Vec<f64> {
        self.mats
            .iter()
            .zip(&self.rows)
            .map(|(mat, row)| {
                let mut v = mat.as_ref().map_or(0.0, |a| a.trace_product_re(x));
                for &(k, coef) in row {
                    v += coef * s[k];
                }
                v
            })
            .collect()
    }

    fn adjoint_mat(&self, y: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.d, self.d);
        for (mat, &yj) in self.mats.iter().zip(y) {
            if let Some(a) = mat {
                out.axpy(yj, a);
            }
        }
        out
    }

    fn adjoint_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (row, &yj) in self.rows.iter().zip(y) {
            for &(k, coef) in row {
                out[k] += coef * yj;
            }
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `[Re H; Im H]` flattened, so that `flat(A) . flat(B) = tr(A B)` for
/// Hermitian `A`, `B`.
fn flatten(h: &CMatrix) -> Vec<f64> {
    let s = h.as_slice();
    let mut out = Vec::with_capacity(2 * s.len());
    out.extend(s.iter().map(|z| z.re));
    out.extend(s.iter().map(|z| z.im));
    out
}

/// Largest `alpha <= 1` keeping `diag(v) + alpha * dv` PSD.
fn max_step_psd(v: &[f64], dv: &CMatrix) -> Result<f64> {
    let n = v.len();
    if n == 0 {
        return Ok(1.0);
    }
    let scaled = CMatrix::from_fn(n, n, |i, j| dv[(i, j)] / (v[i] * v[j]).sqrt());
    let lmin = herm_eig(&scaled.hermitian_part())?.eigenvalues[0];
    Ok(if lmin < 0.0 { (-1.0 / lmin).min(1.0) } else { 1.0 })
}

fn max_step_vec(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(1.0, f64::min)
}

/// Scaled Newton direction.
struct Direction {
    dx: CMatrix,
    dz: CMatrix,
    ds: Vec<f64>,
    dzs: Vec<f64>,
    dy: Vec<f64>,
}

struct Scaling {
    /// `W = G G^H`, `G^H Z G = G^{-1} X G^{-H} = diag(v)`.
    g: CMatrix,
    v: Vec<f64>,
    /// Scaled constraint matrices `G^H A_j G`, flattened.
    flat: Vec<Option<Vec<f64>>>,
}

struct Iterate {
    x: CMatrix,
    s: Vec<f64>,
    y: Vec<f64>,
    z: CMatrix,
    zs: Vec<f64>,
}

/// A small program with a known optimum.
#[derive(Debug, Clone)]
pub struct ReferenceProgram {
    pub name: &'static str,
    pub problem: SdpProblem,
    pub optimum: f64,
    /// Optimal matrix block, when unique.
    pub x: Option<CMatrix>,
}

/// Three analytic programs: the smallest eigenvalue of `diag(1, 2)`, a
/// scalar-only bound and a diagonal program with two equality rows.
pub fn reference_programs() -> Vec<ReferenceProgram> {
    let mut eig = SdpProblem::new(2, 0).with_cost_matrix(CMatrix::from_diag(&[1.0, 2.0]));
    eig.add_eq(Some(CMatrix::identity(2)), vec![], 1.0);

    let mut scalar = SdpProblem::new(0, 1);
    scalar.set_scalar_cost(0, 1.0);
    scalar.add_ineq(None, vec![(0, -1.0)], -3.0);

    let mut diag = SdpProblem::new(2, 0).with_cost_matrix(CMatrix::identity(2));
    diag.add_eq(Some(CMatrix::from_diag(&[1.0, 0.0])), vec![], 1.0);
    diag.add_eq(Some(CMatrix::from_diag(&[0.0, 1.0])), vec![], 2.0);

    vec![
        ReferenceProgram {
            name: "smallest_eigenvalue",
            problem: eig,
            optimum: 1.0,
            x: Some(CMatrix::from_diag(&[1.0, 0.0])),
        },
        ReferenceProgram {
            name: "scalar_lower_bound",
            problem: scalar,
            optimum: 3.0,
            x: None,
        },
        ReferenceProgram {
            name: "diagonal_equalities",
            problem: diag,
            optimum: 3.0,
            x: Some(CMatrix::from_diag(&[1.0, 2.0])),
        },
    ]
}

/// Solves `p`. Only malformed input is an `Err`; solver outcomes are
/// reported through [`SdpSolution::status`].
pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    let sf = StandardForm::from_problem(p);
    let d = sf.d;
    let m = sf.m;
    let np = sf.p();
    let cone_dim = (d + m) as f64;

    let norm_b = norm(&sf.b);
    let norm_c = (sf.c_mat.frobenius_norm().powi(2) + dot(&sf.c, &sf.c)).sqrt();

    let mut it = Iterate {
        x: CMatrix::identity(d),
        s: vec![1.0; m],
        y: vec![0.0; np],
        z: CMatrix::identity(d),
        zs: vec![1.0; m],
    };

    let mut trace = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut residuals = Residuals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
        gap: f64::INFINITY,
    };
    let mut iterations = 0;
    let mut best_primal_res = f64::INFINITY;
    let mut stall = 0usize;
    let mut last_steps = (1.0, 1.0);

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let ax = sf.apply(&it.x, &it.s);
        let rp: Vec<f64> = sf.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rd_mat = &(&sf.c_mat - &sf.adjoint_mat(&it.y)) - &it.z;
        let aty = sf.adjoint_vec(&it.y);
        let rd: Vec<f64> = (0..m).map(|k| sf.c[k] - aty[k] - it.zs[k]).collect();

        let pobj = sf.c_mat.trace_product_re(&it.x) + dot(&sf.c, &it.s);
        let dobj = dot(&sf.b, &it.y);
        let compl = it.x.trace_product_re(&it.z) + dot(&it.s, &it.zs);
        let mu = compl / cone_dim;

        residuals = Residuals {
            primal: norm(&rp) / (1.0 + norm_b),
            dual: (rd_mat.frobenius_norm().powi(2) + dot(&rd, &rd)).sqrt() / (1.0 + norm_c),
            gap: (pobj - dobj).abs().max(compl) / (1.0 + pobj.abs()),
        };
        if opts.record_trace {
            trace.push(IterationLog {
                iteration: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                mu,
                residuals,
                step_primal: last_steps.0,
                step_dual: last_steps.1,
            });
        }
        if residuals.max() <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if !pobj.is_finite() || !dobj.is_finite() || !mu.is_finite() {
            status = SdpStatus::NumericalTrouble;
            break;
        }
        // Dual objective running away while primal feasibility stops
        // improving: no primal point exists.
        if residuals.primal < 0.5 * best_primal_res {
            best_primal_res = residuals.primal;
            stall = 0;
        } else {
            stall += 1;
        }
        if stall >= 20 && dobj > 1e8 * (1.0 + pobj.abs()) && residuals.primal > opts.tol {
            status = SdpStatus::Infeasible;
            break;
        }
        if iter == opts.max_iter {
            break;
        }

        let rd_in = DualResidual {
            mat: &rd_mat,
            vec: &rd,
        };
        let step = match newton_step(&sf, &it, &rp, rd_in, mu, opts) {
            Ok(step) => step,
            Err(_) => {
                status = SdpStatus::NumericalTrouble;
                break;
            }
        };
        let (alpha_p, alpha_d) = step.lengths;
        last_steps = (alpha_p, alpha_d);
        if alpha_p < 1e-10 && alpha_d < 1e-10 {
            status = SdpStatus::NumericalTrouble;
            break;
        }

        // back to the original coordinates
        let dx = &step.dx_full;
        let dz = &rd_mat - &sf.adjoint_mat(&step.dir.dy);
        it.x.axpy(alpha_p, dx);
        it.x = it.x.hermitian_part();
        for (s, ds) in it.s.iter_mut().zip(&step.dir.ds) {
            *s += alpha_p * ds;
        }
        for (y, dy) in it.y.iter_mut().zip(&step.dir.dy) {
            *y += alpha_d * dy;
        }
        it.z.axpy(alpha_d, &dz);
        it.z = it.z.hermitian_part();
        for (z, dz) in it.zs.iter_mut().zip(&step.dir.dzs) {
            *z += alpha_d * dz;
        }
    }

    let n_own = p.n_scalars;
    Ok(SdpSolution {
        objective: p.objective_at(&it.x, &it.s[..n_own]),
        dual_objective: dot(&sf.b, &it.y),
        s: it.s[..n_own].to_vec(),
        x: it.x,
        y: sf.original_y(&it.y),
        status,
        residuals,
        iterations,
        trace,
    })
}

struct DualResidual<'a> {
    mat: &'a CMatrix,
    vec: &'a [f64],
}

struct Step {
    dir: Direction,
    dx_full: CMatrix,
    lengths: (f64, f64),
}

fn nt_scaling(sf: &StandardForm, it: &Iterate) -> Result<Scaling> {
    let d = sf.d;
    if d == 0 {
        return Ok(Scaling {
            g: CMatrix::zeros(0, 0),
            v: vec![],
            flat: sf.mats.iter().map(|_| None).collect(),
        });
    }
    let ex = herm_eig(&it.x)?;
    if ex.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    // R = U diag(sqrt(x)), X = R R^H
    let r = CMatrix::from_fn(d, d, |i, j| ex.vectors[(i, j)] * ex.eigenvalues[j].sqrt());
    let s = (&(&r.adjoint() * &it.z) * &r).hermitian_part();
    let es = herm_eig(&s)?;
    if es.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let v: Vec<f64> = es.eigenvalues.iter().map(|w| w.sqrt()).collect();
    let rq = &r * &es.vectors;
    let g = CMatrix::from_fn(d, d, |i, j| rq[(i, j)] / v[j].sqrt());
    let gh = g.adjoint();
    let flat = sf
        .mats
        .iter()
        .map(|mat| mat.as_ref().map(|a| flatten(&(&(&gh * a) * &g).hermitian_part())))
        .collect();
    Ok(Scaling { g, v, flat })
}

fn schur_complement(sf: &StandardForm, sc: &Scaling, it: &Iterate) -> RMatrix {
    let np = sf.p();
    let ratio: Vec<f64> = it.s.iter().zip(&it.zs).map(|(s, z)| s / z).collect();
    let mut mm = RMatrix::zeros(np, np);
    for i in 0..np {
        for j in i..np {
            let mut v = match (&sc.flat[i], &sc.flat[j]) {
                (Some(a), Some(b)) => dot(a, b),
                _ => 0.0,
            };
            for &(k, ci) in &sf.rows[i] {
                for &(l, cj) in &sf.rows[j] {
                    if k == l {
                        v += ci * cj * ratio[k];
                    }
                }
            }
            mm[(i, j)] = v;
            mm[(j, i)] = v;
        }
    }
    mm
}

/// Regularized Cholesky factor of the Schur complement, used as a
/// preconditioner for iterative refinement against the exact matrix.
struct Schur {
    m: RMatrix,
    chol: crate::cxmat::Cholesky,
}

impl Schur {
    const MAX_CG: usize = 25;

    /// Conjugate gradients on the exact matrix, preconditioned by the
    /// regularized factor. Returns the iterate with the smallest residual,
    /// since CG can wander once the matrix is numerically singular.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let bnorm = norm(rhs);
        let mut x = self.chol.solve(rhs);
        if bnorm == 0.0 {
            return x;
        }
        let mx = self.m.apply(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&mx).map(|(b, a)| b - a).collect();
        let mut best = (norm(&r), x.clone());
        let mut z = self.chol.solve(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..Self::MAX_CG {
            if best.0 <= 1e-15 * bnorm {
                break;
            }
            let ap = self.m.apply(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) || !(rz > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            // recompute the true residual to avoid drift
            let mx = self.m.apply(&x);
            for i in 0..r.len() {
                r[i] = rhs[i] - mx[i];
            }
            let rn = norm(&r);
            if rn < best.0 {
                best = (rn, x.clone());
            } else if rn > 10.0 * best.0 {
                break;
            }
            z = self.chol.solve(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        best.1
    }
}

/// Solves the scaled Newton system for a given complementarity target:
/// `T` is the required value of `dX~ + dZ~` and `rc` the scalar one
/// (`z ds + s dz = rc`).
#[allow(clippy::too_many_arguments)]
fn solve_direction(
    sf: &StandardForm,
    sc: &Scaling,
    it: &Iterate,
    schur: &Schur,
    rp: &[f64],
    rd_scaled: &CMatrix,
    rd: &[f64],
    t: &CMatrix,
    rc: &[f64],
) -> Direction {
    let m = sf.m;
    let d = sf.d;
    let flat_rhs = if d > 0 { flatten(&(t - rd_scaled)) } else { vec![] };
    let ratio: Vec<f64> = it.s.iter().zip(&it.zs).map(|(s, z)| s / z).collect();
    let w: Vec<f64> = (0..m).map(|k| rc[k] / it.zs[k] - ratio[k] * rd[k]).collect();
    let rhs: Vec<f64> = (0..sf.p())
        .map(|j| {
            let mut v = rp[j];
            if let Some(f) = &sc.flat[j] {
                v -= dot(f, &flat_rhs);
            }
            for &(k, coef) in &sf.rows[j] {
                v -= coef * w[k];
            }
            v
        })
        .collect();
    let dy = schur.solve(&rhs);

    let mut dz = rd_scaled.clone();
    if d > 0 {
        let n2 = d * d;
        let mut acc = vec![0.0; 2 * n2];
        for (f, &yj) in sc.flat.iter().zip(&dy) {
            if let Some(f) = f {
                for (a, v) in acc.iter_mut().zip(f) {
                    *a += yj * v;
                }
            }
        }
        for (k, z) in dz.as_mut_slice().iter_mut().enumerate() {
            *z -= C64::new(acc[k], acc[n2 + k]);
        }
    }
    let dx = t - &dz;
    let aty = sf.adjoint_vec(&dy);
    let dzs: Vec<f64> = (0..m).map(|k| rd[k] - aty[k]).collect();
    let ds: Vec<f64> = (0..m).map(|k| (rc[k] - it.s[k] * dzs[k]) / it.zs[k]).collect();
    Direction {
        dx,
        dz,
        ds,
        dzs,
        dy,
    }
}

fn step_lengths(sc: &Scaling, it: &Iterate, dir: &Direction) -> Result<(f64, f64)> {
    let ap = max_step_psd(&sc.v, &dir.dx)?.min(max_step_vec(&it.s, &dir.ds));
    let ad = max_step_psd(&sc.v, &dir.dz)?.min(max_step_vec(&it.zs, &dir.dzs));
    Ok((ap, ad))
}

/// `T` with `diag(v) o T = R` (Jordan product), i.e. `T_ij = 2 R_ij / (v_i + v_j)`.
fn lyapunov_diag(v: &[f64], r: &CMatrix) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n, n, |i, j| r[(i, j)] * (2.0 / (v[i] + v[j])))
}

fn newton_step(
    sf: &StandardForm,
    it: &Iterate,
    rp: &[f64],
    rd: DualResidual<'_>,
    mu: f64,
    opts: &SdpOptions,
) -> Result<Step> {
    let d = sf.d;
    let m = sf.m;
    let sc = nt_scaling(sf, it)?;
    let mm = schur_complement(sf, &sc, it);

    let scale = (0..mm.rows()).map(|i| mm[(i, i)]).fold(0.0, f64::max).max(1.0);
    let mut reg = opts.regularization;
    let chol = loop {
        let mut mr = mm.clone();
        for i in 0..mr.rows() {
            mr[(i, i)] += reg * mm[(i, i)].max(1e-30 * scale);
        }
        match mr.cholesky() {
            Ok(c) => break c,
            Err(e) => {
                reg *= 100.0;
                if reg > 1e-4 {
                    return Err(e);
                }
            }
        }
    };
    let schur = Schur { m: mm, chol };

    let gh = sc.g.adjoint();
    let rd_scaled = if d > 0 {
        (&(&gh * rd.mat) * &sc.g).hermitian_part()
    } else {
        CMatrix::zeros(0, 0)
    };
    let vmat = CMatrix::from_diag(&sc.v);

    // predictor
    let t_aff = vmat.scale(-1.0);
    let rc_aff: Vec<f64> = (0..m).map(|k| -it.s[k] * it.zs[k]).collect();
    let aff = solve_direction(sf, &sc, it, &schur, rp, &rd_scaled, rd.vec, &t_aff, &rc_aff);
    let (ap_aff, ad_aff) = step_lengths(&sc, it, &aff)?;

    let cone_dim = (d + m) as f64;
    let sigma = if opts.mehrotra {
        let mut vx = vmat.clone();
        vx.axpy(ap_aff, &aff.dx);
        let mut vz = vmat.clone();
        vz.axpy(ad_aff, &aff.dz);
        let mut c = vx.trace_product_re(&vz);
        for k in 0..m {
            c += (it.s[k] + ap_aff * aff.ds[k]) * (it.zs[k] + ad_aff * aff.dzs[k]);
        }
        let mu_aff = (c / cone_dim).max(0.0);
        (mu_aff / mu).powi(3).clamp(0.0, 1.0)
    } else {
        0.1
    };

    // corrector (or plain centred step)
    let mut r = CMatrix::identity(d).scale(sigma * mu);
    r -= &CMatrix::from_diag(&sc.v.iter().map(|v| v * v).collect::<Vec<_>>());
    let mut rc: Vec<f64> = (0..m).map(|k| sigma * mu - it.s[k] * it.zs[k]).collect();
    if opts.mehrotra {
        let prod = &aff.dx * &aff.dz;
        let sym = (&prod + &prod.adjoint()).scale(0.5);
        r -= &sym;
        for k in 0..m {
            rc[k] -= aff.ds[k] * aff.dzs[k];
        }
    }
    let t = lyapunov_diag(&sc.v, &r);
    let mut dir = solve_direction(sf, &sc, it, &schur, rp, &rd_scaled, rd.vec, &t, &rc);
    let dx_full = refine_primal(sf, &sc, it, &schur, rp, &mut dir);
    let (ap, ad) = step_lengths(&sc, it, &dir)?;
    let gamma = 0.9 + 0.09 * ap_aff.min(ad_aff);
    let lengths = ((gamma * ap).min(1.0), (gamma * ad).min(1.0));
    Ok(Step {
        dir,
        dx_full,
        lengths,
    })
}

/// Pushes `dy` along the Newton system until the unscaled primal direction
/// satisfies `A(dX) + a ds = rp` to working accuracy. Near the optimum the
/// scaling `G` is badly conditioned and the primal residual otherwise creeps
/// back up. Returns `G dX G^H`.
fn refine_primal(
    sf: &StandardForm,
    sc: &Scaling,
    it: &Iterate,
    schur: &Schur,
    rp: &[f64],
    dir: &mut Direction,
) -> CMatrix {
    const ROUNDS: usize = 2;
    let d = sf.d;
    let m = sf.m;
    let ratio: Vec<f64> = it.s.iter().zip(&it.zs).map(|(s, z)| s / z).collect();
    let unscale = |dx: &CMatrix| (&(&sc.g * dx) * &sc.g.adjoint()).hermitian_part();
    let mut dx_full = unscale(&dir.dx);
    for _ in 0..ROUNDS {
        let got = sf.apply(&dx_full, &dir.ds);
        let e: Vec<f64> = rp.iter().zip(&got).map(|(r, g)| r - g).collect();
        if norm(&e) <= 1e-15 * (1.0 + norm(rp)) {
            break;
        }
        let delta = schur.solve(&e);
        if d > 0 {
            let n2 = d * d;
            let mut acc = vec![0.0; 2 * n2];
            for (f, &dj) in sc.flat.iter().zip(&delta) {
                if let Some(f) = f {
                    for (a, v) in acc.iter_mut().zip(f) {
                        *a += dj * v;
                    }
                }
            }
            let corr = CMatrix::from_fn(d, d, |i, j| C64::new(acc[i * d + j], acc[n2 + i * d + j]));
            dir.dx += &corr;
            dir.dz -= &corr;
            dx_full += &unscale(&corr);
        }
        let atd = sf.adjoint_vec(&delta);
        for k in 0..m {
            dir.dzs[k] -= atd[k];
            dir.ds[k] += ratio[k] * atd[k];
        }
        for (y, dj) in dir.dy.iter_mut().zip(&delta) {
            *y += dj;
        }
    }
    dx_full
}
