//! Hermitian eigendecomposition: Householder reduction to a complex
//! tridiagonal matrix, a diagonal phase change that makes it real, then the
//! implicit QL iteration with Wilkinson-style shifts.

use super::{CMatrix, C64, HERMITIAN_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HermEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` belongs to `eigenvalues[k]`.
    pub vectors: CMatrix,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(f(w)) V^H`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let fw: Vec<f64> = self.eigenvalues.iter().map(|&w| f(w)).collect();
        self.compose(&fw)
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<CMatrix> {
        let fw = self
            .eigenvalues
            .iter()
            .map(|&w| f(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.compose(&fw))
    }

    /// `V diag(values) V^H` for an arbitrary real diagonal.
    pub fn compose(&self, values: &[f64]) -> CMatrix {
        let n = self.dim();
        assert_eq!(values.len(), n);
        let v = &self.vectors;
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &w) in values.iter().enumerate() {
                    if w != 0.0 {
                        acc += v[(i, k)] * v[(j, k)].conj() * w;
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
            out[(i, i)].im = 0.0;
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.compose(&self.eigenvalues)
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input must be Hermitian to within `1e-9` relative to its largest
/// entry; only its Hermitian part is decomposed.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(HermEig {
            eigenvalues: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let deviation = a.hermitian_deviation();
    let tolerance = HERMITIAN_TOL * a.max_abs().max(1.0);
    if deviation > tolerance {
        return Err(Error::NonHermitian {
            deviation,
            tolerance,
        });
    }

    let mut t = a.hermitian_part();
    let mut q = CMatrix::identity(n);
    tridiagonalize(&mut t, &mut q);

    let mut diag: Vec<f64> = (0..n).map(|i| t[(i, i)].re).collect();
    let mut off = vec![0.0; n];
    let mut phase = vec![C64::new(1.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        let e = t[(k + 1, k)];
        let r = e.norm();
        off[k] = r;
        phase[k + 1] = if r > 0.0 { phase[k] * (e / r) } else { phase[k] };
    }

    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut diag, &mut off, &mut z, n)?;

    // vectors = Q * diag(phase) * Z
    let mut vectors = CMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            let qp = q[(i, k)] * phase[k];
            if qp.re == 0.0 && qp.im == 0.0 {
                continue;
            }
            for j in 0..n {
                vectors[(i, j)] += qp * z[k * n + j];
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]));
    let eigenvalues = order.iter().map(|&k| diag[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok(HermEig {
        eigenvalues,
        vectors,
    })
}

/// In-place unitary reduction `t <- Q^H t Q` to tridiagonal form, with the
/// reflectors accumulated into `q`.
fn tridiagonalize(t: &mut CMatrix, q: &mut CMatrix) {
    let n = t.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut p = vec![C64::new(0.0, 0.0); n];
    for k in 0..n - 2 {
        let lo = k + 1;
        let sigma = (lo..n).map(|i| t[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        let tail = (lo + 1..n).map(|i| t[(i, k)].norm_sqr()).sum::<f64>();
        if sigma == 0.0 || tail <= f64::MIN_POSITIVE {
            continue;
        }
        let x0 = t[(lo, k)];
        let x0_abs = x0.norm();
        let ph = if x0_abs > 0.0 { x0 / x0_abs } else { C64::new(1.0, 0.0) };
        let alpha = -ph * sigma;
        for i in lo..n {
            v[i] = t[(i, k)];
        }
        v[lo] -= alpha;
        let vhv = 2.0 * sigma * (sigma + x0_abs);
        let tau = 2.0 / vhv;

        // p = tau * B v on the trailing block
        for i in lo..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in lo..n {
                acc += t[(i, j)] * v[j];
            }
            p[i] = acc * tau;
        }
        let kk: f64 = 0.5 * tau * (lo..n).map(|i| (v[i].conj() * p[i]).re).sum::<f64>();
        for i in lo..n {
            p[i] -= v[i] * kk;
        }
        for i in lo..n {
            for j in lo..n {
                let upd = v[i] * p[j].conj() + p[i] * v[j].conj();
                t[(i, j)] -= upd;
            }
        }
        t[(lo, k)] = alpha;
        t[(k, lo)] = alpha.conj();
        for i in lo + 1..n {
            t[(i, k)] = C64::new(0.0, 0.0);
            t[(k, i)] = C64::new(0.0, 0.0);
        }

        // q <- q (I - tau v v^H)
        for r in 0..n {
            let mut qv = C64::new(0.0, 0.0);
            for j in lo..n {
                qv += q[(r, j)] * v[j];
            }
            qv *= tau;
            for j in lo..n {
                let upd = qv * v[j].conj();
                q[(r, j)] -= upd;
            }
        }
    }
}

/// Implicit QL on the real symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` (`e[i]` couples `i` and `i + 1`, `e[n-1] = 0`).
/// Rotations are accumulated into the row-major `z`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::NoConvergence("Hermitian eigensolver"));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk = &mut z[k * n..(k + 1) * n];
                        let h = zk[i + 1];
                        zk[i + 1] = s * zk[i] + c * h;
                        zk[i] = c * zk[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_input_sorted() {
        let eig = herm_eig(&CMatrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        for (w, want) in eig.eigenvalues.iter().zip([1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(*w, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn pauli_x_spectrum() {
        let x = CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let eig = herm_eig(&x).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = CMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(herm_eig(&a), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            herm_eig(&CMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn complex_off_diagonal_chain() {
        // tridiagonal input with complex couplings exercises the phase change
        let mut a = CMatrix::zeros(4, 4);
        let cs = [C64::new(0.3, 0.4), C64::new(0.0, -1.0), C64::new(-0.6, 0.8)];
        for (k, c) in cs.iter().enumerate() {
            a[(k + 1, k)] = *c;
            a[(k, k + 1)] = c.conj();
            a[(k, k)] = C64::new(k as f64, 0.0);
        }
        let eig = herm_eig(&a).unwrap();
        assert!((&eig.reconstruct() - &a).frobenius_norm() < 1e-13);
        let vhv = &eig.vectors.adjoint() * &eig.vectors;
        assert!((&vhv - &CMatrix::identity(4)).max_abs() < 1e-13);
    }

    #[test]
    fn degenerate_spectrum() {
        let eig = herm_eig(&CMatrix::identity(5)).unwrap();
        assert!(eig.eigenvalues.iter().all(|w| (w - 1.0).abs() < 1e-15));
    }
}
