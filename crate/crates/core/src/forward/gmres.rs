//! Restarted GMRES with right preconditioning on complex vectors.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    /// Relative residual target `||b - A x|| / ||b||`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-10, restart: 60, max_iter: 1200 }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b` as `A M y = b`, `x = M y`. A cycle that fails to reduce
/// the residual is reported as a singular discrete system.
pub fn gmres(
    a: impl Fn(&[C64]) -> Vec<C64>,
    m: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    opts: GmresOptions,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return Ok(GmresOutcome { x, iterations: 0, residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut total = 0;
    let mut rel = 1.0;
    loop {
        let beta = norm(&r);
        let prev = rel;
        rel = beta / bnorm;
        if rel <= opts.tol {
            return Ok(GmresOutcome { x, iterations: total, residual: rel });
        }
        if total > 0 && rel > 0.999 * prev {
            return Err(Error::DiscreteWellposednessViolated(format!(
                "GMRES stagnated at relative residual {rel:.3e} after {total} iterations"
            )));
        }
        if total >= opts.max_iter {
            return Err(Error::LinearSolveFailed { residual: rel, iterations: total });
        }
        let k_max = opts.restart;
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(k_max + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![C64::new(0.0, 0.0); k_max]; k_max + 1];
        let mut cs = vec![0.0f64; k_max];
        let mut sn = vec![C64::new(0.0, 0.0); k_max];
        let mut g = vec![C64::new(0.0, 0.0); k_max + 1];
        g[0] = C64::new(beta, 0.0);
        let mut used = 0;
        for k in 0..k_max {
            let z = m(&basis[k]);
            let mut w = a(&z);
            for (j, v) in basis.iter().enumerate() {
                let hj = dotc(v, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hj * vi);
                hess[j][k] = hj;
            }
            // One reorthogonalization pass keeps the basis orthonormal.
            for (j, v) in basis.iter().enumerate() {
                let hj = dotc(v, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hj * vi);
                hess[j][k] += hj;
            }
            let wn = norm(&w);
            hess[k + 1][k] = C64::new(wn, 0.0);
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j].conj() * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let (hk, hk1) = (hess[k][k], hess[k + 1][k]);
            let d = (hk.norm_sqr() + hk1.norm_sqr()).sqrt();
            if d == 0.0 {
                break;
            }
            if hk.norm() == 0.0 {
                cs[k] = 0.0;
                sn[k] = hk1.conj() / d;
            } else {
                cs[k] = hk.norm() / d;
                sn[k] = hk / hk.norm() * hk1.conj() / d;
            }
            hess[k][k] = cs[k] * hk + sn[k] * hk1;
            hess[k + 1][k] = C64::new(0.0, 0.0);
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] *= cs[k];
            used = k + 1;
            total += 1;
            if g[k + 1].norm() / bnorm <= opts.tol * 0.5 || wn <= 1e-14 * beta || total >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![C64::new(0.0, 0.0); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for j in i + 1..used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut upd = vec![C64::new(0.0, 0.0); n];
        for (yj, v) in y.iter().zip(&basis) {
            upd.iter_mut().zip(v).for_each(|(u, vi)| *u += yj * vi);
        }
        let dx = m(&upd);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        let ax = a(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let n = 30;
        let mat = |i: usize, j: usize| -> C64 {
            if i == j {
                C64::new(4.0, 0.5)
            } else if j == i + 1 {
                C64::new(-1.0, 0.3)
            } else if i == j + 1 {
                C64::new(-1.2, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        };
        let apply = |v: &[C64]| -> Vec<C64> { (0..n).map(|i| (0..n).map(|j| mat(i, j) * v[j]).sum()).collect() };
        let truth: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0 - i as f64 * 0.1)).collect();
        let b = apply(&truth);
        let out = gmres(apply, |v| v.to_vec(), &b, GmresOptions { tol: 1e-12, restart: 8, max_iter: 500 }).unwrap();
        for (u, t) in out.x.iter().zip(&truth) {
            assert!((u - t).norm() < 1e-9);
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let apply = |v: &[C64]| -> Vec<C64> { vec![v[0], C64::new(0.0, 0.0)] };
        let b = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let err = gmres(apply, |v| v.to_vec(), &b, GmresOptions::default()).unwrap_err();
        assert_eq!(err.code(), "discrete-wellposedness-violated");
    }
}
