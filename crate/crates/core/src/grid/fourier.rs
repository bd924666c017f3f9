use super::spectral::{Fft3, PoissonSolver};
use super::{fd_gradient, Grid, ScalarField, C64};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Samples of `int f(x) e^{-i x . xi} dx` on the DFT frequency lattice of a grid.
#[derive(Clone, Debug)]
pub struct FourierField {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl FourierField {
    /// Signed lattice frequency of entry `idx` (DFT order).
    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        lattice_frequency(&self.grid, idx)
    }
}

pub(crate) fn lattice_frequency(grid: &Grid, idx: usize) -> [f64; 3] {
    let m = grid.unindex(idx);
    let h = grid.spacing();
    let mut xi = [0.0; 3];
    for d in 0..3 {
        let n = grid.n[d];
        let s = if m[d] < (n + 1) / 2 { m[d] as f64 } else { m[d] as f64 - n as f64 };
        xi[d] = 2.0 * PI * s / (n as f64 * h[d]);
    }
    xi
}

/// Rejects fields that do not vanish on the two outermost node layers.
pub fn check_compact_support(f: &ScalarField) -> Result<()> {
    let max = f.sup_norm();
    let boundary = f.boundary_layer_sup(2);
    if max > 0.0 && boundary >= 1e-8 * max {
        return Err(Error::FieldNotCompactlySupported { boundary, max });
    }
    Ok(())
}

pub fn fourier_transform(f: &ScalarField) -> Result<FourierField> {
    check_compact_support(f)?;
    let g = f.grid;
    let mut data: Vec<C64> = (0..g.len()).map(|i| f.values[i] * g.weight(i)).collect();
    Fft3::new(g.n).forward(&mut data);
    for (idx, v) in data.iter_mut().enumerate() {
        let xi = lattice_frequency(&g, idx);
        let phase = -(g.origin[0] * xi[0] + g.origin[1] * xi[1] + g.origin[2] * xi[2]);
        *v *= C64::from_polar(1.0, phase);
    }
    Ok(FourierField { grid: g, values: data })
}

/// Direct trapezoid quadrature of `int f(x) e^{-i x . xi} dx` at one frequency.
pub fn ft_at(f: &ScalarField, xi: [f64; 3]) -> C64 {
    let g = f.grid;
    let tables: Vec<Vec<C64>> = (0..3)
        .map(|d| {
            let h = g.spacing()[d];
            (0..g.n[d])
                .map(|i| {
                    let x = g.origin[d] + i as f64 * h;
                    let w = if i == 0 || i == g.n[d] - 1 { 0.5 * h } else { h };
                    C64::from_polar(w, -x * xi[d])
                })
                .collect()
        })
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    let mut idx = 0;
    for k in 0..g.n[2] {
        let tz = tables[2][k];
        for j in 0..g.n[1] {
            let tyz = tables[1][j] * tz;
            let row = &f.values[idx..idx + g.n[0]];
            let mut s = C64::new(0.0, 0.0);
            for (v, t) in row.iter().zip(&tables[0]) {
                s += v * t;
            }
            acc += s * tyz;
            idx += g.n[0];
        }
    }
    acc
}

/// Trapezoid L2 norm.
pub fn l2_norm(f: &ScalarField) -> f64 {
    (0..f.grid.len()).map(|i| f.values[i].norm_sqr() * f.grid.weight(i)).sum::<f64>().sqrt()
}

/// `(||f||^2 + ||h grad f||^2)^{1/2}` with trapezoid quadrature.
pub fn scl_norm_h1(f: &ScalarField, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h}")));
    }
    let g = fd_gradient(f)?;
    let grid = f.grid;
    let s: f64 = (0..grid.len())
        .map(|i| {
            let grad2: f64 = (0..3).map(|d| g.comps[d][i].norm_sqr()).sum();
            (f.values[i].norm_sqr() + h * h * grad2) * grid.weight(i)
        })
        .sum();
    Ok(s.sqrt())
}

/// Fourier-multiplier proxy `||(1+|h xi|^2)^{-1/2} f^||` over the box lattice.
pub fn scl_norm_hminus1(f: &ScalarField, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h}")));
    }
    check_compact_support(f)?;
    let g = f.grid;
    let mut data = f.values.clone();
    Fft3::new(g.n).forward(&mut data);
    let s: f64 = data
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let xi = lattice_frequency(&g, idx);
            let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            v.norm_sqr() / (1.0 + h * h * k2)
        })
        .sum();
    Ok((s * g.cell_volume() / g.len() as f64).sqrt())
}

/// Dual norm of the interior values against `H^1_0` with the discrete
/// Dirichlet Laplacian, for fields that need not vanish near the faces.
pub fn scl_norm_hminus1_dirichlet(f: &ScalarField, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h}")));
    }
    f.grid.require_min_points(3)?;
    let ps = PoissonSolver::new(f.grid);
    Ok(dirichlet_dual_norm(&ps, &f.values, h))
}

pub(crate) fn dirichlet_dual_norm(ps: &PoissonSolver, values: &[C64], h: f64) -> f64 {
    let e = ps.spectral_energy(values, |lam| 1.0 / (1.0 + h * h * lam));
    (e * ps.grid().cell_volume()).sqrt()
}
