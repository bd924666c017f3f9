//! Discrete magnetic and convection operators, Dirichlet solves, weak
//! DN pairings and gauge transformations.
//!
//! Both operators share one edge-based bilinear form. For the edge `e` from
//! node `i` to its `+axis` neighbour `j`, with `D u = (u_j - u_i)/dx`,
//!
//! ```text
//! B(u, v) = sum_e w_e [Du Dv + alpha_e (u_i v_j - u_j v_i)/dx + beta_e (u_j v_j - u_i v_i)/dx]
//!         + sum_n w_n m_n u_n v_n
//! ```
//!
//! Magnetic: `alpha = i A_e`, `beta = -F_e`, `m = A.A + p`. Convection:
//! `alpha = -V_e/2`, `beta = V_e/2`, `m = 0`. Edge values are midpoint
//! averages, `w_e` and `w_n` are trapezoid weights. `F` is only ever paired
//! with the difference of the product `u v`, never differentiated.

mod basis;
mod gmres;

pub use basis::*;
pub use gmres::{gmres, GmresOptions, GmresOutcome};

use crate::error::{Error, Result};
use crate::grid::{fd_gradient, Grid, PoissonSolver, ScalarField, VectorField, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Magnetic,
    Convection,
}

#[derive(Clone, Debug)]
pub enum Coefficients {
    Magnetic { a: VectorField, f: VectorField, p: ScalarField },
    Convection { v: VectorField },
}

/// Largest coefficient magnitude accepted at assembly.
pub const COEFFICIENT_LIMIT: f64 = 4.0;

/// Which pieces of the form to include.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Parts {
    pub grad: bool,
    pub alpha: bool,
    pub beta: bool,
    pub mass: bool,
}

impl Parts {
    pub const ALL: Parts = Parts { grad: true, alpha: true, beta: true, mass: true };
    pub const NONE: Parts = Parts { grad: false, alpha: false, beta: false, mass: false };
}

/// Conjugation `u -> e^{-w} h^2 L(e^{w} u)` by a nodal weight `w`.
#[derive(Clone, Debug)]
pub struct Conjugation {
    pub h: f64,
    pub w: Vec<C64>,
    rho: [Vec<C64>; 3],
}

impl Conjugation {
    pub fn new(grid: &Grid, w: Vec<C64>, h: f64) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!("weight has {} entries", w.len())));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("h = {h}")));
        }
        let st = grid.strides();
        let rho = [0, 1, 2].map(|d| {
            (0..grid.len())
                .map(|i| {
                    if grid.unindex(i)[d] + 1 < grid.n[d] {
                        (w[i + st[d]] - w[i]).exp()
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect()
        });
        Ok(Conjugation { h, w, rho })
    }

    /// Linear weight `w = zeta . (x - x_c) / h`.
    pub fn linear(grid: &Grid, zeta: [C64; 3], h: f64, center: [f64; 3]) -> Result<Self> {
        let w = (0..grid.len())
            .map(|i| {
                let x = grid.node(i);
                (0..3).map(|d| zeta[d] * (x[d] - center[d])).sum::<C64>() / h
            })
            .collect();
        Conjugation::new(grid, w, h)
    }

    /// Real weight `w = -phi / h`, the Carleman convention `e^{phi/h} h^2 L e^{-phi/h}`.
    pub fn carleman(grid: &Grid, phi: &[f64], h: f64) -> Result<Self> {
        Conjugation::new(grid, phi.iter().map(|&p| C64::new(-p / h, 0.0)).collect(), h)
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub kind: OperatorKind,
    pub coefficients: Coefficients,
    alpha: [Vec<C64>; 3],
    beta: [Vec<C64>; 3],
    mass: Vec<C64>,
    edge_w: [Vec<f64>; 3],
    node_w: Vec<f64>,
}

fn edge_average(grid: &Grid, v: &[C64], d: usize) -> Vec<C64> {
    let st = grid.strides();
    (0..grid.len())
        .map(|i| if grid.unindex(i)[d] + 1 < grid.n[d] { 0.5 * (v[i] + v[i + st[d]]) } else { C64::new(0.0, 0.0) })
        .collect()
}

impl DiscreteOperator {
    pub fn magnetic(a: VectorField, f: VectorField, p: ScalarField) -> Result<Self> {
        let grid = a.grid;
        grid.same_as(&f.grid)?;
        grid.same_as(&p.grid)?;
        let sup = a.sup_component().max(f.sup_component()).max(p.sup_norm());
        if sup > COEFFICIENT_LIMIT {
            return Err(Error::CoefficientTooLarge(sup));
        }
        let i = C64::new(0.0, 1.0);
        let alpha = [0, 1, 2].map(|d| edge_average(&grid, &a.comps[d], d).into_iter().map(|v| i * v).collect());
        let beta = [0, 1, 2].map(|d| edge_average(&grid, &f.comps[d], d).into_iter().map(|v| -v).collect());
        let mass = (0..grid.len()).map(|n| a.at(n).iter().map(|v| v * v).sum::<C64>() + p.values[n]).collect();
        Ok(Self::assemble(grid, OperatorKind::Magnetic, Coefficients::Magnetic { a, f, p }, alpha, beta, mass))
    }

    pub fn convection(v: VectorField) -> Result<Self> {
        let grid = v.grid;
        let sup = v.sup_component();
        if sup > COEFFICIENT_LIMIT {
            return Err(Error::CoefficientTooLarge(sup));
        }
        let alpha = [0, 1, 2].map(|d| edge_average(&grid, &v.comps[d], d).into_iter().map(|x| -0.5 * x).collect());
        let beta = [0, 1, 2].map(|d| edge_average(&grid, &v.comps[d], d).into_iter().map(|x| 0.5 * x).collect());
        let mass = vec![C64::new(0.0, 0.0); grid.len()];
        Ok(Self::assemble(grid, OperatorKind::Convection, Coefficients::Convection { v }, alpha, beta, mass))
    }

    /// The free operator `-Lap`.
    pub fn laplacian(grid: Grid) -> Self {
        Self::convection(VectorField::zeros(grid)).expect("zero coefficients")
    }

    fn assemble(
        grid: Grid,
        kind: OperatorKind,
        coefficients: Coefficients,
        alpha: [Vec<C64>; 3],
        beta: [Vec<C64>; 3],
        mass: Vec<C64>,
    ) -> Self {
        let edge_w = [0, 1, 2].map(|d| {
            (0..grid.len())
                .map(|i| {
                    let ijk = grid.unindex(i);
                    if ijk[d] + 1 >= grid.n[d] {
                        return 0.0;
                    }
                    let mut w = grid.cell_volume();
                    for e in 0..3 {
                        if e != d && (ijk[e] == 0 || ijk[e] == grid.n[e] - 1) {
                            w *= 0.5;
                        }
                    }
                    w
                })
                .collect()
        });
        let node_w = (0..grid.len()).map(|i| grid.weight(i)).collect();
        DiscreteOperator { grid, kind, coefficients, alpha, beta, mass, edge_w, node_w }
    }

    /// `(A, F, p)`, reducing a convection field first.
    pub fn magnetic_parts(&self) -> (VectorField, VectorField, ScalarField) {
        match &self.coefficients {
            Coefficients::Magnetic { a, f, p } => (a.clone(), f.clone(), p.clone()),
            Coefficients::Convection { v } => crate::potentials::reduce_convection(v),
        }
    }

    /// The magnetic operator with conjugated coefficients, `L_{conj A, conj q}`.
    pub fn conjugate(&self) -> Result<Self> {
        let (a, f, p) = self.magnetic_parts();
        Self::magnetic(a.conj(), f.conj(), p.conj())
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_w
    }

    /// `B(u, delta_n)` for every node `n`, optionally conjugated, in which case
    /// the result is `h^2 e^{-w_n} B(e^{w} u, delta_n)`.
    pub fn apply_form(&self, u: &[C64], conj: Option<&Conjugation>, parts: Parts) -> Vec<C64> {
        let g = &self.grid;
        let st = g.strides();
        let h = g.spacing();
        let mut out = vec![C64::new(0.0, 0.0); g.len()];
        let one = C64::new(1.0, 0.0);
        for d in 0..3 {
            let (inv, inv2) = (1.0 / h[d], 1.0 / (h[d] * h[d]));
            for i in 0..g.len() {
                let we = self.edge_w[d][i];
                if we == 0.0 {
                    continue;
                }
                let j = i + st[d];
                let rho = conj.map_or(one, |c| c.rho[d][i]);
                let (ui, uj) = (u[i], u[j]);
                let ruj = rho * uj;
                let mut oi = C64::new(0.0, 0.0);
                let mut oj = C64::new(0.0, 0.0);
                if parts.grad {
                    let diff = (ruj - ui) * inv2;
                    oi -= diff;
                    oj += diff / rho;
                }
                if parts.alpha {
                    let a = self.alpha[d][i] * inv;
                    oi -= a * ruj;
                    oj += a * ui / rho;
                }
                if parts.beta {
                    let b = self.beta[d][i] * inv;
                    oi -= b * ui;
                    oj += b * uj;
                }
                out[i] += we * oi;
                out[j] += we * oj;
            }
        }
        if parts.mass {
            for n in 0..g.len() {
                out[n] += self.node_w[n] * self.mass[n] * u[n];
            }
        }
        if let Some(c) = conj {
            let s = c.h * c.h;
            out.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    /// Nodal operator `B(u, delta_n) / w_n`.
    pub fn apply(&self, u: &[C64], conj: Option<&Conjugation>) -> Vec<C64> {
        self.apply_parts(u, conj, Parts::ALL)
    }

    pub fn apply_parts(&self, u: &[C64], conj: Option<&Conjugation>, parts: Parts) -> Vec<C64> {
        let mut out = self.apply_form(u, conj, parts);
        out.iter_mut().zip(&self.node_w).for_each(|(v, w)| *v /= w);
        out
    }

    /// The bilinear form `B(u, phi)`.
    pub fn form(&self, u: &ScalarField, phi: &ScalarField) -> C64 {
        self.apply_form(&u.values, None, Parts::ALL).iter().zip(&phi.values).map(|(a, b)| a * b).sum()
    }

    /// Solves `L u = source` at interior nodes with `u = boundary` on the faces.
    /// Interior entries of `boundary` are ignored.
    pub fn solve(
        &self,
        boundary: &ScalarField,
        source: Option<&ScalarField>,
        conj: Option<&Conjugation>,
        opts: GmresOptions,
    ) -> Result<SolveOutcome> {
        let g = self.grid;
        g.same_as(&boundary.grid)?;
        g.require_min_points(3)?;
        let ub: Vec<C64> =
            (0..g.len()).map(|i| if g.is_boundary(i) { boundary.values[i] } else { C64::new(0.0, 0.0) }).collect();
        let lb = self.apply(&ub, conj);
        let rhs: Vec<C64> = (0..g.len())
            .map(|i| {
                if g.is_boundary(i) {
                    C64::new(0.0, 0.0)
                } else {
                    source.map_or(C64::new(0.0, 0.0), |s| s.values[i]) - lb[i]
                }
            })
            .collect();
        let ps = PoissonSolver::new(g);
        let scale = conj.map_or(1.0, |c| c.h * c.h);
        let interior = |v: &mut Vec<C64>| {
            for (i, x) in v.iter_mut().enumerate() {
                if g.is_boundary(i) {
                    *x = C64::new(0.0, 0.0);
                }
            }
        };
        let a = |x: &[C64]| -> Vec<C64> {
            let mut y = self.apply(x, conj);
            interior(&mut y);
            y
        };
        let m = |x: &[C64]| -> Vec<C64> {
            match conj {
                None => ps.solve(x, 0.0, 1.0),
                Some(c) => {
                    let ex: Vec<C64> = x.iter().zip(&c.w).map(|(v, w)| v * w.exp()).collect();
                    let y = ps.solve(&ex, 0.0, scale);
                    y.iter().zip(&c.w).map(|(v, w)| v * (-w).exp()).collect()
                }
            }
        };
        let out = gmres(a, m, &rhs, opts)?;
        let values = out.x.iter().zip(&ub).map(|(x, b)| x + b).collect();
        Ok(SolveOutcome { u: ScalarField { grid: g, values }, iterations: out.iterations, residual: out.residual })
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub u: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `L u = 0` with `u = f` on the faces.
pub fn solve_dirichlet(op: &DiscreteOperator, f: &ScalarField) -> Result<ScalarField> {
    Ok(op.solve(f, None, None, GmresOptions::default())?.u)
}

/// `<Lambda f, phi>`: the form of the solution with boundary data `f`
/// against any extension `phi` of the test trace.
pub fn dn_pairing(op: &DiscreteOperator, f: &ScalarField, phi: &ScalarField) -> Result<C64> {
    dn_pairing_with(op, f, phi)
}

pub(crate) fn dn_pairing_with(op: &DiscreteOperator, f: &ScalarField, phi: &ScalarField) -> Result<C64> {
    let u = solve_dirichlet(op, f)?;
    Ok(op.form(&u, phi))
}

/// `A + grad psi`; `psi` must vanish on the two outer node layers.
pub fn gauge_transform(a: &VectorField, psi: &ScalarField) -> Result<VectorField> {
    a.grid.same_as(&psi.grid)?;
    let b = psi.boundary_layer_sup(2);
    if b > 1e-12 * psi.sup_norm().max(1.0) {
        return Err(Error::GaugeNotBoundaryVanishing(b));
    }
    Ok(a.add(&fd_gradient(psi)?))
}

/// Coefficients of a convection operator rewritten in magnetic form.
pub fn magnetic_from_convection(v: &VectorField) -> Result<DiscreteOperator> {
    let (a, f, p) = crate::potentials::reduce_convection(v);
    DiscreteOperator::magnetic(a, f, p)
}

#[cfg(test)]
mod tests;
