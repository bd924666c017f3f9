//! Boundary sine modes, their interior lifts and sampled DN matrices.

use super::{dn_pairing_with, solve_dirichlet, DiscreteOperator};
use crate::error::{Error, Result};
use crate::grid::{Container, Grid, ScalarField, VectorField, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Interior extension of a face mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lift {
    /// `sinh(kappa (1 - t)) / sinh(kappa)`, harmonic in the continuum.
    Harmonic,
    /// `(1 - t)^3`.
    Polynomial,
}

/// `sin(m pi s) sin(n pi t)` on face `axis`/`side`, `s, t` the normalized
/// tangential coordinates in increasing axis order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryMode {
    pub axis: usize,
    pub side: usize,
    pub m: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBasis {
    pub grid: Grid,
    pub max_mode: usize,
    pub modes: Vec<BoundaryMode>,
}

fn tangential(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

impl BoundaryBasis {
    /// All `6 M^2` face modes with `1 <= m, n <= M`. Each oscillation must
    /// span at least eight nodes.
    pub fn new(grid: Grid, max_mode: usize) -> Result<Self> {
        if max_mode == 0 {
            return Err(Error::InvalidArgument("basis needs at least one mode".into()));
        }
        for d in 0..3 {
            let nodes = 2.0 * (grid.n[d] - 1) as f64 / max_mode as f64;
            if nodes < 8.0 {
                return Err(Error::BasisUnderresolved { mode: max_mode, nodes });
            }
        }
        let mut modes = Vec::new();
        for axis in 0..3 {
            for side in 0..2 {
                for m in 1..=max_mode {
                    for n in 1..=max_mode {
                        modes.push(BoundaryMode { axis, side, m, n });
                    }
                }
            }
        }
        Ok(BoundaryBasis { grid, max_mode, modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// The lifted field of mode `k`; its face values are the mode's trace.
    pub fn lift(&self, k: usize, kind: Lift) -> ScalarField {
        let g = self.grid;
        let md = self.modes[k];
        let (a, b) = tangential(md.axis);
        let len = g.extent;
        let kappa = PI * len[md.axis] * ((md.m as f64 / len[a]).powi(2) + (md.n as f64 / len[b]).powi(2)).sqrt();
        ScalarField::from_real_fn(g, |x| {
            let s = (x[a] - g.origin[a]) / len[a];
            let t = (x[b] - g.origin[b]) / len[b];
            let mut r = (x[md.axis] - g.origin[md.axis]) / len[md.axis];
            if md.side == 1 {
                r = 1.0 - r;
            }
            let r = r.clamp(0.0, 1.0);
            let decay = match kind {
                Lift::Harmonic => (kappa * (1.0 - r)).sinh() / kappa.sinh(),
                Lift::Polynomial => (1.0 - r).powi(3),
            };
            (md.m as f64 * PI * s).sin() * (md.n as f64 * PI * t).sin() * decay
        })
    }

    pub fn descriptor_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("basis serializes")
    }
}

/// Entry `(i, j)` is `B(u_j, lift_i)`, `u_j` the solution with the trace of mode `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DnMatrix {
    pub basis: BoundaryBasis,
    pub entries: Vec<C64>,
}

impl DnMatrix {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.size() + j]
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||self - other||_F`.
    pub fn distance(&self, other: &DnMatrix) -> Result<f64> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::ShapeMismatch("DN matrices of different size".into()));
        }
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    pub fn relative_distance(&self, other: &DnMatrix) -> Result<f64> {
        let d = self.distance(other)?;
        let s = self.frobenius();
        Ok(if s == 0.0 { d } else { d / s })
    }

    /// `max |M_ij - M_ji|` relative to `max |M_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.size();
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                num = num.max((self.get(i, j) - self.get(j, i)).norm());
                den = den.max(self.get(i, j).norm());
            }
        }
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    pub fn to_container(&self) -> Container {
        Container::Matrix { grid: self.basis.grid, rows: self.size(), cols: self.size(), entries: self.entries.clone() }
    }
}

pub fn dn_matrix(op: &DiscreteOperator, basis: &BoundaryBasis) -> Result<DnMatrix> {
    op.grid.same_as(&basis.grid)?;
    let n = basis.len();
    let lifts: Vec<ScalarField> = (0..n).map(|k| basis.lift(k, Lift::Harmonic)).collect();
    let cols: Vec<Vec<C64>> = lifts
        .par_iter()
        .map(|f| -> Result<Vec<C64>> {
            let u = solve_dirichlet(op, f)?;
            Ok(lifts.iter().map(|phi| op.form(&u, phi)).collect())
        })
        .collect::<Result<_>>()?;
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            entries[i * n + j] = *v;
        }
    }
    Ok(DnMatrix { basis: basis.clone(), entries })
}

/// Pairing of one basis solution against both lifts of a test mode.
pub fn lift_independence(op: &DiscreteOperator, basis: &BoundaryBasis, j: usize, i: usize) -> Result<(C64, C64)> {
    let f = basis.lift(j, Lift::Harmonic);
    let a = dn_pairing_with(op, &f, &basis.lift(i, Lift::Harmonic))?;
    let b = dn_pairing_with(op, &f, &basis.lift(i, Lift::Polynomial))?;
    Ok((a, b))
}

/// Samples of `outer` at the nodes of `inner`, which must coincide.
pub fn restrict_scalar(f: &ScalarField, inner: &Grid) -> Result<ScalarField> {
    let map = node_map(&f.grid, inner)?;
    Ok(ScalarField { grid: *inner, values: map.iter().map(|&i| f.values[i]).collect() })
}

pub fn restrict_vector(f: &VectorField, inner: &Grid) -> Result<VectorField> {
    let map = node_map(&f.grid, inner)?;
    let comps = [0, 1, 2].map(|d| map.iter().map(|&i| f.comps[d][i]).collect());
    VectorField::new(*inner, comps)
}

fn node_map(outer: &Grid, inner: &Grid) -> Result<Vec<usize>> {
    let ho = outer.spacing();
    let hi = inner.spacing();
    let mut off = [0usize; 3];
    for d in 0..3 {
        let lo = inner.origin[d] - outer.origin[d];
        let hi_end = outer.origin[d] + outer.extent[d] - inner.origin[d] - inner.extent[d];
        if lo <= 0.0 || hi_end <= 0.0 {
            return Err(Error::DomainsNotNested(format!("axis {d}")));
        }
        if (ho[d] - hi[d]).abs() > 1e-9 * ho[d] || ((lo / ho[d]) - (lo / ho[d]).round()).abs() > 1e-6 {
            return Err(Error::ShapeMismatch(format!("nodes do not coincide along axis {d}")));
        }
        off[d] = (lo / ho[d]).round() as usize;
    }
    Ok((0..inner.len())
        .map(|i| {
            let ijk = inner.unindex(i);
            outer.index(ijk[0] + off[0], ijk[1] + off[1], ijk[2] + off[2])
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub inner_difference: f64,
    pub outer_difference: f64,
    pub inner_norm: f64,
    pub outer_norm: f64,
    pub spacing: f64,
    /// `outer <= inner + spacing^2`, both relative to the first matrix.
    pub bound_holds: bool,
}

/// DN differences of two convection fields on `inner` and on the grid of
/// the fields. The fields must agree outside `inner`.
pub fn extension_consistency(
    v1: &VectorField,
    v2: &VectorField,
    inner: &Grid,
    max_mode: usize,
) -> Result<ExtensionReport> {
    let outer = v1.grid;
    outer.same_as(&v2.grid)?;
    let map = node_map(&outer, inner)?;
    let mut in_omega = vec![false; outer.len()];
    for (k, &i) in map.iter().enumerate() {
        in_omega[i] = !inner.is_boundary(k);
    }
    let mut diff: f64 = 0.0;
    for i in 0..outer.len() {
        if !in_omega[i] {
            for d in 0..3 {
                diff = diff.max((v1.comps[d][i] - v2.comps[d][i]).norm());
            }
        }
    }
    if diff > 1e-12 {
        return Err(Error::CoefficientsDifferOutsideOmega(diff));
    }
    let run = |g: &Grid, a: &VectorField, b: &VectorField| -> Result<(f64, f64)> {
        let basis = BoundaryBasis::new(*g, max_mode)?;
        let m1 = dn_matrix(&DiscreteOperator::convection(a.clone())?, &basis)?;
        let m2 = dn_matrix(&DiscreteOperator::convection(b.clone())?, &basis)?;
        Ok((m1.distance(&m2)?, m1.frobenius()))
    };
    let (di, ni) = run(inner, &restrict_vector(v1, inner)?, &restrict_vector(v2, inner)?)?;
    let (dout, nout) = run(&outer, v1, v2)?;
    let spacing = outer.spacing().iter().cloned().fold(0.0, f64::max);
    let bound_holds = dout / nout <= di / ni + spacing * spacing;
    Ok(ExtensionReport {
        inner_difference: di,
        outer_difference: dout,
        inner_norm: ni,
        outer_norm: nout,
        spacing,
        bound_holds,
    })
}
