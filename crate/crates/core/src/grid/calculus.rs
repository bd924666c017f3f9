use super::{fields::TWO_FORM_AXES, Grid, ScalarField, TwoForm, VectorField, C64};
use crate::error::Result;

/// Second-order derivative along axis `d`: central inside, one-sided at faces.
pub(crate) fn axis_derivative(grid: &Grid, v: &[C64], d: usize) -> Vec<C64> {
    let n = grid.n[d];
    let s = grid.strides()[d];
    let inv = 1.0 / grid.spacing()[d];
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = grid.unindex(idx)[d];
        *o = if i == 0 {
            (-3.0 * v[idx] + 4.0 * v[idx + s] - v[idx + 2 * s]) * (0.5 * inv)
        } else if i == n - 1 {
            (3.0 * v[idx] - 4.0 * v[idx - s] + v[idx - 2 * s]) * (0.5 * inv)
        } else {
            (v[idx + s] - v[idx - s]) * (0.5 * inv)
        };
    }
    out
}

pub fn fd_gradient(f: &ScalarField) -> Result<VectorField> {
    f.grid.require_min_points(3)?;
    let g = &f.grid;
    Ok(VectorField {
        grid: *g,
        comps: [
            axis_derivative(g, &f.values, 0),
            axis_derivative(g, &f.values, 1),
            axis_derivative(g, &f.values, 2),
        ],
    })
}

pub fn fd_divergence(w: &VectorField) -> Result<ScalarField> {
    w.grid.require_min_points(3)?;
    let g = &w.grid;
    let mut values = axis_derivative(g, &w.comps[0], 0);
    for d in 1..3 {
        for (o, v) in values.iter_mut().zip(axis_derivative(g, &w.comps[d], d)) {
            *o += v;
        }
    }
    Ok(ScalarField { grid: *g, values })
}

/// `zeta . grad f` for a constant complex vector.
pub fn directional_derivative(f: &ScalarField, zeta: [C64; 3]) -> Result<ScalarField> {
    Ok(fd_gradient(f)?.dot_const(zeta))
}

pub fn curl_two_form(a: &VectorField) -> Result<TwoForm> {
    a.grid.require_min_points(3)?;
    let g = &a.grid;
    let comps = TWO_FORM_AXES.map(|(j, k)| {
        let djak = axis_derivative(g, &a.comps[k], j);
        let dkaj = axis_derivative(g, &a.comps[j], k);
        djak.iter().zip(&dkaj).map(|(x, y)| x - y).collect::<Vec<_>>()
    });
    Ok(TwoForm { grid: *g, comps })
}

/// Laplacian consistent with `fd_divergence(fd_gradient(f))`: the
/// wide central stencil on nodes at least two away from every face, the
/// composed one-sided stencils elsewhere.
pub fn fd_laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.grid.require_min_points(3)?;
    let g = &f.grid;
    let h = g.spacing();
    let st = g.strides();
    let composed = fd_divergence(&fd_gradient(f)?)?;
    let mut values = composed.values;
    for (idx, o) in values.iter_mut().enumerate() {
        if g.boundary_distance(idx) < 2 {
            continue;
        }
        let mut acc = C64::new(0.0, 0.0);
        for d in 0..3 {
            let s = st[d];
            acc += (f.values[idx + 2 * s] - 2.0 * f.values[idx] + f.values[idx - 2 * s]) / (4.0 * h[d] * h[d]);
        }
        *o = acc;
    }
    Ok(ScalarField { grid: *g, values })
}
