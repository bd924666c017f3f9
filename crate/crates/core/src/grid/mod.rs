//! Uniform grids on boxes, complex fields sampled on them, finite-difference
//! calculus, spectral transforms and the semiclassical norms.

mod calculus;
mod fields;
mod fourier;
pub mod io;
pub mod spectral;

pub use calculus::{curl_two_form, directional_derivative, fd_divergence, fd_gradient, fd_laplacian};
pub use fields::{ScalarField, TwoForm, VectorField, TWO_FORM_AXES};
pub use io::Container;
pub use spectral::PoissonSolver;
pub use fourier::{
    check_compact_support, fourier_transform, ft_at, l2_norm, scl_norm_h1, scl_norm_hminus1,
    scl_norm_hminus1_dirichlet, FourierField,
};
pub(crate) use fourier::dirichlet_dual_norm;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type C64 = num_complex::Complex64;

/// A uniform rectilinear sampling of the closed box `origin + [0, extent]`.
/// Nodes are stored x-fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: [f64; 3],
    pub extent: [f64; 3],
    pub n: [usize; 3],
}

impl Grid {
    pub fn new(origin: [f64; 3], extent: [f64; 3], n: [usize; 3]) -> Result<Self> {
        for d in 0..3 {
            if !(extent[d] > 0.0) || !extent[d].is_finite() || !origin[d].is_finite() {
                return Err(Error::InvalidArgument(format!("extent[{d}] = {}", extent[d])));
            }
            if n[d] < 2 {
                return Err(Error::GridUnderresolved(format!("n[{d}] = {} < 2", n[d])));
            }
        }
        Ok(Grid { origin, extent, n })
    }

    /// `n` points per axis on the unit cube.
    pub fn unit(n: usize) -> Self {
        Grid { origin: [0.0; 3], extent: [1.0; 3], n: [n; 3] }
    }

    /// Cube of side `side` centred at `center`.
    pub fn centered(center: [f64; 3], side: f64, n: usize) -> Self {
        Grid {
            origin: [center[0] - side / 2.0, center[1] - side / 2.0, center[2] - side / 2.0],
            extent: [side; 3],
            n: [n; 3],
        }
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.extent[0] / (self.n[0] - 1) as f64,
            self.extent[1] / (self.n[1] - 1) as f64,
            self.extent[2] / (self.n[2] - 1) as f64,
        ]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> [usize; 3] {
        [1, self.n[0], self.n[0] * self.n[1]]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let r = idx / self.n[0];
        [i, r % self.n[1], r / self.n[1]]
    }

    #[inline]
    pub fn node_ijk(&self, ijk: [usize; 3]) -> [f64; 3] {
        let h = self.spacing();
        [
            self.origin[0] + ijk[0] as f64 * h[0],
            self.origin[1] + ijk[1] as f64 * h[1],
            self.origin[2] + ijk[2] as f64 * h[2],
        ]
    }

    #[inline]
    pub fn node(&self, idx: usize) -> [f64; 3] {
        self.node_ijk(self.unindex(idx))
    }

    pub fn center(&self) -> [f64; 3] {
        [
            self.origin[0] + self.extent[0] / 2.0,
            self.origin[1] + self.extent[1] / 2.0,
            self.origin[2] + self.extent[2] / 2.0,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    /// Trapezoid quadrature weight of a node.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let ijk = self.unindex(idx);
        let mut w = self.cell_volume();
        for d in 0..3 {
            if ijk[d] == 0 || ijk[d] == self.n[d] - 1 {
                w *= 0.5;
            }
        }
        w
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary_distance(idx) == 0
    }

    /// Smallest index distance from the node to a face.
    #[inline]
    pub fn boundary_distance(&self, idx: usize) -> usize {
        let ijk = self.unindex(idx);
        (0..3).map(|d| ijk[d].min(self.n[d] - 1 - ijk[d])).min().unwrap()
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|d| x[d] >= self.origin[d] && x[d] <= self.origin[d] + self.extent[d])
    }

    pub fn strictly_contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|d| x[d] > self.origin[d] && x[d] < self.origin[d] + self.extent[d])
    }

    /// Distance from `x` to the nearest face (negative outside).
    pub fn face_distance(&self, x: [f64; 3]) -> f64 {
        (0..3)
            .map(|d| (x[d] - self.origin[d]).min(self.origin[d] + self.extent[d] - x[d]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn require_min_points(&self, m: usize) -> Result<()> {
        if self.n.iter().any(|&k| k < m) {
            return Err(Error::GridUnderresolved(format!(
                "{:?} points, at least {m} per axis needed",
                self.n
            )));
        }
        Ok(())
    }

    pub fn same_as(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self, other)));
        }
        Ok(())
    }

    /// Index of the node nearest to `x`, clamped to the box.
    pub fn nearest(&self, x: [f64; 3]) -> [usize; 3] {
        let h = self.spacing();
        let mut out = [0; 3];
        for d in 0..3 {
            let t = ((x[d] - self.origin[d]) / h[d]).round();
            out[d] = t.clamp(0.0, (self.n[d] - 1) as f64) as usize;
        }
        out
    }

    /// Trilinear interpolation of nodal data at `x`; zero outside the box.
    #[inline]
    pub fn interpolate(&self, values: &[C64], x: [f64; 3]) -> C64 {
        let h = self.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..3 {
            let t = (x[d] - self.origin[d]) / h[d];
            let last = (self.n[d] - 1) as f64;
            if !(t >= 0.0 && t <= last) {
                return C64::new(0.0, 0.0);
            }
            let f = t.floor().min(last - 1.0);
            base[d] = f as usize;
            frac[d] = t - f;
        }
        let s = self.strides();
        let b = base[0] + s[1] * base[1] + s[2] * base[2];
        let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
        let c00 = values[b] * (1.0 - fx) + values[b + 1] * fx;
        let c10 = values[b + s[1]] * (1.0 - fx) + values[b + s[1] + 1] * fx;
        let c01 = values[b + s[2]] * (1.0 - fx) + values[b + s[2] + 1] * fx;
        let c11 = values[b + s[1] + s[2]] * (1.0 - fx) + values[b + s[1] + s[2] + 1] * fx;
        let c0 = c00 * (1.0 - fy) + c10 * fy;
        let c1 = c01 * (1.0 - fy) + c11 * fy;
        c0 * (1.0 - fz) + c1 * fz
    }

    /// Tricubic Catmull-Rom interpolation, treating nodes outside the box as
    /// zero. Meant for data that vanishes near the faces.
    pub fn interpolate_cubic(&self, values: &[C64], x: [f64; 3]) -> C64 {
        let h = self.spacing();
        let mut base = [0isize; 3];
        let mut w = [[0.0f64; 4]; 3];
        for d in 0..3 {
            let t = (x[d] - self.origin[d]) / h[d];
            let last = (self.n[d] - 1) as f64;
            if !(t > -1.0 && t < last + 1.0) {
                return C64::new(0.0, 0.0);
            }
            let f = t.floor();
            base[d] = f as isize - 1;
            let s = t - f;
            let (s2, s3) = (s * s, s * s * s);
            w[d] = [
                0.5 * (-s3 + 2.0 * s2 - s),
                0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
                0.5 * (-3.0 * s3 + 4.0 * s2 + s),
                0.5 * (s3 - s2),
            ];
        }
        let st = self.strides();
        let n = self.n.map(|k| k as isize);
        let mut acc = C64::new(0.0, 0.0);
        for c in 0..4 {
            let k = base[2] + c as isize;
            if k < 0 || k >= n[2] {
                continue;
            }
            for b in 0..4 {
                let j = base[1] + b as isize;
                if j < 0 || j >= n[1] {
                    continue;
                }
                let wyz = w[1][b] * w[2][c];
                let row = k as usize * st[2] + j as usize * st[1];
                let mut s = C64::new(0.0, 0.0);
                for a in 0..4 {
                    let i = base[0] + a as isize;
                    if i >= 0 && i < n[0] {
                        s += values[row + i as usize] * w[0][a];
                    }
                }
                acc += s * wyz;
            }
        }
        acc
    }
}
