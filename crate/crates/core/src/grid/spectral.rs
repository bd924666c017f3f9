//! FFT and sine-transform kernels on grid-shaped arrays, and the fast
//! Dirichlet Poisson solver built on them.

use super::{Grid, C64};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Applies a line transform to every line of a 3-D x-fastest array along `axis`.
fn for_each_line(data: &mut [C64], n: [usize; 3], axis: usize, mut f: impl FnMut(&mut [C64])) {
    let stride = [1, n[0], n[0] * n[1]][axis];
    let len = n[axis];
    let mut line = vec![C64::new(0.0, 0.0); len];
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let strides = [1, n[0], n[0] * n[1]];
    for q in 0..n[b] {
        for p in 0..n[a] {
            let base = p * strides[a] + q * strides[b];
            for t in 0..len {
                line[t] = data[base + t * stride];
            }
            f(&mut line);
            for t in 0..len {
                data[base + t * stride] = line[t];
            }
        }
    }
}

/// Unnormalized 3-D DFT in both directions.
pub struct Fft3 {
    n: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(n: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = n.map(|k| planner.plan_fft_forward(k));
        let inv = n.map(|k| planner.plan_fft_inverse(k));
        Fft3 { n, fwd, inv }
    }

    fn run(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        for (axis, plan) in plans.iter().enumerate() {
            let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for_each_line(data, self.n, axis, |line| plan.process_with_scratch(line, &mut scratch));
        }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// DST-I of length `m`: `y_k = sum_j x_j sin(pi j k / (m+1))`, `j,k = 1..m`.
pub struct Dst1 {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dst1 { m, fft: planner.plan_fft_forward(2 * (m + 1)) }
    }

    pub fn apply(&self, x: &mut [C64], buf: &mut Vec<C64>, scratch: &mut Vec<C64>) {
        let m = self.m;
        let len = 2 * (m + 1);
        buf.clear();
        buf.resize(len, C64::new(0.0, 0.0));
        for j in 0..m {
            buf[j + 1] = x[j];
            buf[len - 1 - j] = -x[j];
        }
        scratch.resize(self.fft.get_inplace_scratch_len(), C64::new(0.0, 0.0));
        self.fft.process_with_scratch(buf, scratch);
        let half_i = C64::new(0.0, 0.5);
        for k in 0..m {
            x[k] = buf[k + 1] * half_i;
        }
    }
}

/// 3-D DST-I over interior-shaped arrays (dimensions `n - 2`).
pub struct Dst3 {
    m: [usize; 3],
    lines: [Dst1; 3],
}

impl Dst3 {
    pub fn new(m: [usize; 3]) -> Self {
        Dst3 { m, lines: m.map(Dst1::new) }
    }

    pub fn apply(&self, data: &mut [C64]) {
        let mut buf = Vec::new();
        let mut scratch = Vec::new();
        for axis in 0..3 {
            let t = &self.lines[axis];
            for_each_line(data, self.m, axis, |line| t.apply(line, &mut buf, &mut scratch));
        }
    }

    /// Factor turning `apply` into its own inverse.
    pub fn inverse_scale(&self) -> f64 {
        self.m.iter().map(|&k| 2.0 / (k + 1) as f64).product()
    }
}

/// Solver for `(sigma - c * Lap_h) u = f` with zero Dirichlet values, where
/// `Lap_h` is the 7-point Laplacian. Arrays are full-grid shaped; boundary
/// entries of the input are ignored and of the output are zero.
pub struct PoissonSolver {
    grid: Grid,
    dst: Dst3,
    lambda: [Vec<f64>; 3],
}

impl PoissonSolver {
    pub fn new(grid: Grid) -> Self {
        let m = grid.n.map(|k| k - 2);
        let h = grid.spacing();
        let lambda = [0, 1, 2].map(|d| {
            (1..=m[d])
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / (2.0 * (m[d] + 1) as f64)).sin();
                    4.0 * s * s / (h[d] * h[d])
                })
                .collect::<Vec<_>>()
        });
        PoissonSolver { grid, dst: Dst3::new(m), lambda }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalue of `-Lap_h` for interior mode `(k0, k1, k2)` (zero-based).
    #[inline]
    pub fn eigenvalue(&self, k: [usize; 3]) -> f64 {
        self.lambda[0][k[0]] + self.lambda[1][k[1]] + self.lambda[2][k[2]]
    }

    pub fn gather(&self, full: &[C64]) -> Vec<C64> {
        let n = self.grid.n;
        let mut out = Vec::with_capacity((n[0] - 2) * (n[1] - 2) * (n[2] - 2));
        for k in 1..n[2] - 1 {
            for j in 1..n[1] - 1 {
                for i in 1..n[0] - 1 {
                    out.push(full[self.grid.index(i, j, k)]);
                }
            }
        }
        out
    }

    pub fn scatter(&self, interior: &[C64], full: &mut [C64]) {
        let n = self.grid.n;
        full.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let mut t = 0;
        for k in 1..n[2] - 1 {
            for j in 1..n[1] - 1 {
                for i in 1..n[0] - 1 {
                    full[self.grid.index(i, j, k)] = interior[t];
                    t += 1;
                }
            }
        }
    }

    /// Spectral multiplier application on interior data.
    fn apply_multiplier(&self, interior: &mut [C64], f: impl Fn(f64) -> f64) {
        self.dst.apply(interior);
        let m = self.grid.n.map(|k| k - 2);
        let scale = self.dst.inverse_scale();
        let mut t = 0;
        for k in 0..m[2] {
            for j in 0..m[1] {
                for i in 0..m[0] {
                    interior[t] *= f(self.eigenvalue([i, j, k])) * scale;
                    t += 1;
                }
            }
        }
        self.dst.apply(interior);
    }

    pub fn solve(&self, rhs: &[C64], sigma: f64, c: f64) -> Vec<C64> {
        let mut x = self.gather(rhs);
        self.apply_multiplier(&mut x, |lam| 1.0 / (sigma + c * lam));
        let mut out = vec![C64::new(0.0, 0.0); rhs.len()];
        self.scatter(&x, &mut out);
        out
    }

    /// `sum_k w(lambda_k) |f_k|^2` with orthonormal sine coefficients `f_k`
    /// of the interior values.
    pub fn spectral_energy(&self, full: &[C64], w: impl Fn(f64) -> f64) -> f64 {
        let mut x = self.gather(full);
        self.dst.apply(&mut x);
        let m = self.grid.n.map(|k| k - 2);
        let scale = self.dst.inverse_scale();
        let mut acc = 0.0;
        let mut t = 0;
        for k in 0..m[2] {
            for j in 0..m[1] {
                for i in 0..m[0] {
                    acc += w(self.eigenvalue([i, j, k])) * x[t].norm_sqr();
                    t += 1;
                }
            }
        }
        acc * scale
    }
}

/// Apply the 7-point Laplacian at interior nodes (boundary output zero).
pub fn laplacian7(grid: &Grid, u: &[C64]) -> Vec<C64> {
    let h = grid.spacing();
    let st = grid.strides();
    let mut out = vec![C64::new(0.0, 0.0); u.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        if grid.is_boundary(idx) {
            continue;
        }
        let mut acc = C64::new(0.0, 0.0);
        for d in 0..3 {
            acc += (u[idx + st[d]] - 2.0 * u[idx] + u[idx - st[d]]) / (h[d] * h[d]);
        }
        *o = acc;
    }
    out
}
