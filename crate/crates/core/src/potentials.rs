//! Synthetic coefficients: Hölder fields, mollification, cutoff extension,
//! gauge functions and the convection-to-magnetic reduction.

use crate::error::{Error, Result};
use crate::grid::spectral::Fft3;
use crate::grid::{fd_gradient, Grid, ScalarField, VectorField, C64};
use crate::quad::{loglog_slope, smooth_step, smooth_step_derivative};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn diff3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Mass of `exp(-1/(1-|x|^2))` over the unit ball.
fn bump_mass() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        // Composite Simpson; the integrand is flat to all orders at r = 1.
        let m = 20_000;
        let f = |r: f64| if r >= 1.0 { 0.0 } else { r * r * (-1.0 / (1.0 - r * r)).exp() };
        let h = 1.0 / m as f64;
        let mut s = f(0.0) + f(1.0);
        for k in 1..m {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        4.0 * std::f64::consts::PI * s * h / 3.0
    })
}

/// `Psi_theta(x) = theta^3 Psi(theta x)` with the normalized standard bump `Psi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierKernel {
    pub theta: f64,
}

impl MollifierKernel {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("theta = {theta}")));
        }
        Ok(MollifierKernel { theta })
    }

    /// The unscaled profile `Psi` at radius `r`.
    pub fn profile(r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r * r)).exp() / bump_mass()
        }
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.theta
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.theta.powi(3) * Self::profile(self.theta * norm3(x))
    }
}

/// Cutoff of the Hölder family: 1 for `s <= 1/2`, 0 for `s >= 1`.
fn holder_cutoff(s: f64) -> f64 {
    smooth_step(2.0 * (1.0 - s))
}

fn holder_cutoff_derivative(s: f64) -> f64 {
    -2.0 * smooth_step_derivative(2.0 * (1.0 - s))
}

/// `amplitude * eta(|x - x0| / radius) * d(x)^gamma` with `d = |x - x0|`, or
/// `d = |(x - x0) . normal|` for a crease along a plane when `normal` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub gamma: f64,
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
}

fn one() -> f64 {
    1.0
}

impl HolderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("0 < γ ≤ 1 violated (γ = {})", self.gamma)));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff radius {}", self.radius)));
        }
        if let Some(nv) = self.normal {
            if (norm3(nv) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("crease normal must be a unit vector".into()));
            }
        }
        Ok(())
    }

    /// Distance entering the power and its gradient.
    fn distance(&self, d: [f64; 3]) -> (f64, [f64; 3]) {
        match self.normal {
            None => {
                let r = norm3(d);
                let g = if r == 0.0 { [0.0; 3] } else { d.map(|v| v / r) };
                (r, g)
            }
            Some(nv) => {
                let t = d[0] * nv[0] + d[1] * nv[1] + d[2] * nv[2];
                (t.abs(), nv.map(|v| v * t.signum()))
            }
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let d = diff3(x, self.center);
        let r = norm3(d);
        let (s, _) = self.distance(d);
        self.amplitude * holder_cutoff(r / self.radius) * s.powf(self.gamma)
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let d = diff3(x, self.center);
        let r = norm3(d);
        let (s, ds) = self.distance(d);
        if s == 0.0 || r >= self.radius {
            return [0.0; 3];
        }
        let eta = holder_cutoff(r / self.radius);
        let deta = holder_cutoff_derivative(r / self.radius) / self.radius;
        let sp = s.powf(self.gamma);
        let dsp = self.gamma * s.powf(self.gamma - 1.0);
        [0, 1, 2].map(|k| self.amplitude * (deta * d[k] / r * sp + eta * dsp * ds[k]))
    }
}

pub fn make_holder_scalar(spec: &HolderSpec, grid: &Grid) -> Result<ScalarField> {
    spec.validate()?;
    if !grid.strictly_contains(spec.center) {
        return Err(Error::SingularPointOutsideDomain(format!("{:?}", spec.center)));
    }
    if grid.face_distance(spec.center) < spec.radius {
        return Err(Error::InvalidArgument("cutoff ball leaves the grid box".into()));
    }
    Ok(ScalarField::from_real_fn(*grid, |x| spec.eval(x)))
}

/// Nodes at which `|f|` exceeds `1e-14 max|f|`.
fn support_face_distance(grid: &Grid, values: &[&[C64]]) -> Option<f64> {
    let max = values.iter().flat_map(|v| v.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    let tol = 1e-14 * max;
    let mut dist = f64::INFINITY;
    for i in 0..grid.len() {
        if values.iter().any(|v| v[i].norm() > tol) {
            dist = dist.min(grid.face_distance(grid.node(i)));
        }
    }
    Some(dist)
}

/// Discrete convolution with the sampled kernel, normalized to unit sum.
/// Periodic wrap-around only reaches nodes within the kernel radius of a face.
pub(crate) fn convolve_kernel(values: &[&[C64]], grid: &Grid, theta: f64) -> Vec<Vec<C64>> {
    let k = MollifierKernel { theta };
    let h = grid.spacing();
    let n = grid.n;
    let reach = [0, 1, 2].map(|d| ((k.radius() / h[d]).floor() as usize).min((n[d] - 1) / 2));
    let mut kernel = vec![C64::new(0.0, 0.0); grid.len()];
    let mut total = 0.0;
    let signed = |d: usize, o: isize| -> usize { (o.rem_euclid(n[d] as isize)) as usize };
    for a in -(reach[2] as isize)..=reach[2] as isize {
        for b in -(reach[1] as isize)..=reach[1] as isize {
            for cc in -(reach[0] as isize)..=reach[0] as isize {
                let w = k.eval([cc as f64 * h[0], b as f64 * h[1], a as f64 * h[2]]);
                if w > 0.0 {
                    kernel[grid.index(signed(0, cc), signed(1, b), signed(2, a))] = c(w);
                    total += w;
                }
            }
        }
    }
    if total == 0.0 {
        // Kernel narrower than one cell: the identity.
        kernel[0] = c(1.0);
        total = 1.0;
    }
    kernel.iter_mut().for_each(|v| *v /= total);
    let fft = Fft3::new(n);
    fft.forward(&mut kernel);
    values
        .iter()
        .map(|v| {
            let mut data = v.to_vec();
            fft.forward(&mut data);
            data.iter_mut().zip(&kernel).for_each(|(x, y)| *x *= y);
            fft.inverse(&mut data);
            data
        })
        .collect()
}

fn check_margin(grid: &Grid, values: &[&[C64]], theta: f64) -> Result<()> {
    if let Some(margin) = support_face_distance(grid, values) {
        let radius = 1.0 / theta;
        if margin < radius {
            return Err(Error::SupportMarginTooSmall { margin, radius });
        }
    }
    Ok(())
}

pub fn mollify(f: &ScalarField, theta: f64) -> Result<ScalarField> {
    MollifierKernel::new(theta)?;
    check_margin(&f.grid, &[&f.values], theta)?;
    let mut out = convolve_kernel(&[&f.values], &f.grid, theta);
    Ok(ScalarField { grid: f.grid, values: out.remove(0) })
}

pub fn mollify_vector(f: &VectorField, theta: f64) -> Result<VectorField> {
    MollifierKernel::new(theta)?;
    let refs = [&f.comps[0][..], &f.comps[1][..], &f.comps[2][..]];
    check_margin(&f.grid, &refs, theta)?;
    let mut out = convolve_kernel(&refs, &f.grid, theta);
    let c2 = out.pop().unwrap();
    let c1 = out.pop().unwrap();
    let c0 = out.pop().unwrap();
    Ok(VectorField { grid: f.grid, comps: [c0, c1, c2] })
}

/// Multiply by a cutoff that is 1 on the inner box and vanishes near the
/// outer faces; values outside the inner box come from the nearest inner node.
pub fn extend_by_cutoff(f: &ScalarField, outer: &Grid) -> Result<ScalarField> {
    let inner = f.grid;
    let (hi, ho) = (inner.spacing(), outer.spacing());
    let mut offset = [0usize; 3];
    let mut margin = f64::INFINITY;
    for d in 0..3 {
        let lo = inner.origin[d] - outer.origin[d];
        let hi_gap = outer.origin[d] + outer.extent[d] - inner.origin[d] - inner.extent[d];
        if lo <= 0.0 || hi_gap <= 0.0 {
            return Err(Error::DomainsNotNested(format!("axis {d}")));
        }
        if (hi[d] - ho[d]).abs() > 1e-12 * hi[d] {
            return Err(Error::DomainsNotNested(format!("spacing differs on axis {d}")));
        }
        let t = lo / ho[d];
        if (t - t.round()).abs() > 1e-9 {
            return Err(Error::DomainsNotNested(format!("nodes not coincident on axis {d}")));
        }
        offset[d] = t.round() as usize;
        margin = margin.min(lo).min(hi_gap);
    }
    let width = 0.8 * margin;
    let mut out = ScalarField::zeros(*outer);
    for idx in 0..outer.len() {
        let ijk = outer.unindex(idx);
        let mut src = [0usize; 3];
        let mut dist2 = 0.0;
        for d in 0..3 {
            let t = ijk[d] as isize - offset[d] as isize;
            let clamped = t.clamp(0, inner.n[d] as isize - 1);
            src[d] = clamped as usize;
            dist2 += ((t - clamped) as f64 * ho[d]).powi(2);
        }
        let chi = smooth_step(1.0 - dist2.sqrt() / width);
        out.values[idx] = f.values[inner.index(src[0], src[1], src[2])] * chi;
    }
    Ok(out)
}

/// Magnetic form of a convection field: `A = iV/2`, `F = -V/2`, `p = V.V/4`.
pub fn reduce_convection(v: &VectorField) -> (VectorField, VectorField, ScalarField) {
    let a = v.scale(C64::new(0.0, 0.5));
    let f = v.scale(c(-0.5));
    let p = v.dot(v).scale(c(0.25));
    (a, f, p)
}

/// Smooth compactly supported bump `amplitude * exp(1 - 1/(1 - |x-c|^2/R^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl BumpSpec {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let d = diff3(x, self.center);
        let u = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (self.radius * self.radius);
        if u >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - u)).exp()
        }
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let d = diff3(x, self.center);
        let r2 = self.radius * self.radius;
        let u = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / r2;
        if u >= 1.0 {
            return [0.0; 3];
        }
        let b = self.eval(x);
        d.map(|v| -2.0 * b * v / (r2 * (1.0 - u) * (1.0 - u)))
    }

    pub fn laplacian(&self, x: [f64; 3]) -> f64 {
        let d = diff3(x, self.center);
        let r2 = self.radius * self.radius;
        let u = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / r2;
        if u >= 1.0 {
            return 0.0;
        }
        // b = e^{g(u)}, g' = -1/(1-u)^2, g'' = -2/(1-u)^3, grad u = 2d/R^2.
        let b = self.eval(x);
        let g1 = -1.0 / ((1.0 - u) * (1.0 - u));
        let g2 = -2.0 / ((1.0 - u) * (1.0 - u) * (1.0 - u));
        let grad_u2 = 4.0 * u / r2;
        let lap_u = 6.0 / r2;
        b * ((g1 * g1 + g2) * grad_u2 + g1 * lap_u)
    }
}

/// Real gauge function: a bump strictly inside the grid box.
pub fn make_gauge(grid: &Grid, spec: &BumpSpec) -> Result<ScalarField> {
    let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
    if grid.face_distance(spec.center) < spec.radius + 2.0 * h {
        return Err(Error::InvalidArgument("gauge support must stay two nodes inside the box".into()));
    }
    Ok(ScalarField::from_real_fn(*grid, |x| spec.eval(x)))
}

/// Coefficient recipes accepted in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Recipe {
    /// Bump, scalar or times `direction`.
    Bump {
        #[serde(flatten)]
        bump: BumpSpec,
        #[serde(default)]
        direction: Option<[f64; 3]>,
    },
    /// Hölder cone, scalar or times `direction`.
    Holder {
        #[serde(flatten)]
        holder: HolderSpec,
        #[serde(default)]
        direction: Option<[f64; 3]>,
    },
    /// Gradient of a bump (a pure gauge field).
    GaugeGradient {
        #[serde(flatten)]
        bump: BumpSpec,
    },
    /// `amplitude * (-(x2-c2), x1-c1, 0) * bump(x)/amplitude`, a field with nonzero curl.
    Rotation {
        #[serde(flatten)]
        bump: BumpSpec,
    },
}

impl Recipe {
    pub fn validate(&self) -> Result<()> {
        match self {
            Recipe::Holder { holder, .. } => holder.validate(),
            Recipe::Bump { bump, .. } | Recipe::GaugeGradient { bump } | Recipe::Rotation { bump } => {
                if bump.radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("bump radius {}", bump.radius)))
                }
            }
        }
    }

    pub fn scalar_at(&self, x: [f64; 3]) -> Result<f64> {
        match self {
            Recipe::Bump { bump, direction: None } => Ok(bump.eval(x)),
            Recipe::Holder { holder, direction: None } => Ok(holder.eval(x)),
            _ => Err(Error::InvalidArgument("vector recipe used where a scalar is expected".into())),
        }
    }

    pub fn vector_at(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        match self {
            Recipe::Bump { bump, direction: Some(d) } => Ok(d.map(|v| v * bump.eval(x))),
            Recipe::Holder { holder, direction: Some(d) } => Ok(d.map(|v| v * holder.eval(x))),
            Recipe::GaugeGradient { bump } => Ok(bump.gradient(x)),
            Recipe::Rotation { bump } => {
                let b = bump.eval(x);
                Ok([-(x[1] - bump.center[1]) * b, (x[0] - bump.center[0]) * b, 0.0])
            }
            _ => Err(Error::InvalidArgument("scalar recipe used where a vector is expected".into())),
        }
    }

    /// Radius of a ball containing the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            Recipe::Bump { bump, .. } | Recipe::GaugeGradient { bump } | Recipe::Rotation { bump } => bump.radius,
            Recipe::Holder { holder, .. } => holder.radius,
        }
    }

    pub fn center(&self) -> [f64; 3] {
        match self {
            Recipe::Bump { bump, .. } | Recipe::GaugeGradient { bump } | Recipe::Rotation { bump } => bump.center,
            Recipe::Holder { holder, .. } => holder.center,
        }
    }
}

/// Sample a sum of scalar recipes.
pub fn sample_scalar(recipes: &[Recipe], grid: &Grid) -> Result<ScalarField> {
    let mut out = ScalarField::zeros(*grid);
    for r in recipes {
        r.validate()?;
        for i in 0..grid.len() {
            out.values[i] += c(r.scalar_at(grid.node(i))?);
        }
    }
    Ok(out)
}

/// Sample a sum of vector recipes.
pub fn sample_vector(recipes: &[Recipe], grid: &Grid) -> Result<VectorField> {
    let mut out = VectorField::zeros(*grid);
    for r in recipes {
        r.validate()?;
        for i in 0..grid.len() {
            let v = r.vector_at(grid.node(i))?;
            for d in 0..3 {
                out.comps[d][i] += c(v[d]);
            }
        }
    }
    Ok(out)
}

/// One row of a mollifier rate table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MollifierRateRow {
    pub theta: f64,
    pub err_sup: f64,
    pub grad_sup: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MollifierRateReport {
    pub gamma: f64,
    pub n: usize,
    pub rows: Vec<MollifierRateRow>,
    pub err_slope: f64,
    pub err_slope_ci: f64,
    pub grad_slope: f64,
    pub grad_slope_ci: f64,
}

/// Mollifier rates at the singular point of the Hölder cone.
///
/// For each `theta` the cone is sampled on an `n^3` window centred on the
/// singular point with extent `window / theta`, so the kernel covers the
/// same number of cells at every level. The sup of `|f - f#|` and of
/// `|grad f#|` is taken over nodes at least one kernel radius inside the
/// window, where the discrete convolution sees the full kernel. The cutoff
/// radius must keep the cutoff flat over every window.
pub fn mollifier_rates(spec: &HolderSpec, thetas: &[f64], n: usize, window: f64) -> Result<MollifierRateReport> {
    spec.validate()?;
    if thetas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two theta values".into()));
    }
    let mut rows = Vec::new();
    for &theta in thetas {
        MollifierKernel::new(theta)?;
        let reach = 3f64.sqrt() * window / (2.0 * theta) + 1.0 / theta;
        if reach > spec.radius / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "window reaches {reach:.3}, beyond the flat part of the cutoff ({:.3})",
                spec.radius / 2.0
            )));
        }
        let grid = Grid::centered(spec.center, window / theta, n);
        let f = ScalarField::from_real_fn(grid, |x| spec.eval(x));
        let sharp = ScalarField { grid, values: convolve_kernel(&[&f.values], &grid, theta).remove(0) };
        let grad = fd_gradient(&sharp)?;
        let (mut err_sup, mut grad_sup) = (0.0f64, 0.0f64);
        let inner = 1.0 / theta + 2.0 * grid.spacing()[0];
        for i in 0..grid.len() {
            if grid.face_distance(grid.node(i)) < inner {
                continue;
            }
            err_sup = err_sup.max((f.values[i] - sharp.values[i]).norm());
            let g = grad.at(i);
            grad_sup = grad_sup.max((g[0].norm_sqr() + g[1].norm_sqr() + g[2].norm_sqr()).sqrt());
        }
        rows.push(MollifierRateRow { theta, err_sup, grad_sup });
    }
    let th: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    let (err_slope, err_slope_ci) = loglog_slope(&th, &rows.iter().map(|r| r.err_sup).collect::<Vec<_>>());
    let (grad_slope, grad_slope_ci) = loglog_slope(&th, &rows.iter().map(|r| r.grad_sup).collect::<Vec<_>>());
    Ok(MollifierRateReport { gamma: spec.gamma, n, rows, err_slope, err_slope_ci, grad_slope, grad_slope_ci })
}

#[cfg(test)]
mod tests;
