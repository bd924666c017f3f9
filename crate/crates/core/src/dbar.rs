//! Frames and the `zeta` algebra, the Cauchy transform inverting
//! `zeta0 . grad`, transport phases and their convergence rates.

use crate::error::{Error, Result};
use crate::grid::{directional_derivative, fd_gradient, ScalarField, VectorField, C64};
use crate::potentials::mollify_vector;
use crate::quad::{gauss_legendre, loglog_slope};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type CVec3 = [C64; 3];

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    a.map(|v| v / n)
}

/// Bilinear dot product of complex 3-vectors.
pub fn cdot(a: CVec3, b: CVec3) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cconj(a: CVec3) -> CVec3 {
    a.map(|v| v.conj())
}

pub fn cnorm(a: CVec3) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal pair `(mu1, mu2)` perpendicular to `xi`, with `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub xi: [f64; 3],
    pub mu1: [f64; 3],
    pub mu2: [f64; 3],
    pub h: f64,
}

/// `zeta1, zeta2` and their `h -> 0` limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaPair {
    pub zeta1: CVec3,
    pub zeta2: CVec3,
    pub zeta0_1: CVec3,
    pub zeta0_2: CVec3,
}

/// Deterministic frame: `mu1 = normalize(e_m x xi)` with `e_m` the basis
/// vector least aligned with `xi` (lowest index on ties), `mu2 = xi^ x mu1`.
pub fn build_frame(xi: [f64; 3], h: f64) -> Result<Frame> {
    let n = dot(xi, xi).sqrt();
    if n == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h}")));
    }
    if h * n >= 2.0 {
        return Err(Error::FrameRadicalNegative(h * n));
    }
    let xh = xi.map(|v| v / n);
    let mut m = 0;
    for d in 1..3 {
        if xh[d].abs() < xh[m].abs() {
            m = d;
        }
    }
    let mut e = [0.0; 3];
    e[m] = 1.0;
    let mu1 = normalize(cross(e, xi));
    let mu2 = cross(xh, mu1);
    Ok(Frame { xi, mu1, mu2, h })
}

impl Frame {
    /// Frame from explicit vectors; checks orthonormality to `1e-12`.
    pub fn with_vectors(xi: [f64; 3], mu1: [f64; 3], mu2: [f64; 3], h: f64) -> Result<Frame> {
        let xn = dot(xi, xi).sqrt();
        if xn == 0.0 {
            return Err(Error::ZeroFrequency);
        }
        if h * xn >= 2.0 {
            return Err(Error::FrameRadicalNegative(h * xn));
        }
        let ok = (dot(mu1, mu1) - 1.0).abs() < 1e-12
            && (dot(mu2, mu2) - 1.0).abs() < 1e-12
            && dot(mu1, mu2).abs() < 1e-12
            && dot(mu1, xi).abs() < 1e-12 * xn
            && dot(mu2, xi).abs() < 1e-12 * xn;
        if !ok {
            return Err(Error::InvalidArgument("frame vectors not orthonormal to xi".into()));
        }
        Ok(Frame { xi, mu1, mu2, h })
    }

    /// The frame `(mu1, -mu2)`, the second probe direction at the same `xi`.
    pub fn reflected(&self) -> Frame {
        Frame { mu2: self.mu2.map(|v| -v), ..*self }
    }

    /// `sqrt(1 - h^2 |xi|^2 / 4)`.
    pub fn radical(&self) -> f64 {
        (1.0 - self.h * self.h * dot(self.xi, self.xi) / 4.0).sqrt()
    }

    pub fn zetas(&self) -> ZetaPair {
        make_zetas(self)
    }
}

pub fn make_zetas(frame: &Frame) -> ZetaPair {
    let s = frame.radical();
    let h = frame.h;
    let mut z1 = [C64::new(0.0, 0.0); 3];
    let mut z2 = [C64::new(0.0, 0.0); 3];
    let mut z01 = [C64::new(0.0, 0.0); 3];
    let mut z02 = [C64::new(0.0, 0.0); 3];
    for d in 0..3 {
        let half = h * frame.xi[d] / 2.0;
        z1[d] = C64::new(frame.mu1[d], half + s * frame.mu2[d]);
        z2[d] = C64::new(-frame.mu1[d], -half + s * frame.mu2[d]);
        z01[d] = C64::new(frame.mu1[d], frame.mu2[d]);
        z02[d] = C64::new(-frame.mu1[d], frame.mu2[d]);
    }
    ZetaPair { zeta1: z1, zeta2: z2, zeta0_1: z01, zeta0_2: z02 }
}

/// Polar quadrature counts for the Cauchy transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyQuadrature {
    pub n_r: usize,
    pub n_phi: usize,
}

impl Default for CauchyQuadrature {
    fn default() -> Self {
        CauchyQuadrature { n_r: 64, n_phi: 64 }
    }
}

/// Ball containing every node where `|f| > 1e-14 max|f|`, enlarged by two
/// spacings to cover the cubic interpolation footprint.
fn support_ball(f: &ScalarField) -> Option<([f64; 3], f64)> {
    let g = f.grid;
    let max = f.sup_norm();
    if max == 0.0 {
        return None;
    }
    let tol = 1e-14 * max;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for i in 0..g.len() {
        if f.values[i].norm() > tol {
            let x = g.node(i);
            for d in 0..3 {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
    }
    let c = [0, 1, 2].map(|d| 0.5 * (lo[d] + hi[d]));
    let mut r2: f64 = 0.0;
    for i in 0..g.len() {
        if f.values[i].norm() > tol {
            let x = g.node(i);
            r2 = r2.max((0..3).map(|d| (x[d] - c[d]).powi(2)).sum());
        }
    }
    let h = g.spacing().iter().cloned().fold(0.0, f64::max);
    Some((c, r2.sqrt() + 2.0 * h))
}

fn check_frame_type(zeta0: CVec3) -> Result<([f64; 3], [f64; 3])> {
    let e1 = zeta0.map(|z| z.re);
    let e2 = zeta0.map(|z| z.im);
    let ok = (dot(e1, e1) - 1.0).abs() < 1e-10 && (dot(e2, e2) - 1.0).abs() < 1e-10 && dot(e1, e2).abs() < 1e-10;
    if !ok {
        return Err(Error::InvalidArgument("zeta0 must have orthonormal real and imaginary parts".into()));
    }
    Ok((e1, e2))
}

/// `(1/2pi) int f(x - y1 Re zeta0 - y2 Im zeta0) / (y1 + i y2) dy` at every node,
/// by polar quadrature about the singular point.
pub fn cauchy_transform(f: &ScalarField, zeta0: CVec3, q: CauchyQuadrature) -> Result<ScalarField> {
    crate::grid::check_compact_support(f)?;
    let (e1, e2) = check_frame_type(zeta0)?;
    let g = f.grid;
    let Some((c, rs)) = support_ball(f) else {
        return Ok(ScalarField::zeros(g));
    };
    let nrm = cross(e1, e2);
    let (gx, gw) = gauss_legendre(q.n_r);
    let (px, pw) = gauss_legendre(q.n_phi);
    let trap: Vec<(f64, f64)> = (0..q.n_phi)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / q.n_phi as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    let values: Vec<C64> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let x = g.node(idx);
            let cx = [c[0] - x[0], c[1] - x[1], c[2] - x[2]];
            let dn = dot(cx, nrm);
            if dn.abs() >= rs {
                return C64::new(0.0, 0.0);
            }
            let rho2 = rs * rs - dn * dn;
            let p = [dot(cx, e1), dot(cx, e2)];
            let p2 = p[0] * p[0] + p[1] * p[1];
            // Radial integral along the ray x - r(cos e1 + sin e2) over [r0, r1].
            let ray = |cs: f64, sn: f64, r0: f64, r1: f64| -> C64 {
                if r1 <= r0 {
                    return C64::new(0.0, 0.0);
                }
                let (mid, half) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
                let dir = [cs * e1[0] + sn * e2[0], cs * e1[1] + sn * e2[1], cs * e1[2] + sn * e2[2]];
                let mut acc = C64::new(0.0, 0.0);
                for (t, w) in gx.iter().zip(&gw) {
                    let r = mid + half * t;
                    let y = [x[0] - r * dir[0], x[1] - r * dir[1], x[2] - r * dir[2]];
                    acc += g.interpolate_cubic(&f.values, y) * *w;
                }
                acc * half * C64::new(cs, -sn)
            };
            let mut total = C64::new(0.0, 0.0);
            let integral = if p2 < rho2 {
                for &(cs, sn) in &trap {
                    let b = cs * p[0] + sn * p[1];
                    let disc = b * b - p2 + rho2;
                    total += ray(cs, sn, 0.0, -b + disc.max(0.0).sqrt());
                }
                total * (2.0 * PI / q.n_phi as f64)
            } else {
                let alpha = (rho2.sqrt() / p2.sqrt()).min(1.0).asin();
                let phi_p = p[1].atan2(p[0]);
                let (mid, half) = (phi_p - PI, alpha);
                for (t, w) in px.iter().zip(&pw) {
                    let phi = mid + half * t;
                    let (sn, cs) = phi.sin_cos();
                    let b = cs * p[0] + sn * p[1];
                    let disc = b * b - p2 + rho2;
                    if disc <= 0.0 {
                        continue;
                    }
                    let sq = disc.sqrt();
                    total += ray(cs, sn, (-b - sq).max(0.0), -b + sq) * *w;
                }
                total * half
            };
            integral / (2.0 * PI)
        })
        .collect();
    Ok(ScalarField { grid: g, values })
}

/// `Phi = N^{-1}(-i zeta0 . A)`, solving `zeta0 . grad Phi + i zeta0 . A = 0`.
pub fn transport_phase(a: &VectorField, zeta0: CVec3, q: CauchyQuadrature) -> Result<ScalarField> {
    let src = a.dot_const(zeta0).scale(C64::new(0.0, -1.0));
    cauchy_transform(&src, zeta0, q)
}

/// `e^{Phi}` nodewise.
pub fn amplitude(phase: &ScalarField) -> ScalarField {
    phase.map(|z| z.exp())
}

/// `sup|zeta0 . grad Phi + i zeta0 . A| / sup|zeta0 . A|` over nodes at
/// least two away from the faces.
pub fn transport_residual(phase: &ScalarField, a: &VectorField, zeta0: CVec3) -> Result<f64> {
    let d = directional_derivative(phase, zeta0)?;
    let za = a.dot_const(zeta0);
    let g = phase.grid;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..g.len() {
        if g.boundary_distance(i) < 2 {
            continue;
        }
        num = num.max((d.values[i] + C64::new(0.0, 1.0) * za.values[i]).norm());
        den = den.max(za.values[i].norm());
    }
    Ok(if den == 0.0 { num } else { num / den })
}

/// Relative residual of `zeta0 . grad a + i zeta0 . A a = 0`.
pub fn amplitude_residual(amp: &ScalarField, a: &VectorField, zeta0: CVec3) -> Result<f64> {
    let d = directional_derivative(amp, zeta0)?;
    let za = a.dot_const(zeta0);
    let g = amp.grid;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..g.len() {
        if g.boundary_distance(i) < 2 {
            continue;
        }
        num = num.max((d.values[i] + C64::new(0.0, 1.0) * za.values[i] * amp.values[i]).norm());
        den = den.max((za.values[i] * amp.values[i]).norm());
    }
    Ok(if den == 0.0 { num } else { num / den })
}

/// `theta(h) = theta0 * h^{-kappa}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRule {
    pub theta0: f64,
    pub kappa: f64,
}

impl ThetaRule {
    /// `theta0 h^{-1/2}`, used for the CGO and curl studies.
    pub fn half(theta0: f64) -> Self {
        ThetaRule { theta0, kappa: 0.5 }
    }

    /// `theta0 h^{-1}`, used for the electric studies.
    pub fn full(theta0: f64) -> Self {
        ThetaRule { theta0, kappa: 1.0 }
    }

    pub fn theta(&self, h: f64) -> f64 {
        self.theta0 * h.powf(-self.kappa)
    }
}

/// Ball and unit direction for a localized derivative sup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientProbe {
    pub center: [f64; 3],
    pub radius: f64,
    pub direction: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseRateRow {
    pub h: f64,
    pub theta: f64,
    pub phase_error_sup: f64,
    pub grad_phase_sup: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseRateReport {
    pub gamma: f64,
    pub rows: Vec<PhaseRateRow>,
    /// `None` when every error vanishes identically.
    pub error_slope: Option<f64>,
    pub grad_slope: Option<f64>,
    pub exact: bool,
}

/// `sup|Phi#(theta(h)) - Phi|` and `sup|grad Phi#|` over an `h` sweep. The
/// unmollified phase is computed once with the `oracle` quadrature. With a
/// `probe` the gradient sup is replaced by the sup of one directional
/// derivative inside a ball, isolating the growth across a crease.
#[allow(clippy::too_many_arguments)]
pub fn phase_convergence(
    a: &VectorField,
    gamma: f64,
    zeta0: CVec3,
    rule: ThetaRule,
    hs: &[f64],
    q: CauchyQuadrature,
    oracle: CauchyQuadrature,
    probe: Option<GradientProbe>,
) -> Result<PhaseRateReport> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("0 < γ ≤ 1 violated (γ = {gamma})")));
    }
    let phi = transport_phase(a, zeta0, oracle)?;
    let mut rows = Vec::new();
    for &h in hs {
        let theta = rule.theta(h);
        let sharp = mollify_vector(a, theta)?;
        let ph = transport_phase(&sharp, zeta0, q)?;
        let grad = fd_gradient(&ph)?;
        let g = a.grid;
        let grad_phase_sup = match probe {
            None => grad.sup_norm(),
            Some(pr) => (0..g.len())
                .filter(|&i| {
                    let x = g.node(i);
                    (0..3).map(|d| (x[d] - pr.center[d]).powi(2)).sum::<f64>() <= pr.radius * pr.radius
                })
                .map(|i| (0..3).map(|d| grad.comps[d][i] * pr.direction[d]).sum::<C64>().norm())
                .fold(0.0, f64::max),
        };
        rows.push(PhaseRateRow { h, theta, phase_error_sup: ph.sub(&phi).sup_norm(), grad_phase_sup });
    }
    let exact = rows.iter().all(|r| r.phase_error_sup == 0.0 && r.grad_phase_sup == 0.0);
    let hv: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let fit = |ys: Vec<f64>| -> Option<f64> {
        if ys.iter().any(|&y| y <= 0.0) {
            None
        } else {
            Some(loglog_slope(&hv, &ys).0)
        }
    };
    let error_slope = fit(rows.iter().map(|r| r.phase_error_sup).collect());
    let grad_slope = fit(rows.iter().map(|r| r.grad_phase_sup).collect());
    Ok(PhaseRateReport { gamma, rows, error_slope, grad_slope, exact })
}

#[cfg(test)]
mod tests;
