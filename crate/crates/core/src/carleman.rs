//! Numerical probe of the semiclassical Carleman estimate
//! `h ||u||_{H^1_scl} <= C ||e^{phi/h} h^2 L (e^{-phi/h} u)||_{H^-1_scl}`
//! for linear and convexified weights.
//!
//! `L` is the forward operator, `-Lap` plus first and zeroth order terms.
//! The conjugation is folded into the edge coefficients as `e^{(phi_i - phi_j)/h}`,
//! so `e^{+-phi/h}` never appears on its own.

use crate::error::{Error, Result};
use crate::forward::{Conjugation, DiscreteOperator, Parts};
use crate::grid::{check_compact_support, l2_norm, scl_norm_h1, scl_norm_hminus1, Grid, PoissonSolver, ScalarField, VectorField, C64};
use crate::potentials::BumpSpec;
use crate::quad::loglog_slope;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest admissible `|phi_i - phi_j| / h` across one edge.
pub const EDGE_EXPONENT_LIMIT: f64 = 60.0;

/// `phi(x) = alpha . x`, optionally convexified to `phi + h phi^2 / (2 eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub alpha: [f64; 3],
    pub eps: f64,
    pub h: f64,
    pub convexified: bool,
}

impl WeightSpec {
    /// Convexified weight with the ordering `h <= eps/4`, `eps <= 1/4` enforced.
    pub fn new(alpha: [f64; 3], eps: f64, h: f64) -> Result<Self> {
        let w = Self::relaxed(alpha, eps, h)?;
        if !w.in_regime() {
            return Err(Error::InvalidArgument(format!("h = {h} exceeds eps/4 = {}", eps / 4.0)));
        }
        Ok(w)
    }

    /// Like [`WeightSpec::new`] but without the `h <= eps/4` ordering, for
    /// sweeps that leave the asymptotic regime on purpose.
    pub fn relaxed(alpha: [f64; 3], eps: f64, h: f64) -> Result<Self> {
        let norm = (alpha[0] * alpha[0] + alpha[1] * alpha[1] + alpha[2] * alpha[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("|alpha| = {norm}")));
        }
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(Error::InvalidArgument(format!("eps = {eps} outside (0, 1/4]")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("h = {h}")));
        }
        Ok(WeightSpec { alpha, eps, h, convexified: true })
    }

    pub fn in_regime(&self) -> bool {
        self.h <= self.eps / 4.0
    }

    /// The same weight without convexification.
    pub fn plain(self) -> Self {
        WeightSpec { convexified: false, ..self }
    }

    pub fn phi(&self, x: [f64; 3]) -> f64 {
        let p = self.alpha[0] * x[0] + self.alpha[1] * x[1] + self.alpha[2] * x[2];
        if self.convexified {
            p + self.h / (2.0 * self.eps) * p * p
        } else {
            p
        }
    }

    fn conjugation(&self, grid: &Grid) -> Result<Conjugation> {
        let phi: Vec<f64> = (0..grid.len()).map(|i| self.phi(grid.node(i))).collect();
        let st = grid.strides();
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            let ijk = grid.unindex(i);
            for d in 0..3 {
                if ijk[d] + 1 < grid.n[d] {
                    worst = worst.max((phi[i + st[d]] - phi[i]).abs() / self.h);
                }
            }
        }
        if !(worst <= EDGE_EXPONENT_LIMIT) {
            return Err(Error::OverflowGuard(worst));
        }
        Conjugation::carleman(grid, &phi, self.h)
    }
}

fn conjugated_parts(op: &DiscreteOperator, w: &WeightSpec, u: &ScalarField, parts: Parts) -> Result<ScalarField> {
    op.grid.same_as(&u.grid)?;
    check_compact_support(u)?;
    let conj = w.conjugation(&op.grid)?;
    Ok(ScalarField { grid: op.grid, values: op.apply_parts(&u.values, Some(&conj), parts) })
}

/// `e^{phi/h} h^2 L (e^{-phi/h} u)` at every node.
pub fn conjugate_apply(op: &DiscreteOperator, w: &WeightSpec, u: &ScalarField) -> Result<ScalarField> {
    conjugated_parts(op, w, u, Parts::ALL)
}

/// `||P u||_{H^-1_scl} / (h ||u||_{H^1_scl})` with the Fourier proxy for the
/// dual norm.
pub fn carleman_ratio(op: &DiscreteOperator, w: &WeightSpec, u: &ScalarField) -> Result<f64> {
    Ok(ratio_pair(op, w, u, None)?.0)
}

/// The proxy ratio and the same ratio with the dual norm taken against
/// `H^1_0` of the box (the supremum of the duality pairing).
pub fn carleman_ratio_pair(op: &DiscreteOperator, w: &WeightSpec, u: &ScalarField) -> Result<(f64, f64)> {
    let ps = PoissonSolver::new(op.grid);
    ratio_pair(op, w, u, Some(&ps))
}

fn ratio_pair(op: &DiscreteOperator, w: &WeightSpec, u: &ScalarField, ps: Option<&PoissonSolver>) -> Result<(f64, f64)> {
    if u.sup_norm() == 0.0 {
        return Err(Error::ZeroTestFunction);
    }
    let pu = conjugate_apply(op, w, u)?;
    let den = w.h * scl_norm_h1(u, w.h)?;
    let proxy = scl_norm_hminus1(&pu, w.h)? / den;
    let dual = match ps {
        Some(ps) => crate::grid::dirichlet_dual_norm(ps, &pu.values, w.h) / den,
        None => f64::NAN,
    };
    Ok((proxy, dual))
}

/// `H^-1_scl` norms of the pieces of the conjugated operator that come from
/// the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTerms {
    pub h: f64,
    /// First-order `A` terms.
    pub a_term: f64,
    /// `F` terms.
    pub f_term: f64,
    /// `h^2 (A.A + p) u` in `L^2`.
    pub p_term: f64,
    /// The same term in `H^-1_scl`.
    pub p_term_hm1: f64,
}

pub fn perturbation_bounds(op: &DiscreteOperator, w: &WeightSpec, u: &ScalarField) -> Result<PerturbationTerms> {
    let norm = |parts: Parts| -> Result<f64> { scl_norm_hminus1(&conjugated_parts(op, w, u, parts)?, w.h) };
    let mass = conjugated_parts(op, w, u, Parts { mass: true, ..Parts::NONE })?;
    Ok(PerturbationTerms {
        h: w.h,
        a_term: norm(Parts { alpha: true, ..Parts::NONE })?,
        f_term: norm(Parts { beta: true, ..Parts::NONE })?,
        p_term: l2_norm(&mass),
        p_term_hm1: scl_norm_hminus1(&mass, w.h)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSlopes {
    pub a: f64,
    pub f: f64,
    pub p: f64,
    pub p_hm1: f64,
}

/// Log-log slopes of the perturbation terms against `h`.
pub fn perturbation_slopes(terms: &[PerturbationTerms]) -> TermSlopes {
    let hs: Vec<f64> = terms.iter().map(|t| t.h).collect();
    let fit = |g: fn(&PerturbationTerms) -> f64| loglog_slope(&hs, &terms.iter().map(g).collect::<Vec<_>>()).0;
    TermSlopes { a: fit(|t| t.a_term), f: fit(|t| t.f_term), p: fit(|t| t.p_term), p_hm1: fit(|t| t.p_term_hm1) }
}

/// Seeded semiclassical test function: a bump of random centre and radius
/// times a random complex quadratic times the plane wave `e^{i eta.x/h}`,
/// with a random `|eta| <= 1.2`. The same seed gives the same envelope and
/// `eta` at every `h`, so sweeps follow one packet.
pub fn test_function(grid: &Grid, seed: u64, h: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = grid.center();
    let side = grid.extent.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = [0, 1, 2].map(|d| c[d] + side * rng.gen_range(-0.08..0.08));
    let radius = side * rng.gen_range(0.22..0.32);
    let bump = BumpSpec { center, radius, amplitude: 1.0 };
    let mut coef = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let c0 = coef() + C64::new(1.5, 0.0);
    let lin = [coef(), coef(), coef()];
    let quad = [coef(), coef(), coef()];
    let dir = loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r > 0.1 && r <= 1.0 {
            break v.map(|t| t / r);
        }
    };
    let eta = dir.map(|t| t * rng.gen_range(0.0..1.2));
    let scale = 1.0 / radius;
    ScalarField::from_fn(*grid, |x| {
        let y = [0, 1, 2].map(|d| (x[d] - center[d]) * scale);
        let poly = c0 + (0..3).map(|d| lin[d] * y[d] + quad[d] * y[d] * y[(d + 1) % 3]).sum::<C64>();
        let wave = C64::new(0.0, (0..3).map(|d| eta[d] * (x[d] - center[d])).sum::<f64>() / h).exp();
        poly * wave * bump.eval(x)
    })
}

/// Bump coefficients with sup norms at most one.
pub fn default_perturbation(grid: Grid) -> Result<DiscreteOperator> {
    let c = grid.center();
    let side = grid.extent.iter().cloned().fold(f64::INFINITY, f64::min);
    let b = BumpSpec { center: c, radius: 0.45 * side, amplitude: 1.0 };
    let a = VectorField::from_real_fn(grid, |x| [0.6, -0.4, 0.3].map(|s| s * b.eval(x)));
    let f = VectorField::from_real_fn(grid, |x| {
        let t = (x[0] - c[0]) / side;
        [0.5 + t, 0.2, -0.4].map(|s| s * b.eval(x))
    });
    let p = ScalarField::from_real_fn(grid, |x| 0.8 * b.eval(x));
    DiscreteOperator::magnetic(a, f, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Points per axis of the unit-cube grid.
    pub n: usize,
    pub alpha: [f64; 3],
    pub eps: f64,
    pub hs: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { n: 41, alpha: [1.0, 0.0, 0.0], eps: 0.25, hs: vec![0.4, 0.2, 0.1], samples: 200, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub h: f64,
    pub eps: f64,
    pub seed: u64,
    /// Ratio for the perturbed operator.
    pub ratio: f64,
    pub a_term_norm: f64,
    pub f_term_norm: f64,
    pub p_term_norm: f64,
    pub p_term_hm1: f64,
    pub free_ratio: f64,
    /// Free ratio with the `H^1_0` dual norm.
    pub free_dual_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub options: ProbeOptions,
    /// Whether every `h` satisfied `h <= eps/4`.
    pub in_regime: bool,
    pub rows: Vec<ProbeRow>,
    /// Per `h`: minimum over the sample.
    pub free_min: Vec<f64>,
    pub free_dual_min: Vec<f64>,
    pub perturbed_min: Vec<f64>,
    /// `max / min` of `free_min` across `h`.
    pub free_spread: f64,
    /// Largest `free_min / perturbed_min` across `h`.
    pub degradation: f64,
    /// Per-sample slopes; the report keeps the smallest.
    pub min_slopes: TermSlopes,
}

/// Sweeps the sample over `h` for the free operator and `perturbed`.
/// Samples run in parallel and are reduced in seed order.
pub fn carleman_probe(perturbed: &DiscreteOperator, opts: &ProbeOptions) -> Result<ProbeReport> {
    let grid = Grid::unit(opts.n);
    grid.same_as(&perturbed.grid)?;
    if opts.samples == 0 || opts.hs.len() < 2 {
        return Err(Error::InvalidArgument("need samples and at least two h".into()));
    }
    let free = DiscreteOperator::laplacian(grid);
    let weights: Vec<WeightSpec> = opts.hs.iter().map(|&h| WeightSpec::relaxed(opts.alpha, opts.eps, h)).collect::<Result<_>>()?;
    let ps = PoissonSolver::new(grid);
    let seeds: Vec<u64> = (0..opts.samples as u64).map(|k| opts.seed.wrapping_add(k)).collect();
    let per_seed: Vec<Vec<ProbeRow>> = seeds
        .par_iter()
        .map(|&seed| {
            weights
                .iter()
                .map(|w| {
                    let u = test_function(&grid, seed, w.h);
                    let (free_ratio, free_dual_ratio) = ratio_pair(&free, w, &u, Some(&ps))?;
                    let ratio = carleman_ratio(perturbed, w, &u)?;
                    let t = perturbation_bounds(perturbed, w, &u)?;
                    Ok(ProbeRow {
                        h: w.h,
                        eps: w.eps,
                        seed,
                        ratio,
                        a_term_norm: t.a_term,
                        f_term_norm: t.f_term,
                        p_term_norm: t.p_term,
                        p_term_hm1: t.p_term_hm1,
                        free_ratio,
                        free_dual_ratio,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let nh = weights.len();
    let column_min = |g: fn(&ProbeRow) -> f64| -> Vec<f64> {
        (0..nh).map(|k| per_seed.iter().map(|r| g(&r[k])).fold(f64::INFINITY, f64::min)).collect()
    };
    let free_min = column_min(|r| r.free_ratio);
    let free_dual_min = column_min(|r| r.free_dual_ratio);
    let perturbed_min = column_min(|r| r.ratio);
    let hi = free_min.iter().cloned().fold(0.0, f64::max);
    let lo = free_min.iter().cloned().fold(f64::INFINITY, f64::min);
    let degradation = free_min.iter().zip(&perturbed_min).map(|(f, p)| f / p).fold(0.0, f64::max);
    let mut min_slopes = TermSlopes { a: f64::INFINITY, f: f64::INFINITY, p: f64::INFINITY, p_hm1: f64::INFINITY };
    for rows in &per_seed {
        let terms: Vec<PerturbationTerms> = rows
            .iter()
            .map(|r| PerturbationTerms {
                h: r.h,
                a_term: r.a_term_norm,
                f_term: r.f_term_norm,
                p_term: r.p_term_norm,
                p_term_hm1: r.p_term_hm1,
            })
            .collect();
        let s = perturbation_slopes(&terms);
        min_slopes.a = min_slopes.a.min(s.a);
        min_slopes.f = min_slopes.f.min(s.f);
        min_slopes.p = min_slopes.p.min(s.p);
        min_slopes.p_hm1 = min_slopes.p_hm1.min(s.p_hm1);
    }
    Ok(ProbeReport {
        options: opts.clone(),
        in_regime: weights.iter().all(|w| w.in_regime()),
        rows: per_seed.into_iter().flatten().collect(),
        free_min,
        free_dual_min,
        perturbed_min,
        free_spread: hi / lo,
        degradation,
        min_slopes,
    })
}

pub fn probe_csv(report: &ProbeReport) -> String {
    let mut s =
        String::from("h,eps,seed,ratio,a_term_norm,f_term_norm,p_term_norm,p_term_hm1,free_ratio,free_dual_ratio\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.h,
            r.eps,
            r.seed,
            r.ratio,
            r.a_term_norm,
            r.f_term_norm,
            r.p_term_norm,
            r.p_term_hm1,
            r.free_ratio,
            r.free_dual_ratio
        ));
    }
    s
}

#[cfg(test)]
mod tests;
