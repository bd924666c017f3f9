//! Complex geometrical optics solutions `u = e^{x.zeta/h} (a + r)`: the
//! conjugated residual of the amplitude, the remainder solve and h-rates.
//!
//! Exponentials are always taken about the box centre `x_c`, so a solution
//! is stored as `e^{(x - x_c).zeta/h} (a + r)`.

use crate::dbar::{transport_phase, CVec3, CauchyQuadrature, Frame, ThetaRule};
use crate::error::{Error, Result};
use crate::forward::{Conjugation, DiscreteOperator, GmresOptions, Parts};
use crate::grid::{scl_norm_h1, Grid, PoissonSolver, ScalarField, C64};
use crate::potentials::mollify_vector;
use crate::quad::loglog_slope;
use serde::{Deserialize, Serialize};

/// Largest admissible `|Re zeta . (x - x_c)| / h` on the grid.
pub const OVERFLOW_LIMIT: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgoOptions {
    pub rule: ThetaRule,
    pub quadrature: CauchyQuadrature,
    #[serde(skip)]
    pub gmres: GmresOptions,
}

impl Default for CgoOptions {
    fn default() -> Self {
        CgoOptions { rule: ThetaRule::half(8.0), quadrature: CauchyQuadrature::default(), gmres: GmresOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct CgoSolution {
    pub frame: Frame,
    /// 1 for `zeta1`, 2 for `zeta2`.
    pub which: u8,
    pub zeta: CVec3,
    pub zeta0: CVec3,
    pub h: f64,
    pub theta: f64,
    pub center: [f64; 3],
    pub phase: ScalarField,
    pub amplitude: ScalarField,
    pub remainder: ScalarField,
    pub norm_r_h1: f64,
    pub norm_la_hm1: f64,
    pub iterations: usize,
}

impl CgoSolution {
    /// `(x - x_c) . zeta / h` at node `i`.
    pub fn exponent(&self, i: usize) -> C64 {
        let x = self.phase.grid.node(i);
        (0..3).map(|d| self.zeta[d] * (x[d] - self.center[d])).sum::<C64>() / self.h
    }

    /// `a + r`.
    pub fn envelope(&self) -> ScalarField {
        self.amplitude.add(&self.remainder)
    }

    /// `e^{(x - x_c).zeta/h} (a + r)`.
    pub fn u(&self) -> ScalarField {
        let env = self.envelope();
        let values = (0..env.grid.len()).map(|i| self.exponent(i).exp() * env.values[i]).collect();
        ScalarField { grid: env.grid, values }
    }
}

/// `max |Re zeta . (x - x_c)| / h`, rejected above [`OVERFLOW_LIMIT`].
pub fn overflow_guard(grid: &Grid, zeta: CVec3, h: f64, center: [f64; 3]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for corner in 0..8 {
        let x = [0, 1, 2].map(|d| grid.origin[d] + if corner >> d & 1 == 1 { grid.extent[d] } else { 0.0 });
        let re: f64 = (0..3).map(|d| zeta[d].re * (x[d] - center[d])).sum();
        worst = worst.max(re.abs() / h);
    }
    if worst > OVERFLOW_LIMIT {
        return Err(Error::OverflowGuard(worst));
    }
    Ok(worst)
}

/// `-L_zeta a` and its pieces. `laplacian + drift` is the conjugated second
/// order part, `magnetic` the `A`-transport part, `electric` the `F` part and
/// `potential` the `A.A + p` part. Boundary entries are zero.
#[derive(Clone, Debug)]
pub struct ResidualTerms {
    pub total: ScalarField,
    pub laplacian: ScalarField,
    pub drift: ScalarField,
    pub magnetic: ScalarField,
    pub electric: ScalarField,
    pub potential: ScalarField,
}

impl ResidualTerms {
    pub fn sum_of_parts(&self) -> ScalarField {
        self.laplacian.add(&self.drift).add(&self.magnetic).add(&self.electric).add(&self.potential)
    }

    /// `(name, field)` pairs in a fixed order.
    pub fn named(&self) -> [(&'static str, &ScalarField); 5] {
        [
            ("laplacian", &self.laplacian),
            ("drift", &self.drift),
            ("magnetic", &self.magnetic),
            ("electric", &self.electric),
            ("potential", &self.potential),
        ]
    }
}

fn interior_field(grid: Grid, mut v: Vec<C64>, sign: f64) -> ScalarField {
    for (i, x) in v.iter_mut().enumerate() {
        *x = if grid.is_boundary(i) { C64::new(0.0, 0.0) } else { *x * sign };
    }
    ScalarField { grid, values: v }
}

/// `-L_zeta a = -e^{-x.zeta/h} h^2 L (e^{x.zeta/h} a)` with each term assembled separately.
pub fn conjugated_residual(op: &DiscreteOperator, a: &ScalarField, zeta: CVec3, h: f64) -> Result<ResidualTerms> {
    let g = op.grid;
    g.same_as(&a.grid)?;
    let center = g.center();
    overflow_guard(&g, zeta, h, center)?;
    let conj = Conjugation::linear(&g, zeta, h, center)?;
    let only = |p: Parts| -> Vec<C64> { op.apply_parts(&a.values, Some(&conj), p) };
    let grad_c = only(Parts { grad: true, ..Parts::NONE });
    let lap: Vec<C64> =
        op.apply_parts(&a.values, None, Parts { grad: true, ..Parts::NONE }).iter().map(|v| v * h * h).collect();
    let drift: Vec<C64> = grad_c.iter().zip(&lap).map(|(x, y)| x - y).collect();
    let total = interior_field(g, op.apply(&a.values, Some(&conj)), -1.0);
    Ok(ResidualTerms {
        total,
        laplacian: interior_field(g, lap, -1.0),
        drift: interior_field(g, drift, -1.0),
        magnetic: interior_field(g, only(Parts { alpha: true, ..Parts::NONE }), -1.0),
        electric: interior_field(g, only(Parts { beta: true, ..Parts::NONE }), -1.0),
        potential: interior_field(g, only(Parts { mass: true, ..Parts::NONE }), -1.0),
    })
}

/// `||f||_{H^{-1}_scl}` of interior values against `H^1_0`.
pub fn residual_norm(f: &ScalarField, h: f64) -> Result<f64> {
    crate::grid::scl_norm_hminus1_dirichlet(f, h)
}

#[derive(Clone, Debug)]
pub struct RemainderOutcome {
    pub r: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `L_zeta r = rhs` with `r = 0` on the faces.
pub fn solve_remainder(
    op: &DiscreteOperator,
    rhs: &ScalarField,
    zeta: CVec3,
    h: f64,
    opts: GmresOptions,
) -> Result<RemainderOutcome> {
    let g = op.grid;
    let center = g.center();
    overflow_guard(&g, zeta, h, center)?;
    let conj = Conjugation::linear(&g, zeta, h, center)?;
    let out = op.solve(&ScalarField::zeros(g), Some(rhs), Some(&conj), opts)?;
    Ok(RemainderOutcome { r: out.u, iterations: out.iterations, residual: out.residual })
}

/// CGO solution for `op` at the frame's `zeta_which`. For the second solution
/// pass the conjugated operator (see [`DiscreteOperator::conjugate`]).
pub fn build_cgo(op: &DiscreteOperator, frame: &Frame, which: u8, opts: &CgoOptions) -> Result<CgoSolution> {
    let (_, zeta0) = select_zeta(frame, which)?;
    let theta = opts.rule.theta(frame.h);
    let (a_coef, _, _) = op.magnetic_parts();
    let phase = if a_coef.sup_norm() == 0.0 {
        ScalarField::zeros(op.grid)
    } else {
        let sharp = mollify_vector(&a_coef, theta)?;
        transport_phase(&sharp, zeta0, opts.quadrature)?
    };
    build_cgo_with_phase(op, frame, which, phase, theta, opts.gmres)
}

fn select_zeta(frame: &Frame, which: u8) -> Result<(CVec3, CVec3)> {
    let zp = frame.zetas();
    match which {
        1 => Ok((zp.zeta1, zp.zeta0_1)),
        2 => Ok((zp.zeta2, zp.zeta0_2)),
        _ => Err(Error::InvalidArgument(format!("which = {which}"))),
    }
}

/// [`build_cgo`] with a precomputed transport phase.
pub fn build_cgo_with_phase(
    op: &DiscreteOperator,
    frame: &Frame,
    which: u8,
    phase: ScalarField,
    theta: f64,
    gmres: GmresOptions,
) -> Result<CgoSolution> {
    let (zeta, zeta0) = select_zeta(frame, which)?;
    let g = op.grid;
    g.same_as(&phase.grid)?;
    let h = frame.h;
    let center = g.center();
    overflow_guard(&g, zeta, h, center)?;
    let amplitude = phase.map(|z| z.exp());
    let terms = conjugated_residual(op, &amplitude, zeta, h)?;
    let norm_la_hm1 = residual_norm(&terms.total, h)?;
    let rem = solve_remainder(op, &terms.total, zeta, h, gmres)?;
    let norm_r_h1 = scl_norm_h1(&rem.r, h)?;
    Ok(CgoSolution {
        frame: *frame,
        which,
        zeta,
        zeta0,
        h,
        theta,
        center,
        phase,
        amplitude,
        remainder: rem.r,
        norm_r_h1,
        norm_la_hm1,
        iterations: rem.iterations,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateRow {
    pub h: f64,
    pub theta: f64,
    pub norm_r_h1scl: f64,
    pub norm_la_hm1scl: f64,
    /// Slope of `norm_r_h1scl` over the rows so far (`None` for the first).
    pub slope_running: Option<f64>,
    /// `H^{-1}_scl` norms of the residual pieces, same order as [`ResidualTerms::named`].
    pub term_norms: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub remainder_slope: f64,
    pub residual_slope: f64,
}

/// Remainder and residual norms of the first CGO solution over an `h` sweep.
pub fn remainder_rates(op: &DiscreteOperator, xi: [f64; 3], hs: &[f64], opts: &CgoOptions) -> Result<RateReport> {
    let mut rows: Vec<RateRow> = Vec::new();
    for &h in hs {
        let frame = crate::dbar::build_frame(xi, h)?;
        let sol = build_cgo(op, &frame, 1, opts)?;
        let terms = conjugated_residual(op, &sol.amplitude, sol.zeta, h)?;
        let term_norms = terms
            .named()
            .iter()
            .map(|(n, f)| Ok((n.to_string(), residual_norm(f, h)?)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(RateRow {
            h,
            theta: sol.theta,
            norm_r_h1scl: sol.norm_r_h1,
            norm_la_hm1scl: sol.norm_la_hm1,
            slope_running: None,
            term_norms,
        });
        if rows.len() >= 2 {
            let hv: Vec<f64> = rows.iter().map(|r| r.h).collect();
            let rv: Vec<f64> = rows.iter().map(|r| r.norm_r_h1scl).collect();
            rows.last_mut().unwrap().slope_running = Some(loglog_slope(&hv, &rv).0);
        }
    }
    let hv: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let slope = |ys: Vec<f64>| if ys.len() >= 2 && ys.iter().all(|&y| y > 0.0) { loglog_slope(&hv, &ys).0 } else { f64::NAN };
    Ok(RateReport {
        remainder_slope: slope(rows.iter().map(|r| r.norm_r_h1scl).collect()),
        residual_slope: slope(rows.iter().map(|r| r.norm_la_hm1scl).collect()),
        rows,
    })
}

pub fn rate_csv(report: &RateReport) -> String {
    let mut out = String::from("h,theta,norm_r_H1scl,norm_La_Hm1scl,slope_running\n");
    for r in &report.rows {
        let s = r.slope_running.map_or(String::new(), |v| format!("{v:.6}"));
        out.push_str(&format!("{},{},{:.10e},{:.10e},{}\n", r.h, r.theta, r.norm_r_h1scl, r.norm_la_hm1scl, s));
    }
    out
}

/// `|<f, psi>|` against a test field, used for the term-by-term estimates.
pub fn weak_pairing(f: &ScalarField, psi: &ScalarField) -> C64 {
    f.dot(psi)
}

/// The Dirichlet dual norm of several fields sharing one spectral solver.
pub fn residual_norms(fields: &[&ScalarField], h: f64) -> Result<Vec<f64>> {
    let Some(first) = fields.first() else { return Ok(vec![]) };
    let ps = PoissonSolver::new(first.grid);
    Ok(fields.iter().map(|f| crate::grid::dirichlet_dual_norm(&ps, &f.values, h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbar::build_frame;
    use crate::grid::VectorField;
    use crate::potentials::BumpSpec;

    fn quick() -> CgoOptions {
        CgoOptions { quadrature: CauchyQuadrature { n_r: 12, n_phi: 12 }, ..CgoOptions::default() }
    }

    #[test]
    fn free_flat_amplitude_has_small_residual() {
        let g = Grid::unit(17);
        let op = DiscreteOperator::laplacian(g);
        let frame = build_frame([0.0, 0.0, 2.0], 0.5).unwrap();
        let zeta = frame.zetas().zeta1;
        let a = ScalarField::constant(g, C64::new(1.0, 0.0));
        let t = conjugated_residual(&op, &a, zeta, 0.5).unwrap();
        // Only the stencil defect of the discrete exponential remains.
        assert!(t.total.sup_norm() < 1e-2, "{}", t.total.sup_norm());
        let sol = build_cgo(&op, &frame, 1, &quick()).unwrap();
        assert_eq!(sol.phase.sup_norm(), 0.0);
        assert!(sol.remainder.sup_norm() < 1e-2);
    }

    #[test]
    fn pieces_sum_to_the_conjugated_operator() {
        let g = Grid::unit(15);
        let b = BumpSpec { center: [0.5, 0.5, 0.5], radius: 0.3, amplitude: 1.0 };
        let a = VectorField::from_real_fn(g, |x| [b.eval(x), 0.5 * b.eval(x), 0.0]);
        let f = VectorField::from_real_fn(g, |x| [0.0, b.eval(x), -b.eval(x)]);
        let p = ScalarField::from_real_fn(g, |x| 2.0 * b.eval(x));
        let op = DiscreteOperator::magnetic(a, f, p).unwrap();
        let frame = build_frame([1.0, 2.0, 0.0], 0.4).unwrap();
        let amp = ScalarField::from_fn(g, |x| C64::new(x[0], x[1] * x[2]).exp());
        let t = conjugated_residual(&op, &amp, frame.zetas().zeta1, 0.4).unwrap();
        let diff = t.sum_of_parts().sub(&t.total).sup_norm();
        assert!(diff <= 1e-10 * t.total.sup_norm(), "{diff}");
    }

    #[test]
    fn remainder_solves_the_conjugated_system() {
        let g = Grid::unit(17);
        let b = BumpSpec { center: [0.5, 0.5, 0.5], radius: 0.3, amplitude: 1.0 };
        let a = VectorField::from_real_fn(g, |x| [b.eval(x), 0.0, -b.eval(x)]);
        let op = DiscreteOperator::magnetic(a, VectorField::zeros(g), ScalarField::zeros(g)).unwrap();
        let frame = build_frame([2.0, 0.0, 1.0], 0.5).unwrap();
        let sol = build_cgo(&op, &frame, 1, &quick()).unwrap();
        let conj = Conjugation::linear(&g, sol.zeta, sol.h, sol.center).unwrap();
        let la = op.apply(&sol.amplitude.values, Some(&conj));
        let lr = op.apply(&sol.envelope().values, Some(&conj));
        let (mut num, mut den): (f64, f64) = (0.0, 0.0);
        for i in 0..g.len() {
            if !g.is_boundary(i) {
                num = num.max(lr[i].norm());
                den = den.max(la[i].norm());
            }
        }
        assert!(num <= 1e-8 * den, "{num} vs {den}");
    }

    #[test]
    fn zero_rhs_gives_zero_remainder() {
        let g = Grid::unit(9);
        let op = DiscreteOperator::laplacian(g);
        let frame = build_frame([0.0, 1.0, 0.0], 0.5).unwrap();
        let out = solve_remainder(&op, &ScalarField::zeros(g), frame.zetas().zeta1, 0.5, GmresOptions::default()).unwrap();
        assert_eq!(out.r.sup_norm(), 0.0);
    }

    #[test]
    fn overflow_guard_trips() {
        let g = Grid::unit(5);
        let z = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)];
        assert!(overflow_guard(&g, z, 0.25, g.center()).is_ok());
        assert_eq!(overflow_guard(&g, z, 0.005, g.center()).unwrap_err().code(), "overflow-guard");
    }

    #[test]
    fn second_solution_uses_zeta2() {
        let g = Grid::unit(11);
        let op = DiscreteOperator::laplacian(g);
        let frame = build_frame([0.0, 0.0, 2.0], 0.5).unwrap();
        let s = build_cgo(&op.conjugate().unwrap(), &frame, 2, &quick()).unwrap();
        assert_eq!(s.zeta, frame.zetas().zeta2);
        assert!(build_cgo(&op, &frame, 3, &quick()).is_err());
    }
}
