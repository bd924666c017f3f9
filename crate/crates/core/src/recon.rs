//! Reconstruction from the interior integral identity: pairings of CGO
//! solutions, Fourier recovery of `dA` and of `div F + p`, the Poincare
//! potential, the quasilinear gauge equation and the convection pipeline.
//!
//! The pairing of two coefficient sets is evaluated in verification mode,
//! as `(B_1 - B_2)(u_1, conj u_2)` with `B_j` the discrete bilinear form.
//! When the Dirichlet-to-Neumann maps agree this vanishes exactly, since
//! `B_1(u_1, .)` and `B_2(., conj u_2)` only see boundary values.

use crate::cgo::{build_cgo_with_phase, CgoSolution};
use crate::dbar::{build_frame, cconj, transport_phase, CVec3, CauchyQuadrature, Frame, ThetaRule};
use crate::error::{Error, Result};
use crate::forward::{DiscreteOperator, GmresOptions, Parts};
use crate::grid::{
    curl_two_form, fd_gradient, ft_at, Grid, PoissonSolver, ScalarField, TwoForm, VectorField, C64, TWO_FORM_AXES,
};
use crate::potentials::mollify_vector;
use crate::quad::loglog_slope;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconOptions {
    pub h: f64,
    pub rule: ThetaRule,
    pub quadrature: CauchyQuadrature,
    #[serde(skip)]
    pub gmres: GmresOptions,
}

impl Default for ReconOptions {
    fn default() -> Self {
        ReconOptions {
            h: 0.25,
            rule: ThetaRule::half(8.0),
            quadrature: CauchyQuadrature { n_r: 16, n_phi: 16 },
            gmres: GmresOptions::default(),
        }
    }
}

/// How a field relates to its complex conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    Zero,
    Real,
    Imaginary,
    General,
}

impl Symmetry {
    pub fn of(values: &[&[C64]]) -> Symmetry {
        let (mut re, mut im) = (false, false);
        for v in values.iter().flat_map(|s| s.iter()) {
            re |= v.re != 0.0;
            im |= v.im != 0.0;
        }
        match (re, im) {
            (false, false) => Symmetry::Zero,
            (true, false) => Symmetry::Real,
            (false, true) => Symmetry::Imaginary,
            _ => Symmetry::General,
        }
    }

    /// `s` with `conj f = s f`, if any.
    fn conj_sign(self) -> Option<f64> {
        match self {
            Symmetry::Zero | Symmetry::Real => Some(1.0),
            Symmetry::Imaginary => Some(-1.0),
            Symmetry::General => None,
        }
    }
}

fn vector_symmetry(v: &VectorField) -> Symmetry {
    Symmetry::of(&[&v.comps[0], &v.comps[1], &v.comps[2]])
}

/// `Phi[A, z0]` and `Phi[conj A, z0]` for a mollified potential at one base
/// direction. Phases at `-z0`, `conj z0` and `-conj z0` follow from
/// `N_{-z}^{-1} = -N_z^{-1}` and `conj N_z^{-1} f = N_{conj z}^{-1} conj f`.
struct PhasePair {
    base: CVec3,
    direct: ScalarField,
    conj: ScalarField,
}

struct PhaseSource {
    sharp: VectorField,
    symmetry: Symmetry,
}

impl PhaseSource {
    fn new(a: &VectorField, theta: f64) -> Result<Self> {
        let symmetry = vector_symmetry(a);
        let sharp = if symmetry == Symmetry::Zero { a.clone() } else { mollify_vector(a, theta)? };
        Ok(PhaseSource { sharp, symmetry })
    }

    fn pair(&self, base: CVec3, q: CauchyQuadrature) -> Result<PhasePair> {
        let g = self.sharp.grid;
        let (direct, conj) = match self.symmetry {
            Symmetry::Zero => (ScalarField::zeros(g), ScalarField::zeros(g)),
            Symmetry::Real => {
                let d = transport_phase(&self.sharp, base, q)?;
                (d.clone(), d)
            }
            Symmetry::Imaginary => {
                let d = transport_phase(&self.sharp, base, q)?;
                let n = d.scale(c(-1.0));
                (d, n)
            }
            Symmetry::General => {
                (transport_phase(&self.sharp, base, q)?, transport_phase(&self.sharp.conj(), base, q)?)
            }
        };
        Ok(PhasePair { base, direct, conj })
    }
}

fn same_direction(a: CVec3, b: CVec3) -> bool {
    (0..3).all(|d| (a[d] - b[d]).norm() < 1e-12)
}

impl PhasePair {
    /// Phase of `A` (or of `conj A` when `conjugated`) along `z`.
    fn at(&self, conjugated: bool, z: CVec3) -> Result<ScalarField> {
        let (p, pc) = if conjugated { (&self.conj, &self.direct) } else { (&self.direct, &self.conj) };
        let neg = self.base.map(|v| -v);
        let cb = cconj(self.base);
        let ncb = cb.map(|v| -v);
        if same_direction(z, self.base) || same_direction(z, neg) {
            Ok(p.clone())
        } else if same_direction(z, cb) || same_direction(z, ncb) {
            Ok(pc.conj().scale(c(-1.0)))
        } else {
            Err(Error::InvalidArgument("direction not related to the cached base".into()))
        }
    }
}

/// Two coefficient sets prepared for pairing: operators, the conjugated second
/// operator and the mollified magnetic potentials.
pub struct PairSetup {
    pub op1: DiscreteOperator,
    pub op2: DiscreteOperator,
    op2_conj: DiscreteOperator,
    src1: PhaseSource,
    src2: Option<PhaseSource>,
    identical: bool,
    pub opts: ReconOptions,
    pub theta: f64,
}

fn same_coefficients(a: &DiscreteOperator, b: &DiscreteOperator) -> bool {
    let (a1, f1, p1) = a.magnetic_parts();
    let (a2, f2, p2) = b.magnetic_parts();
    a1.comps == a2.comps && f1.comps == f2.comps && p1.values == p2.values
}

impl PairSetup {
    pub fn new(op1: DiscreteOperator, op2: DiscreteOperator, opts: ReconOptions) -> Result<Self> {
        op1.grid.same_as(&op2.grid)?;
        let theta = opts.rule.theta(opts.h);
        let (a1, _, _) = op1.magnetic_parts();
        let (a2, _, _) = op2.magnetic_parts();
        let src1 = PhaseSource::new(&a1, theta)?;
        let src2 = if a1.comps == a2.comps { None } else { Some(PhaseSource::new(&a2, theta)?) };
        let identical = same_coefficients(&op1, &op2);
        let op2_conj = op2.conjugate()?;
        Ok(PairSetup { op1, op2, op2_conj, src1, src2, identical, opts, theta })
    }

    /// Setup for the electric identity: `A_2` must match `A_1` to `tol`
    /// relative, after which `A_1` is used in both operators.
    pub fn electric(op1: DiscreteOperator, op2: DiscreteOperator, opts: ReconOptions, tol: f64) -> Result<Self> {
        let (a1, _, _) = op1.magnetic_parts();
        let (a2, f2, p2) = op2.magnetic_parts();
        let diff = a1.sub(&a2).sup_norm();
        let scale = a1.sup_norm().max(a2.sup_norm());
        if diff > tol * scale {
            return Err(Error::MagneticPartsDiffer(diff));
        }
        let op2 = DiscreteOperator::magnetic(a1, f2, p2)?;
        Self::new(op1, op2, opts)
    }

    pub fn grid(&self) -> Grid {
        self.op1.grid
    }

    /// True when the coefficient sets are bitwise equal; every pairing is then zero.
    pub fn is_identical(&self) -> bool {
        self.identical
    }

    fn phases(&self, base: CVec3) -> Result<(PhasePair, Option<PhasePair>)> {
        let q = self.opts.quadrature;
        let p1 = self.src1.pair(base, q)?;
        let p2 = match &self.src2 {
            Some(s) => Some(s.pair(base, q)?),
            None => None,
        };
        Ok((p1, p2))
    }

    fn solutions_with(&self, frame: &Frame, pp: &(PhasePair, Option<PhasePair>)) -> Result<(CgoSolution, CgoSolution)> {
        let zp = frame.zetas();
        let p2 = pp.1.as_ref().unwrap_or(&pp.0);
        let phi1 = pp.0.at(false, zp.zeta0_1)?;
        let phi2 = p2.at(true, zp.zeta0_2)?;
        let g = self.opts.gmres;
        let u1 = build_cgo_with_phase(&self.op1, frame, 1, phi1, self.theta, g)?;
        let u2 = build_cgo_with_phase(&self.op2_conj, frame, 2, phi2, self.theta, g)?;
        Ok((u1, u2))
    }

    /// `u_1` for `L_{A_1,q_1}` and `u_2` for `L_{conj A_2, conj q_2}` at one frame.
    pub fn solutions(&self, frame: &Frame) -> Result<(CgoSolution, CgoSolution)> {
        let pp = self.phases(frame.zetas().zeta0_1)?;
        self.solutions_with(frame, &pp)
    }

    /// Magnetic Fourier values at a frame and its reflection, sharing one set
    /// of Cauchy transforms.
    pub fn magnetic_two_frames(&self, frame: &Frame) -> Result<[C64; 2]> {
        if self.identical {
            return Ok([ZERO; 2]);
        }
        let pp = self.phases(frame.zetas().zeta0_1)?;
        let refl = frame.reflected();
        let mut out = [ZERO; 2];
        for (k, f) in [*frame, refl].iter().enumerate() {
            let (u1, u2) = self.solutions_with(f, &pp)?;
            out[k] = magnetic_pairing(&u1, &u2, &self.op1, &self.op2)? / C64::new(0.0, -2.0);
        }
        Ok(out)
    }

    /// Electric value `int (-F.grad(u_1 conj u_2) + p u_1 conj u_2)` at one frame.
    pub fn electric_value(&self, frame: &Frame) -> Result<C64> {
        if self.identical {
            return Ok(ZERO);
        }
        let (u1, u2) = self.solutions(frame)?;
        form_difference(&u1, &u2, &self.op1, &self.op2, Parts::ALL)
    }
}

/// `e^{i c.xi} (B_1 - B_2)(U_1, conj U_2)` restricted to `parts`, where `U_j`
/// are the centred solutions. The factor restores the normalisation
/// `u = e^{x.zeta/h}(a + r)`.
fn form_difference(
    u1: &CgoSolution,
    u2: &CgoSolution,
    op1: &DiscreteOperator,
    op2: &DiscreteOperator,
    parts: Parts,
) -> Result<C64> {
    if u1.frame != u2.frame || u1.which != 1 || u2.which != 2 {
        return Err(Error::FrameMismatch);
    }
    let g = op1.grid;
    g.same_as(&op2.grid)?;
    g.same_as(&u1.phase.grid)?;
    let a = u1.u();
    let v = u2.u().conj();
    let b1 = op1.apply_form(&a.values, None, parts);
    let b2 = op2.apply_form(&a.values, None, parts);
    let s: C64 = b1.iter().zip(&b2).zip(&v.values).map(|((x, y), w)| (x - y) * w).sum();
    let xi = u1.frame.xi;
    let shift: f64 = (0..3).map(|d| u1.center[d] * xi[d]).sum();
    Ok(s * C64::from_polar(1.0, shift))
}

/// `h` times the integral identity for `u_1`, `u_2`.
pub fn magnetic_pairing(
    u1: &CgoSolution,
    u2: &CgoSolution,
    op1: &DiscreteOperator,
    op2: &DiscreteOperator,
) -> Result<C64> {
    Ok(form_difference(u1, u2, op1, op2, Parts::ALL)? * u1.h)
}

/// Approximates `(mu1 + i mu2) . int (A_1 - A_2) e^{ix.xi} e^{Phi_1 + conj Phi_2} dx`.
pub fn magnetic_fourier(op1: &DiscreteOperator, op2: &DiscreteOperator, xi: [f64; 3], opts: ReconOptions) -> Result<C64> {
    let setup = PairSetup::new(op1.clone(), op2.clone(), opts)?;
    let frame = build_frame(xi, opts.h)?;
    Ok(setup.magnetic_two_frames(&frame)?[0])
}

/// Approximates the transform of `div(F_1 - F_2) + p_1 - p_2` at `-xi`.
pub fn electric_fourier(
    op1: &DiscreteOperator,
    op2: &DiscreteOperator,
    xi: [f64; 3],
    opts: ReconOptions,
    tol: f64,
) -> Result<C64> {
    let setup = PairSetup::electric(op1.clone(), op2.clone(), opts, tol)?;
    setup.electric_value(&build_frame(xi, opts.h)?)
}

/// The pieces of `h` times the magnetic identity, measured separately.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct MagneticTerms {
    /// `i D.(conj zeta2 - zeta1) e^{ix.xi} a_1 conj a_2`.
    pub leading: f64,
    /// Remainder products against the same factor.
    pub middle: f64,
    /// `h i D.(E_1 grad conj E_2 - conj E_2 grad E_1) e^{ix.xi}`.
    pub last: f64,
    /// `h (A_1.A_1 - A_2.A_2 + p_1 - p_2) u_1 conj u_2`.
    pub mass: f64,
    /// `h (F_1 - F_2).grad(u_1 conj u_2)`.
    pub f_part: f64,
    /// `|h B-difference - sum of the signed pieces|`.
    pub mismatch: f64,
}

pub fn magnetic_terms(setup: &PairSetup, frame: &Frame) -> Result<MagneticTerms> {
    let (u1, u2) = setup.solutions(frame)?;
    let g = setup.grid();
    let h = u1.h;
    let (a1, f1, p1) = setup.op1.magnetic_parts();
    let (a2, f2, p2) = setup.op2.magnetic_parts();
    let d = a1.sub(&a2);
    let fd = f1.sub(&f2);
    let m = a1.dot(&a1).sub(&a2.dot(&a2)).add(&p1.sub(&p2));
    let e1 = u1.envelope();
    let e2c = u2.envelope().conj();
    let a12 = u1.amplitude.mul(&u2.amplitude.conj());
    let prod = e1.mul(&e2c);
    let ge1 = fd_gradient(&e1)?;
    let ge2c = fd_gradient(&e2c)?;
    let gp = fd_gradient(&prod)?;
    let xi = frame.xi;
    let dz: CVec3 = [0, 1, 2].map(|k| u2.zeta[k].conj() - u1.zeta[k]);
    let i = C64::new(0.0, 1.0);
    let (mut lead, mut mid, mut last, mut mass, mut fp) = (ZERO, ZERO, ZERO, ZERO, ZERO);
    for n in 0..g.len() {
        let w = g.weight(n);
        let x = g.node(n);
        let ph = C64::from_polar(w, (0..3).map(|k| x[k] * xi[k]).sum());
        let dn = d.at(n);
        let ddz: C64 = (0..3).map(|k| dn[k] * dz[k]).sum();
        lead += i * ddz * ph * a12.values[n];
        mid += i * ddz * ph * (prod.values[n] - a12.values[n]);
        let cross: C64 = (0..3)
            .map(|k| dn[k] * (e1.values[n] * ge2c.comps[k][n] - e2c.values[n] * ge1.comps[k][n]))
            .sum();
        last += i * h * cross * ph;
        mass += h * m.values[n] * prod.values[n] * ph;
        let fnn = fd.at(n);
        let fgrad: C64 = (0..3).map(|k| fnn[k] * (i * xi[k] * prod.values[n] + gp.comps[k][n])).sum();
        fp -= h * fgrad * ph;
    }
    let total = magnetic_pairing(&u1, &u2, &setup.op1, &setup.op2)?;
    let mismatch = (total - (lead + mid + last + mass + fp)).norm();
    Ok(MagneticTerms {
        leading: lead.norm(),
        middle: mid.norm(),
        last: last.norm(),
        mass: mass.norm(),
        f_part: fp.norm(),
        mismatch,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermRateReport {
    pub hs: Vec<f64>,
    pub terms: Vec<MagneticTerms>,
    pub middle_slope: f64,
    pub last_slope: f64,
    pub mass_slope: f64,
    pub f_part_slope: f64,
}

/// Magnetic identity pieces over an `h` sweep at one `xi`.
pub fn magnetic_term_rates(
    op1: &DiscreteOperator,
    op2: &DiscreteOperator,
    xi: [f64; 3],
    hs: &[f64],
    opts: ReconOptions,
) -> Result<TermRateReport> {
    let mut terms = Vec::new();
    for &h in hs {
        let o = ReconOptions { h, ..opts };
        let setup = PairSetup::new(op1.clone(), op2.clone(), o)?;
        terms.push(magnetic_terms(&setup, &build_frame(xi, h)?)?);
    }
    let slope = |f: fn(&MagneticTerms) -> f64| {
        let ys: Vec<f64> = terms.iter().map(f).collect();
        if hs.len() >= 2 && ys.iter().all(|&y| y > 0.0) {
            loglog_slope(hs, &ys).0
        } else {
            f64::NAN
        }
    };
    Ok(TermRateReport {
        hs: hs.to_vec(),
        middle_slope: slope(|t| t.middle),
        last_slope: slope(|t| t.last),
        mass_slope: slope(|t| t.mass),
        f_part_slope: slope(|t| t.f_part),
        terms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    /// Component `(j, k)` of the two-form, indexed as in the CGOF layout.
    CurlComponent(usize),
    Electric,
}

/// Samples `int f e^{ix.xi} dx` on a frequency lattice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FourierSamples {
    pub kind: SampleKind,
    pub xi: Vec<[f64; 3]>,
    pub values: Vec<C64>,
}

impl FourierSamples {
    pub fn l2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn relative_difference(&self, other: &FourierSamples) -> f64 {
        let num: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        num.sqrt() / other.l2().max(f64::MIN_POSITIVE)
    }

    /// `max |v(-xi) - s conj v(xi)| / max |v|` over pairs present in the lattice.
    pub fn hermitian_defect(&self, sign: f64) -> f64 {
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for (k, x) in self.xi.iter().enumerate() {
            let neg = x.map(|v| -v);
            if let Some(j) = self.xi.iter().position(|y| *y == neg) {
                worst = worst.max((self.values[j] - self.values[k].conj() * sign).norm());
            }
        }
        worst / scale
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("xi1,xi2,xi3,re,im\n");
        for (x, v) in self.xi.iter().zip(&self.values) {
            out.push_str(&format!("{},{},{},{:.12e},{:.12e}\n", x[0], x[1], x[2], v.re, v.im));
        }
        out
    }
}

/// Integer lattice `0 < |xi|_inf <= k`, ordered lexicographically.
pub fn integer_lattice(k: i32) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for a in -k..=k {
        for b in -k..=k {
            for c in -k..=k {
                if (a, b, c) != (0, 0, 0) {
                    out.push([a as f64, b as f64, c as f64]);
                }
            }
        }
    }
    out
}

fn is_representative(x: [f64; 3]) -> bool {
    for v in x {
        if v != 0.0 {
            return v > 0.0;
        }
    }
    false
}

/// `-i (xi_j D_k - xi_k D_j)` for the three two-form components.
fn curl_from_transform(xi: [f64; 3], d: [C64; 3]) -> [C64; 3] {
    TWO_FORM_AXES.map(|(j, k)| C64::new(0.0, -1.0) * (d[k] * xi[j] - d[j] * xi[k]))
}

fn perp_from_values(frame: &Frame, m: [C64; 2]) -> [C64; 3] {
    let a1 = (m[0] + m[1]) * 0.5;
    let a2 = (m[0] - m[1]) / C64::new(0.0, 2.0);
    [0, 1, 2].map(|d| a1 * frame.mu1[d] + a2 * frame.mu2[d])
}

/// Rotation of a frame's `mu` pair about `xi` by `angle`.
pub fn rotated_frame(frame: &Frame, angle: f64) -> Result<Frame> {
    let (s, co) = angle.sin_cos();
    let mu1 = [0, 1, 2].map(|d| co * frame.mu1[d] + s * frame.mu2[d]);
    let mu2 = [0, 1, 2].map(|d| -s * frame.mu1[d] + co * frame.mu2[d]);
    Frame::with_vectors(frame.xi, mu1, mu2, frame.h)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurlRecovery {
    pub samples: Vec<FourierSamples>,
    #[serde(skip)]
    pub field: Option<TwoForm>,
    /// Lattice points solved for (the rest filled by symmetry).
    pub evaluated: usize,
    pub symmetry: Symmetry,
    /// Hermitian defect on explicitly solved `+-xi` pairs.
    pub hermitian_defect: Option<f64>,
    /// Relative difference of the curl samples under a rotated frame pair.
    pub frame_defect: Option<f64>,
}

/// Recovered `D^_perp(xi)` with `D = A_1 - A_2`, from a frame and its reflection.
pub fn perp_transform(setup: &PairSetup, frame: &Frame) -> Result<[C64; 3]> {
    let m = setup.magnetic_two_frames(frame)?;
    Ok(perp_from_values(frame, m))
}

/// Number of lattice points used for the Hermitian and frame checks.
const CHECK_POINTS: usize = 3;

/// Curl samples of `A_1 - A_2` over `lattice` and the band-limited field.
pub fn curl_recover(setup: &PairSetup, lattice: &[[f64; 3]], use_symmetry: bool) -> Result<CurlRecovery> {
    if lattice.iter().any(|x| x.iter().all(|&v| v == 0.0)) {
        return Err(Error::ZeroFrequency);
    }
    let (a1, _, _) = setup.op1.magnetic_parts();
    let (a2, _, _) = setup.op2.magnetic_parts();
    let symmetry = vector_symmetry(&a1.sub(&a2));
    let sign = if use_symmetry { symmetry.conj_sign() } else { None };
    let h = setup.opts.h;
    let solve_at = |x: &[f64; 3]| -> Result<[C64; 3]> { perp_transform(setup, &build_frame(*x, h)?) };
    let todo: Vec<usize> = (0..lattice.len())
        .filter(|&k| sign.is_none() || is_representative(lattice[k]) || !lattice.contains(&lattice[k].map(|v| -v)))
        .collect();
    let solved: Vec<[C64; 3]> = todo.par_iter().map(|&k| solve_at(&lattice[k])).collect::<Result<_>>()?;
    let mut perp: Vec<Option<[C64; 3]>> = vec![None; lattice.len()];
    for (k, v) in todo.iter().zip(solved) {
        perp[*k] = Some(v);
    }
    let mut hermitian_defect = None;
    if let Some(s) = sign {
        for k in 0..lattice.len() {
            if perp[k].is_none() {
                let neg = lattice[k].map(|v| -v);
                let j = lattice.iter().position(|y| *y == neg).unwrap();
                perp[k] = Some(perp[j].unwrap().map(|v| v.conj() * s));
            }
        }
        // explicit solves at a few mirrored points
        let reps: Vec<usize> = todo.iter().copied().filter(|&k| is_representative(lattice[k])).take(CHECK_POINTS).collect();
        let mut worst: f64 = 0.0;
        let scale = perp.iter().flatten().flat_map(|v| v.iter()).map(|v| v.norm()).fold(0.0, f64::max);
        for k in reps {
            let neg = lattice[k].map(|v| -v);
            let direct = solve_at(&neg)?;
            let filled = perp[k].unwrap().map(|v| v.conj() * s);
            for d in 0..3 {
                worst = worst.max((direct[d] - filled[d]).norm());
            }
        }
        hermitian_defect = Some(if scale > 0.0 { worst / scale } else { 0.0 });
    }
    let perp: Vec<[C64; 3]> = perp.into_iter().map(|v| v.unwrap()).collect();
    let curls: Vec<[C64; 3]> = lattice.iter().zip(&perp).map(|(x, d)| curl_from_transform(*x, *d)).collect();
    let mut frame_defect = None;
    if !setup.is_identical() {
        let (mut num, mut den): (f64, f64) = (0.0, 0.0);
        for k in (0..lattice.len()).filter(|&k| is_representative(lattice[k])).take(CHECK_POINTS) {
            let f = rotated_frame(&build_frame(lattice[k], h)?, PI / 4.0)?;
            let rot = curl_from_transform(lattice[k], perp_transform(setup, &f)?);
            for d in 0..3 {
                num = num.max((rot[d] - curls[k][d]).norm());
                den = den.max(curls[k][d].norm());
            }
        }
        frame_defect = Some(if den > 0.0 { num / den } else { 0.0 });
    }
    let samples: Vec<FourierSamples> = (0..3)
        .map(|c| FourierSamples {
            kind: SampleKind::CurlComponent(c),
            xi: lattice.to_vec(),
            values: curls.iter().map(|w| w[c]).collect(),
        })
        .collect();
    let g = setup.grid();
    let field = TwoForm { grid: g, comps: [0, 1, 2].map(|c| lattice_inverse(&g, &samples[c]).values) };
    Ok(CurlRecovery { samples, field: Some(field), evaluated: todo.len(), symmetry, hermitian_defect, frame_defect })
}

/// Direct transforms of the curl of `d` on the lattice.
pub fn curl_oracle(d: &VectorField, lattice: &[[f64; 3]]) -> Vec<FourierSamples> {
    let comps = [0, 1, 2].map(|k| d.component(k));
    let curls: Vec<[C64; 3]> = lattice
        .par_iter()
        .map(|x| {
            let neg = x.map(|v| -v);
            curl_from_transform(*x, [0, 1, 2].map(|k| ft_at(&comps[k], neg)))
        })
        .collect();
    (0..3)
        .map(|c| FourierSamples {
            kind: SampleKind::CurlComponent(c),
            xi: lattice.to_vec(),
            values: curls.iter().map(|w| w[c]).collect(),
        })
        .collect()
}

/// Direct transform of `div F + p` at `-xi`, as `int (p - i xi.F) e^{ix.xi}`.
pub fn electric_oracle(f: &VectorField, p: &ScalarField, lattice: &[[f64; 3]]) -> FourierSamples {
    let comps = [0, 1, 2].map(|k| f.component(k));
    let values = lattice
        .par_iter()
        .map(|x| {
            let neg = x.map(|v| -v);
            let fx: C64 = (0..3).map(|k| ft_at(&comps[k], neg) * x[k]).sum();
            ft_at(p, neg) - C64::new(0.0, 1.0) * fx
        })
        .collect();
    FourierSamples { kind: SampleKind::Electric, xi: lattice.to_vec(), values }
}

/// `(2 pi)^{-3} sum_xi v(xi) e^{-ix.xi}` on the grid (unit lattice cells).
pub fn lattice_inverse(grid: &Grid, s: &FourierSamples) -> ScalarField {
    let norm = (2.0 * PI).powi(-3);
    let mut out = vec![ZERO; grid.len()];
    for (x, v) in s.xi.iter().zip(&s.values) {
        if *v == ZERO {
            continue;
        }
        let tables: Vec<Vec<C64>> = (0..3)
            .map(|d| {
                let h = grid.spacing()[d];
                (0..grid.n[d]).map(|i| C64::from_polar(1.0, -(grid.origin[d] + i as f64 * h) * x[d])).collect()
            })
            .collect();
        let vv = *v * norm;
        let mut idx = 0;
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                let t = vv * tables[1][j] * tables[2][k];
                for i in 0..grid.n[0] {
                    out[idx] += t * tables[0][i];
                    idx += 1;
                }
            }
        }
    }
    ScalarField { grid: *grid, values: out }
}

/// Nodes inside the bounding ball of the support of `d`.
pub fn support_mask(d: &VectorField) -> Vec<bool> {
    let g = d.grid;
    let max = d.sup_norm();
    let on: Vec<usize> = (0..g.len())
        .filter(|&n| max > 0.0 && d.at(n).iter().any(|v| v.norm() > 1e-14 * max))
        .collect();
    if on.is_empty() {
        return vec![false; g.len()];
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &n in &on {
        let x = g.node(n);
        for k in 0..3 {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    let c = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]));
    let r2 = on
        .iter()
        .map(|&n| {
            let x = g.node(n);
            (0..3).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>()
        })
        .fold(0.0, f64::max);
    (0..g.len())
        .map(|n| {
            let x = g.node(n);
            (0..3).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>() <= r2 * (1.0 + 1e-12)
        })
        .collect()
}

/// Relative L2 difference of two two-forms over the masked nodes.
pub fn masked_relative_l2(a: &TwoForm, b: &TwoForm, mask: &[bool]) -> f64 {
    let g = a.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for n in (0..g.len()).filter(|&n| mask[n]) {
        let w = g.weight(n);
        for k in 0..3 {
            num += w * (a.comps[k][n] - b.comps[k][n]).norm_sqr();
            den += w * b.comps[k][n].norm_sqr();
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn inverse_two_form(grid: &Grid, samples: &[FourierSamples]) -> TwoForm {
    TwoForm { grid: *grid, comps: [0, 1, 2].map(|c| lattice_inverse(grid, &samples[c]).values) }
}

/// Electric samples over a lattice, filled by Hermitian symmetry when the
/// coefficient differences are real or imaginary.
pub fn electric_sweep(setup: &PairSetup, lattice: &[[f64; 3]], use_symmetry: bool) -> Result<FourierSamples> {
    let (_, f1, p1) = setup.op1.magnetic_parts();
    let (_, f2, p2) = setup.op2.magnetic_parts();
    let fd = f1.sub(&f2);
    let pd = p1.sub(&p2);
    let sym = Symmetry::of(&[&fd.comps[0], &fd.comps[1], &fd.comps[2], &pd.values]);
    let sign = if use_symmetry { sym.conj_sign() } else { None };
    let h = setup.opts.h;
    let todo: Vec<usize> = (0..lattice.len())
        .filter(|&k| sign.is_none() || is_representative(lattice[k]) || !lattice.contains(&lattice[k].map(|v| -v)))
        .collect();
    let vals: Vec<C64> =
        todo.par_iter().map(|&k| setup.electric_value(&build_frame(lattice[k], h)?)).collect::<Result<_>>()?;
    let mut out: Vec<Option<C64>> = vec![None; lattice.len()];
    for (k, v) in todo.iter().zip(vals) {
        out[*k] = Some(v);
    }
    if let Some(s) = sign {
        for k in 0..lattice.len() {
            if out[k].is_none() {
                let neg = lattice[k].map(|v| -v);
                let j = lattice.iter().position(|y| *y == neg).unwrap();
                out[k] = Some(out[j].unwrap().conj() * s);
            }
        }
    }
    Ok(FourierSamples { kind: SampleKind::Electric, xi: lattice.to_vec(), values: out.into_iter().map(|v| v.unwrap()).collect() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElectricRow {
    pub h: f64,
    pub theta: f64,
    /// Relative error of the recovered samples against the direct transform.
    pub relative_error: f64,
    /// Largest `|int F e^{ix.xi}.grad(u_1 conj u_2 e^{-ix.xi} - 1)|` over the samples.
    pub second_integral: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElectricRateReport {
    pub rows: Vec<ElectricRow>,
    pub error_slope: f64,
    pub second_integral_slope: f64,
}

/// The second integral of the expanded electric identity at one frame.
pub fn electric_second_integral(setup: &PairSetup, frame: &Frame) -> Result<C64> {
    let (u1, u2) = setup.solutions(frame)?;
    let g = setup.grid();
    let (_, f1, _) = setup.op1.magnetic_parts();
    let (_, f2, _) = setup.op2.magnetic_parts();
    let fd = f1.sub(&f2);
    let prod = u1.envelope().mul(&u2.envelope().conj());
    let base = u1.amplitude.mul(&u2.amplitude.conj());
    let gp = fd_gradient(&prod.sub(&base))?;
    let mut acc = ZERO;
    for n in 0..g.len() {
        let x = g.node(n);
        let ph = C64::from_polar(g.weight(n), (0..3).map(|k| x[k] * frame.xi[k]).sum());
        let fnn = fd.at(n);
        acc -= ph * (0..3).map(|k| fnn[k] * gp.comps[k][n]).sum::<C64>();
    }
    Ok(acc)
}

/// Electric recovery error and the second integral over an `h` sweep.
pub fn electric_rates(
    op1: &DiscreteOperator,
    op2: &DiscreteOperator,
    xis: &[[f64; 3]],
    hs: &[f64],
    opts: ReconOptions,
    tol: f64,
) -> Result<ElectricRateReport> {
    let (_, f1, p1) = op1.magnetic_parts();
    let (_, f2, p2) = op2.magnetic_parts();
    let oracle = electric_oracle(&f1.sub(&f2), &p1.sub(&p2), xis);
    let mut rows = Vec::new();
    for &h in hs {
        let o = ReconOptions { h, ..opts };
        let setup = PairSetup::electric(op1.clone(), op2.clone(), o, tol)?;
        let mut vals = Vec::new();
        let mut second: f64 = 0.0;
        for x in xis {
            let frame = build_frame(*x, h)?;
            vals.push(setup.electric_value(&frame)?);
            second = second.max(electric_second_integral(&setup, &frame)?.norm());
        }
        let rec = FourierSamples { kind: SampleKind::Electric, xi: xis.to_vec(), values: vals };
        rows.push(ElectricRow { h, theta: setup.theta, relative_error: rec.relative_difference(&oracle), second_integral: second });
    }
    let hv: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let slope = |ys: Vec<f64>| if ys.len() >= 2 && ys.iter().all(|&y| y > 0.0) { loglog_slope(&hv, &ys).0 } else { f64::NAN };
    Ok(ElectricRateReport {
        error_slope: slope(rows.iter().map(|r| r.relative_error).collect()),
        second_integral_slope: slope(rows.iter().map(|r| r.second_integral).collect()),
        rows,
    })
}

/// Relative tolerance of the curl-free certificate, against the largest
/// first derivative of the field. The difference-quotient curl of a sampled
/// gradient is `O(dx^2)` relative; a rotation field scores about 1.
pub const CLOSED_TOL: f64 = 0.25;

/// `psi(x) = int_0^1 W(x0 + t(x - x0)).(x - x0) dt`, shifted so that `psi`
/// vanishes on the two outer node layers.
pub fn poincare_potential(w: &VectorField, x0: [f64; 3]) -> Result<ScalarField> {
    let g = w.grid;
    if !g.contains(x0) {
        return Err(Error::InvalidArgument(format!("base point {x0:?} outside the box")));
    }
    let curl = curl_two_form(w)?.sup_norm();
    let grads = fd_gradient(&w.component(0))?.sup_norm()
        .max(fd_gradient(&w.component(1))?.sup_norm())
        .max(fd_gradient(&w.component(2))?.sup_norm());
    if curl > CLOSED_TOL * grads {
        return Err(Error::FieldNotClosed { curl, tol: CLOSED_TOL * grads });
    }
    if w.sup_norm() == 0.0 {
        return Ok(ScalarField::zeros(g));
    }
    let near = g.nearest(x0);
    if w.at(g.index(near[0], near[1], near[2])).iter().any(|v| v.norm() > 0.0) {
        return Err(Error::InvalidArgument("base point inside the support".into()));
    }
    let step = 0.5 * g.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let values: Vec<C64> = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let x = g.node(n);
            let dx = [0, 1, 2].map(|k| x[k] - x0[k]);
            let len = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
            let m = ((len / step).ceil() as usize).max(1);
            let mut acc = ZERO;
            for s in 0..=m {
                let t = s as f64 / m as f64;
                let y = [0, 1, 2].map(|k| x0[k] + t * dx[k]);
                let wt = if s == 0 || s == m { 0.5 } else { 1.0 };
                let v: C64 = (0..3).map(|k| g.interpolate(&w.comps[k], y) * dx[k]).sum();
                acc += v * wt;
            }
            acc / m as f64
        })
        .collect();
    let mut psi = ScalarField { grid: g, values };
    let layer: Vec<usize> = (0..g.len()).filter(|&n| g.boundary_distance(n) < 2).collect();
    let mean = layer.iter().map(|&n| psi.values[n]).sum::<C64>() / layer.len() as f64;
    for v in psi.values.iter_mut() {
        *v -= mean;
    }
    for n in layer {
        psi.values[n] = ZERO;
    }
    Ok(psi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasilinearOutcome {
    #[serde(skip)]
    pub psi: Option<ScalarField>,
    pub iterations: usize,
    pub step_norms: Vec<f64>,
    /// Geometric mean of successive step ratios (0 when the first step vanishes).
    pub contraction: f64,
}

pub const PICARD_TOL: f64 = 1e-10;
pub const PICARD_MAX_ITER: usize = 100;

/// Picard iteration `Lap psi^{k+1} = V.grad psi^k - (grad psi^k)^2 / 2` with
/// zero Dirichlet values, starting from `psi0`.
pub fn quasilinear_solve(v1: &VectorField, psi0: &ScalarField) -> Result<QuasilinearOutcome> {
    let g = v1.grid;
    g.same_as(&psi0.grid)?;
    let ps = PoissonSolver::new(g);
    let mut psi = psi0.clone();
    let mut steps = Vec::new();
    for it in 1..=PICARD_MAX_ITER {
        let gp = fd_gradient(&psi)?;
        let rhs: Vec<C64> = (0..g.len())
            .map(|n| {
                let gn = gp.at(n);
                let vn = v1.at(n);
                (0..3).map(|k| vn[k] * gn[k] - 0.5 * gn[k] * gn[k]).sum()
            })
            .collect();
        let next: Vec<C64> = ps.solve(&rhs, 0.0, 1.0).into_iter().map(|v| -v).collect();
        let step = next.iter().zip(&psi.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        psi.values = next;
        steps.push(step);
        if !step.is_finite() || step > 1e6 {
            return Err(Error::PicardDiverged(steps));
        }
        if step < PICARD_TOL {
            let ratios: Vec<f64> = steps.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
            let contraction = if ratios.is_empty() {
                0.0
            } else {
                (ratios.iter().map(|r| r.max(1e-300).ln()).sum::<f64>() / ratios.len() as f64).exp()
            };
            return Ok(QuasilinearOutcome { psi: Some(psi), iterations: it, step_norms: steps, contraction });
        }
    }
    Err(Error::PicardDiverged(steps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Indistinguishable,
    DistinguishedAtCurl,
    DistinguishedAtElectric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub recon: ReconOptions,
    /// Magnetic stage lattice `|xi|_inf <= curl_lattice`.
    pub curl_lattice: i32,
    /// Electric stage lattice `|xi|_inf <= electric_lattice`.
    pub electric_lattice: i32,
    /// `theta` rule for the electric stage.
    pub electric_rule: ThetaRule,
    /// Multiple of the equal-pair output below which a norm counts as zero.
    pub noise_factor: f64,
    /// Relative floor against the coefficient scale, used when the equal-pair
    /// output vanishes identically.
    pub relative_floor: f64,
    /// Tolerance for `A_1 = A_2` after the gauge step.
    pub gauge_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            recon: ReconOptions::default(),
            curl_lattice: 2,
            electric_lattice: 2,
            electric_rule: ThetaRule::full(4.0),
            noise_factor: 3.0,
            relative_floor: 0.05,
            gauge_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageNorms {
    pub recovered: f64,
    pub noise_floor: f64,
    pub scale: f64,
    pub threshold: f64,
    /// Relative error against the direct transform of the known difference.
    pub oracle_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerXi {
    pub xi: [f64; 3],
    pub curl: [[f64; 2]; 3],
    pub electric: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub verdict: Verdict,
    pub curl_norms: StageNorms,
    pub electric_norms: Option<StageNorms>,
    pub per_xi: Vec<PerXi>,
    pub noise_floor: f64,
    pub hermitian_defect: Option<f64>,
    pub frame_defect: Option<f64>,
    pub gauge_residual: Option<f64>,
    #[serde(skip)]
    pub curl_samples: Vec<FourierSamples>,
    #[serde(skip)]
    pub electric_samples: Option<FourierSamples>,
}

/// Oracle norms below this fraction of the scale count as zero.
const ORACLE_ZERO: f64 = 1e-6;

fn band_norm(grid: &Grid, samples: &[FourierSamples]) -> f64 {
    inverse_two_form(grid, samples).l2_norm()
}

/// Runs the two-stage recovery for a pair of convection fields.
pub fn pipeline_convection(v1: &VectorField, v2: &VectorField, opts: &PipelineOptions) -> Result<PipelineReport> {
    let g = v1.grid;
    g.same_as(&v2.grid)?;
    for v in [v1, v2] {
        let b = v.boundary_layer_sup(2);
        if b > 0.0 {
            return Err(Error::FieldNotCompactlySupported { boundary: b, max: v.sup_norm() });
        }
    }
    let op1 = DiscreteOperator::convection(v1.clone())?;
    let op2 = DiscreteOperator::convection(v2.clone())?;
    let (a1, f1, p1) = op1.magnetic_parts();
    let (a2, _, _) = op2.magnetic_parts();
    let lattice = integer_lattice(opts.curl_lattice);

    // magnetic stage
    let noise = PairSetup::new(op1.clone(), op1.clone(), opts.recon)?;
    let noise_curl = band_norm(&g, &curl_recover(&noise, &lattice, true)?.samples);
    let setup = PairSetup::new(op1.clone(), op2.clone(), opts.recon)?;
    let rec = curl_recover(&setup, &lattice, true)?;
    let recovered = rec.field.as_ref().map_or(0.0, |f| f.l2_norm());
    let scale = band_norm(&g, &curl_oracle(&a1, &lattice)).max(band_norm(&g, &curl_oracle(&a2, &lattice)));
    let oracle = curl_oracle(&a1.sub(&a2), &lattice);
    let oracle_norm = band_norm(&g, &oracle);
    let oracle_error = if oracle_norm > ORACLE_ZERO * scale {
        masked_relative_l2(rec.field.as_ref().unwrap(), &inverse_two_form(&g, &oracle), &support_mask(&a1.sub(&a2)))
    } else {
        recovered / scale.max(f64::MIN_POSITIVE)
    };
    // Frame-dependent output is remainder, not curl: the O(h) electric terms
    // of a curl-free difference change under rotation of the frame.
    let remainder_floor = rec.frame_defect.unwrap_or(0.0) * recovered;
    let threshold = (opts.noise_factor * noise_curl.max(remainder_floor)).max(opts.relative_floor * scale);
    let curl_norms = StageNorms { recovered, noise_floor: noise_curl, scale, threshold, oracle_error };
    let mut per_xi: Vec<PerXi> = lattice
        .iter()
        .enumerate()
        .map(|(k, x)| PerXi {
            xi: *x,
            curl: [0, 1, 2].map(|c| [rec.samples[c].values[k].re, rec.samples[c].values[k].im]),
            electric: None,
        })
        .collect();
    let mut report = PipelineReport {
        verdict: Verdict::DistinguishedAtCurl,
        curl_norms,
        electric_norms: None,
        per_xi: Vec::new(),
        noise_floor: noise_curl,
        hermitian_defect: rec.hermitian_defect,
        frame_defect: rec.frame_defect,
        gauge_residual: None,
        curl_samples: rec.samples.clone(),
        electric_samples: None,
    };
    if recovered > threshold {
        report.per_xi = per_xi;
        return Ok(report);
    }

    // gauge reduction and electric stage
    let d = a1.sub(&a2);
    let corner = g.origin;
    let psi = poincare_potential(&d, corner)?;
    let a2g = crate::forward::gauge_transform(&a2, &psi)?;
    let gauge_residual = a2g.sub(&a1).sup_norm() / a1.sup_norm().max(a2.sup_norm()).max(f64::MIN_POSITIVE);
    report.gauge_residual = Some(gauge_residual);
    let (_, f2, p2) = op2.magnetic_parts();
    let op2g = DiscreteOperator::magnetic(a2g, f2.clone(), p2.clone())?;
    let eopts = ReconOptions { rule: opts.electric_rule, ..opts.recon };
    let elat = integer_lattice(opts.electric_lattice);
    let en = PairSetup::electric(op1.clone(), op1.clone(), eopts, opts.gauge_tol)?;
    let noise_el = electric_sweep(&en, &elat, true)?.l2();
    let es = PairSetup::electric(op1.clone(), op2g, eopts, opts.gauge_tol)?;
    let samples = electric_sweep(&es, &elat, true)?;
    let q1 = electric_oracle(&f1, &p1, &elat);
    let q2 = electric_oracle(&f2, &p2, &elat);
    let oracle = electric_oracle(&f1.sub(&f2), &p1.sub(&p2), &elat);
    let escale = q1.l2().max(q2.l2());
    let erec = samples.l2();
    let oerr = if oracle.l2() > ORACLE_ZERO * escale { samples.relative_difference(&oracle) } else { erec / escale.max(f64::MIN_POSITIVE) };
    let eth = (opts.noise_factor * noise_el).max(opts.relative_floor * escale);
    report.electric_norms =
        Some(StageNorms { recovered: erec, noise_floor: noise_el, scale: escale, threshold: eth, oracle_error: oerr });
    for (k, x) in elat.iter().enumerate() {
        if let Some(p) = per_xi.iter_mut().find(|p| p.xi == *x) {
            p.electric = Some([samples.values[k].re, samples.values[k].im]);
        }
    }
    report.per_xi = per_xi;
    report.verdict = if erec > eth { Verdict::DistinguishedAtElectric } else { Verdict::Indistinguishable };
    report.electric_samples = Some(samples);
    Ok(report)
}
