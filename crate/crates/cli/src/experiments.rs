//! One function per registered experiment.

use crate::config::Config;
use crate::registry::Experiment;
use crate::report::Builder;
use cgolab::carleman::{carleman_probe, default_perturbation, probe_csv, test_function, ProbeOptions};
use cgolab::cgo::{rate_csv, remainder_rates, CgoOptions};
use cgolab::dbar::{build_frame, CauchyQuadrature, GradientProbe, ThetaRule};
use cgolab::forward::{
    dn_matrix, dn_pairing, gauge_transform, magnetic_from_convection, BoundaryBasis, DiscreteOperator, Lift,
};
use cgolab::grid::{Container, Grid, ScalarField, VectorField, C64};
use cgolab::potentials::{mollifier_rates, sample_scalar, sample_vector, BumpSpec, HolderSpec};
use cgolab::recon::{
    curl_oracle, curl_recover, electric_rates, inverse_two_form, masked_relative_l2,
    pipeline_convection, quasilinear_solve, support_mask, FourierSamples, PairSetup, PipelineOptions, ReconOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

#[derive(Debug)]
pub enum RunError {
    Core(cgolab::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<cgolab::Error> for RunError {
    fn from(e: cgolab::Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub type Outcome = Result<(), RunError>;

pub fn dispatch(cfg: &Config, b: &mut Builder) -> Outcome {
    match cfg.spec().experiment {
        Experiment::MollifierRates => mollifier(cfg, b),
        Experiment::PhaseRates => phase(cfg, b),
        Experiment::RemainderRates => remainder(cfg, b),
        Experiment::DnmapConsistency => dnmap(cfg, b),
        Experiment::GaugeInvariance => gauge(cfg, b),
        Experiment::ReconMagnetic => recon_magnetic(cfg, b),
        Experiment::ReconElectric => recon_electric(cfg, b),
        Experiment::Pipeline => pipeline(cfg, b),
        Experiment::CarlemanProbe => carleman(cfg, b),
    }
}

fn unit_grid(cfg: &Config) -> Result<Grid, RunError> {
    Ok(Grid::new([0.0; 3], [1.0; 3], cfg.grid)?)
}

fn quadrature(q: usize) -> CauchyQuadrature {
    CauchyQuadrature { n_r: q, n_phi: q }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / r)
}

fn vector(cfg: &Config, slot: &str, g: &Grid) -> Result<VectorField, RunError> {
    Ok(sample_vector(cfg.recipes(slot), g)?)
}

fn scalar(cfg: &Config, slot: &str, g: &Grid) -> Result<ScalarField, RunError> {
    Ok(sample_scalar(cfg.recipes(slot), g)?)
}

fn centered_bump(radius: f64, amplitude: f64) -> BumpSpec {
    BumpSpec { center: [0.5; 3], radius, amplitude }
}

fn rotation(g: Grid, eps: f64, radius: f64) -> VectorField {
    let b = centered_bump(radius, 1.0);
    VectorField::from_real_fn(g, |x| {
        let e = eps * b.eval(x);
        [-(x[1] - 0.5) * e, (x[0] - 0.5) * e, 0.0]
    })
}

fn mollifier(cfg: &Config, b: &mut Builder) -> Outcome {
    let gamma = cfg.gamma.expect("mollifier-rates has a gamma");
    let n = cfg.grid[0];
    let thetas = cfg.numbers("thetas");
    let window = cfg.num("window");
    let spec = HolderSpec { gamma, center: [0.0; 3], radius: 2.0, amplitude: 1.0, normal: None };
    b.stage("setup");
    let r = mollifier_rates(&spec, &thetas, n, window)?;
    b.stage("rates");
    let mut csv = String::from("theta,err_sup,grad_sup\n");
    for row in &r.rows {
        writeln!(csv, "{},{:.12e},{:.12e}", row.theta, row.err_sup, row.grad_sup).unwrap();
    }
    b.table("mollifier_rates", csv)?;
    let side = window / thetas[0];
    let g = Grid::centered(spec.center, side, n);
    b.field("cone", &Container::Scalar(ScalarField::from_real_fn(g, |x| spec.eval(x))))?;
    b.slope("err_sup_vs_theta", r.err_slope, r.err_slope_ci);
    b.slope("grad_sup_vs_theta", r.grad_slope, r.grad_slope_ci);
    let tol = cfg.threshold("slope_tol");
    b.within("err_slope", r.err_slope, -gamma, tol);
    b.within("grad_slope", r.grad_slope, 1.0 - gamma, tol);
    Ok(())
}

fn phase(cfg: &Config, b: &mut Builder) -> Outcome {
    let gamma = cfg.gamma.expect("phase-rates has a gamma");
    let g = unit_grid(cfg)?;
    let a = vector(cfg, "a", &g)?;
    let xi = cfg.vector("xi");
    let zeta0 = build_frame(xi, cfg.h_schedule[0])?.zetas().zeta0_1;
    let probe = GradientProbe {
        center: cfg.recipes("a")[0].center(),
        radius: cfg.num("probe_radius"),
        direction: unit(xi),
    };
    b.stage("setup");
    let r = cgolab::dbar::phase_convergence(
        &a,
        gamma,
        zeta0,
        ThetaRule::half(cfg.num("theta0")),
        &cfg.h_schedule,
        quadrature(cfg.int("quadrature")),
        quadrature(cfg.int("oracle_quadrature")),
        Some(probe),
    )?;
    b.stage("phases");
    let mut csv = String::from("h,theta,phase_error_sup,grad_phase_sup\n");
    for row in &r.rows {
        writeln!(csv, "{},{},{:.12e},{:.12e}", row.h, row.theta, row.phase_error_sup, row.grad_phase_sup).unwrap();
    }
    b.table("phase_rates", csv)?;
    b.field("a", &Container::Vector(a))?;
    let hs: Vec<f64> = r.rows.iter().map(|r| r.h).collect();
    let err = b.fit("phase_error_vs_h", &hs, &r.rows.iter().map(|r| r.phase_error_sup).collect::<Vec<_>>());
    let grad = b.fit("grad_phase_vs_h", &hs, &r.rows.iter().map(|r| r.grad_phase_sup).collect::<Vec<_>>());
    b.within("grad_slope", grad, (gamma - 1.0) / 2.0, cfg.threshold("grad_slope_tol"));
    b.at_least("err_slope", err, gamma / 2.0 - cfg.threshold("err_slope_margin"));
    b.detail("exact", r.exact);
    Ok(())
}

fn remainder(cfg: &Config, b: &mut Builder) -> Outcome {
    let gamma = cfg.gamma.expect("remainder-rates has a gamma");
    let g = unit_grid(cfg)?;
    let a = vector(cfg, "a", &g)?;
    let op = DiscreteOperator::magnetic(a.clone(), vector(cfg, "f", &g)?, scalar(cfg, "p", &g)?)?;
    let opts = CgoOptions {
        rule: ThetaRule::half(cfg.num("theta0")),
        quadrature: quadrature(cfg.int("quadrature")),
        ..CgoOptions::default()
    };
    b.stage("setup");
    let r = remainder_rates(&op, cfg.vector("xi"), &cfg.h_schedule, &opts)?;
    b.stage("solves");
    b.table("remainder_rates", rate_csv(&r))?;
    let mut terms = String::from("h");
    for (name, _) in &r.rows[0].term_norms {
        write!(terms, ",{name}").unwrap();
    }
    terms.push('\n');
    for row in &r.rows {
        write!(terms, "{}", row.h).unwrap();
        for (_, v) in &row.term_norms {
            write!(terms, ",{v:.12e}").unwrap();
        }
        terms.push('\n');
    }
    b.table("residual_terms", terms)?;
    b.field("a", &Container::Vector(a))?;
    let hs: Vec<f64> = r.rows.iter().map(|r| r.h).collect();
    let rem = b.fit("remainder_vs_h", &hs, &r.rows.iter().map(|r| r.norm_r_h1scl).collect::<Vec<_>>());
    b.fit("residual_vs_h", &hs, &r.rows.iter().map(|r| r.norm_la_hm1scl).collect::<Vec<_>>());
    b.at_least("remainder_slope", rem, gamma / 2.0 - cfg.threshold("slope_margin"));
    Ok(())
}

fn dnmap(cfg: &Config, b: &mut Builder) -> Outcome {
    let g = unit_grid(cfg)?;
    let basis = BoundaryBasis::new(g, cfg.int("max_mode"))?;
    let amp_max = cfg.num("amplitude");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let triples: Vec<([f64; 3], usize, usize)> = (0..cfg.int("triples"))
        .map(|_| {
            let amp = [0, 1, 2].map(|_| rng.gen_range(-amp_max..amp_max));
            (amp, rng.gen_range(0..basis.len()), rng.gen_range(0..basis.len()))
        })
        .collect();
    let bump = centered_bump(0.3, 1.0);
    let field = |amp: [f64; 3]| VectorField::from_real_fn(g, |x| amp.map(|s| s * bump.eval(x)));
    b.stage("setup");
    let pairs: Vec<(C64, C64)> = triples
        .par_iter()
        .map(|&(amp, fi, pi)| {
            let v = field(amp);
            let f = basis.lift(fi, Lift::Harmonic);
            let phi = basis.lift(pi, Lift::Polynomial);
            let a = dn_pairing(&DiscreteOperator::convection(v.clone())?, &f, &phi)?;
            let m = dn_pairing(&magnetic_from_convection(&v)?, &f, &phi)?;
            Ok((a, m))
        })
        .collect::<cgolab::Result<_>>()?;
    b.stage("pairings");
    let mut csv = String::from("k,v1,v2,v3,f_mode,phi_mode,convection_re,convection_im,magnetic_re,magnetic_im,relative_gap\n");
    let mut worst: f64 = 0.0;
    for (k, ((amp, fi, pi), (a, m))) in triples.iter().zip(&pairs).enumerate() {
        let gap = (a - m).norm() / a.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(gap);
        writeln!(
            csv,
            "{k},{},{},{},{fi},{pi},{:.15e},{:.15e},{:.15e},{:.15e},{gap:.6e}",
            amp[0], amp[1], amp[2], a.re, a.im, m.re, m.im
        )
        .unwrap();
    }
    b.table("dn_pairings", csv)?;
    b.field("v0", &Container::Vector(field(triples[0].0)))?;
    b.at_most("max_relative_gap", worst, cfg.threshold("max_relative_gap"));
    Ok(())
}

/// `(1 - |x - c|^2 / r^2)^4`, a `C^3` bump that finite differences resolve.
fn poly_bump(x: [f64; 3]) -> f64 {
    let u: f64 = x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / 0.16;
    if u < 1.0 {
        (1.0 - u).powi(4)
    } else {
        0.0
    }
}

/// `amp * prod sin^4(pi (x_d - 0.1) / 0.8)` on `(0.1, 0.9)^3`.
fn gauge_psi(g: Grid, amp: f64) -> ScalarField {
    ScalarField::from_real_fn(g, |x| {
        amp * x
            .iter()
            .map(|&t| {
                let s = (t - 0.1) / 0.8;
                if s > 0.0 && s < 1.0 {
                    (std::f64::consts::PI * s).sin().powi(4)
                } else {
                    0.0
                }
            })
            .product::<f64>()
    })
}

fn gauge(cfg: &Config, b: &mut Builder) -> Outcome {
    let levels = [cfg.grid[0], cfg.int("fine")];
    let amp = cfg.num("psi_amplitude");
    let mut csv = String::from("n,spacing,relative_distance,frobenius\n");
    let mut dist = Vec::new();
    let mut spacing = Vec::new();
    for (k, &n) in levels.iter().enumerate() {
        let g = Grid::unit(n);
        let a = VectorField::from_real_fn(g, |x| {
            let p = poly_bump(x);
            [-(x[1] - 0.5) * p, (x[0] - 0.5) * p, 0.3 * p]
        });
        let p = ScalarField::from_real_fn(g, poly_bump);
        let psi = gauge_psi(g, amp);
        let z = VectorField::zeros(g);
        let op1 = DiscreteOperator::magnetic(a.clone(), z.clone(), p.clone())?;
        let op2 = DiscreteOperator::magnetic(gauge_transform(&a, &psi)?, z, p)?;
        let basis = BoundaryBasis::new(g, cfg.int("max_mode"))?;
        let m1 = dn_matrix(&op1, &basis)?;
        let m2 = dn_matrix(&op2, &basis)?;
        let r = m1.relative_distance(&m2)?;
        b.stage(&format!("dn-{n}"));
        writeln!(csv, "{n},{},{r:.12e},{:.12e}", g.spacing()[0], m1.frobenius()).unwrap();
        if k == 0 {
            b.field("dn_coarse", &m1.to_container())?;
            b.field("dn_coarse_gauged", &m2.to_container())?;
            b.field("psi_coarse", &Container::Scalar(psi))?;
        }
        dist.push(r);
        spacing.push(g.spacing()[0]);
    }
    b.table("gauge_invariance", csv)?;
    let order = b.fit("relative_distance_vs_spacing", &spacing, &dist);
    b.detail("relative_distance", &dist);
    b.at_least("convergence_order", order, cfg.threshold("min_order"));
    Ok(())
}

fn samples_csv(lattice: &[[f64; 3]], rec: &[FourierSamples], oracle: &[FourierSamples]) -> String {
    let mut s = String::from("xi1,xi2,xi3");
    for c in ["23", "31", "12"] {
        write!(s, ",rec{c}_re,rec{c}_im,oracle{c}_re,oracle{c}_im").unwrap();
    }
    s.push('\n');
    for (k, x) in lattice.iter().enumerate() {
        write!(s, "{},{},{}", x[0], x[1], x[2]).unwrap();
        for c in 0..3 {
            let (r, o) = (rec[c].values[k], oracle[c].values[k]);
            write!(s, ",{:.12e},{:.12e},{:.12e},{:.12e}", r.re, r.im, o.re, o.im).unwrap();
        }
        s.push('\n');
    }
    s
}

fn magnetic_only(a: VectorField) -> cgolab::Result<DiscreteOperator> {
    let g = a.grid;
    DiscreteOperator::magnetic(a, VectorField::zeros(g), ScalarField::zeros(g))
}

fn recon_magnetic(cfg: &Config, b: &mut Builder) -> Outcome {
    let g = unit_grid(cfg)?;
    let lattice = cfg.xi_lattice.as_ref().expect("recon-magnetic has a lattice").points();
    let opts = ReconOptions {
        h: cfg.h_schedule[0],
        rule: ThetaRule::half(cfg.num("theta0")),
        quadrature: quadrature(cfg.int("quadrature")),
        ..ReconOptions::default()
    };
    let born = cfg.text("pair") == "born";
    let (op1, op2, d) = if born {
        let d = rotation(g, cfg.num("epsilon"), 0.35);
        (DiscreteOperator::laplacian(g), magnetic_only(d.scale(C64::new(-1.0, 0.0)))?, d)
    } else {
        let a1 = rotation(g, cfg.num("gauge_rotation"), 0.35);
        let psi = ScalarField::from_real_fn(g, |x| centered_bump(0.3, cfg.num("psi_amplitude")).eval(x));
        let a2 = gauge_transform(&a1, &psi)?;
        let d = a1.sub(&a2);
        (magnetic_only(a1)?, magnetic_only(a2)?, d)
    };
    let (a1, _, _) = op1.magnetic_parts();
    let noise_setup = PairSetup::new(op1.clone(), op1.clone(), opts)?;
    let setup = PairSetup::new(op1, op2, opts)?;
    b.stage("setup");
    let noise = inverse_two_form(&g, &curl_recover(&noise_setup, &lattice, true)?.samples).l2_norm();
    b.stage("noise");
    let rec = curl_recover(&setup, &lattice, true)?;
    b.stage("recovery");
    let field = rec.field.clone().expect("curl_recover returns the field");
    let recovered = field.l2_norm();
    let oracle = curl_oracle(&d, &lattice);
    let oracle_field = inverse_two_form(&g, &oracle);
    let scale = inverse_two_form(&g, &curl_oracle(&a1, &lattice)).l2_norm();
    b.table("curl_samples", samples_csv(&lattice, &rec.samples, &oracle))?;
    b.field("curl_recovered", &Container::TwoForm(field.clone()))?;
    b.field("curl_oracle", &Container::TwoForm(oracle_field.clone()))?;
    b.detail("pair", cfg.text("pair"));
    b.detail("lattice_points", lattice.len());
    b.detail("evaluated", rec.evaluated);
    b.detail("symmetry", rec.symmetry);
    b.detail("hermitian_defect", rec.hermitian_defect);
    b.detail("frame_defect", rec.frame_defect);
    b.detail("noise_floor", noise);
    b.detail("recovered_norm", recovered);
    b.detail("coefficient_scale", scale);
    if born {
        let err = masked_relative_l2(&field, &oracle_field, &support_mask(&d));
        b.at_most("born_relative_error", err, cfg.threshold("born_max_error"));
    } else {
        let noise_limit = cfg.threshold("noise_factor") * noise;
        let floor = cfg.threshold("gauge_relative_floor") * scale;
        let limit = noise_limit.max(floor);
        b.detail("relative_to_scale", recovered / scale.max(f64::MIN_POSITIVE));
        b.push(
            "gauge_recovered",
            recovered,
            format!("<= max(noise_factor * {noise:.3e}, gauge_relative_floor * {scale:.3e}) = {limit:.3e}"),
            recovered <= limit,
        );
    }
    Ok(())
}

fn recon_electric(cfg: &Config, b: &mut Builder) -> Outcome {
    let gamma = cfg.gamma.expect("recon-electric has a gamma");
    let g = unit_grid(cfg)?;
    let a = vector(cfg, "a", &g)?;
    let op1 = DiscreteOperator::magnetic(a.clone(), vector(cfg, "f1", &g)?, scalar(cfg, "p1", &g)?)?;
    let op2 = DiscreteOperator::magnetic(a.clone(), vector(cfg, "f2", &g)?, scalar(cfg, "p2", &g)?)?;
    let xis = cfg.xi_lattice.as_ref().expect("recon-electric has a lattice").points();
    let opts = ReconOptions {
        h: cfg.h_schedule[0],
        rule: ThetaRule::full(cfg.num("theta0")),
        quadrature: quadrature(cfg.int("quadrature")),
        ..ReconOptions::default()
    };
    b.stage("setup");
    let r = electric_rates(&op1, &op2, &xis, &cfg.h_schedule, opts, 1e-12)?;
    b.stage("recovery");
    let mut csv = String::from("h,theta,relative_error,second_integral\n");
    for row in &r.rows {
        writeln!(csv, "{},{},{:.12e},{:.12e}", row.h, row.theta, row.relative_error, row.second_integral).unwrap();
    }
    b.table("electric_rates", csv)?;
    b.field("a", &Container::Vector(a))?;
    let hs: Vec<f64> = r.rows.iter().map(|r| r.h).collect();
    b.fit("relative_error_vs_h", &hs, &r.rows.iter().map(|r| r.relative_error).collect::<Vec<_>>());
    let slope = b.fit("second_integral_vs_h", &hs, &r.rows.iter().map(|r| r.second_integral).collect::<Vec<_>>());
    let finest = r.rows.iter().min_by(|x, y| x.h.total_cmp(&y.h)).expect("at least one h");
    b.at_most("relative_error_finest_h", finest.relative_error, cfg.threshold("max_relative_error"));
    if gamma > 2.0 / 3.0 {
        let want = ((3.0 * gamma - 2.0) / 2.0).min(gamma - 0.5) - cfg.threshold("slope_margin");
        b.at_least("second_integral_slope", slope, want);
    } else {
        b.at_most("second_integral_nondecay", slope, cfg.threshold("nondecay_max_slope"));
    }
    Ok(())
}

fn pipeline(cfg: &Config, b: &mut Builder) -> Outcome {
    let g = unit_grid(cfg)?;
    let v1 = vector(cfg, "v1", &g)?;
    let v2 = vector(cfg, "v2", &g)?;
    let k = match cfg.xi_lattice {
        Some(crate::config::Lattice::Cube(k)) => k,
        _ => unreachable!("validated cube lattice"),
    };
    let opts = PipelineOptions {
        recon: ReconOptions {
            h: cfg.h_schedule[0],
            rule: ThetaRule::half(cfg.num("theta0")),
            quadrature: quadrature(cfg.int("quadrature")),
            ..ReconOptions::default()
        },
        curl_lattice: k,
        electric_lattice: k,
        electric_rule: ThetaRule::full(cfg.num("electric_theta0")),
        noise_factor: cfg.threshold("noise_factor"),
        relative_floor: cfg.threshold("relative_floor"),
        gauge_tol: cfg.threshold("gauge_tol"),
    };
    b.stage("setup");
    let r = pipeline_convection(&v1, &v2, &opts)?;
    b.stage("pipeline");
    let verdict = serde_json::to_value(r.verdict).unwrap().as_str().unwrap().to_string();
    let mut csv = String::from("xi1,xi2,xi3,curl23_re,curl23_im,curl31_re,curl31_im,curl12_re,curl12_im,electric_re,electric_im\n");
    for p in &r.per_xi {
        write!(csv, "{},{},{}", p.xi[0], p.xi[1], p.xi[2]).unwrap();
        for c in p.curl {
            write!(csv, ",{:.12e},{:.12e}", c[0], c[1]).unwrap();
        }
        match p.electric {
            Some(e) => writeln!(csv, ",{:.12e},{:.12e}", e[0], e[1]).unwrap(),
            None => csv.push_str(",,\n"),
        }
    }
    b.table("pipeline_samples", csv)?;
    b.field("curl_recovered", &Container::TwoForm(inverse_two_form(&g, &r.curl_samples)))?;
    b.detail("verdict", &verdict);
    b.detail("curl", &r.curl_norms);
    b.detail("electric", &r.electric_norms);
    b.detail("hermitian_defect", r.hermitian_defect);
    b.detail("frame_defect", r.frame_defect);
    b.detail("gauge_residual", r.gauge_residual);

    let expect = cfg.text("expect");
    if expect != "any" {
        b.push("verdict", f64::from(u8::from(verdict == expect)), format!("verdict = {expect}"), verdict == expect);
    }
    match r.verdict {
        cgolab::recon::Verdict::DistinguishedAtCurl => {
            b.at_most("curl_oracle_error", r.curl_norms.oracle_error, cfg.threshold("curl_max_error"));
        }
        cgolab::recon::Verdict::DistinguishedAtElectric => {
            let e = r.electric_norms.as_ref().expect("electric stage ran");
            b.at_most("electric_oracle_error", e.oracle_error, cfg.threshold("electric_max_error"));
        }
        cgolab::recon::Verdict::Indistinguishable => {}
    }

    if cfg.flag("quasilinear") {
        let psi0 = ScalarField::from_real_fn(g, |x| centered_bump(0.3, cfg.num("perturbation")).eval(x));
        let q = quasilinear_solve(&v1, &psi0)?;
        b.stage("quasilinear");
        let mut steps = String::from("iteration,step_sup\n");
        for (i, s) in q.step_norms.iter().enumerate() {
            writeln!(steps, "{},{s:.12e}", i + 1).unwrap();
        }
        b.table("quasilinear_steps", steps)?;
        let psi = q.psi.expect("converged iterate");
        let final_sup = psi.sup_norm();
        b.field("quasilinear_psi", &Container::Scalar(psi))?;
        b.detail("quasilinear_iterations", q.iterations);
        b.detail("quasilinear_contraction", q.contraction);
        b.at_most("quasilinear_final_sup", final_sup, 1e-8);
        b.at_most("quasilinear_contraction", q.contraction, 1.0);
    }
    Ok(())
}

fn carleman(cfg: &Config, b: &mut Builder) -> Outcome {
    let n = cfg.grid[0];
    let g = Grid::unit(n);
    let op = if cfg.coefficients.values().all(Vec::is_empty) {
        b.detail("coefficients", "default perturbation");
        default_perturbation(g)?
    } else {
        DiscreteOperator::magnetic(vector(cfg, "a", &g)?, vector(cfg, "f", &g)?, scalar(cfg, "p", &g)?)?
    };
    let opts = ProbeOptions {
        n,
        alpha: cfg.vector("alpha"),
        eps: cfg.num("eps"),
        hs: cfg.h_schedule.clone(),
        samples: cfg.int("samples"),
        seed: cfg.seed,
    };
    b.stage("setup");
    let r = carleman_probe(&op, &opts)?;
    b.stage("probe");
    b.table("carleman_probe", probe_csv(&r))?;
    let mut mins = String::from("h,free_min,free_dual_min,perturbed_min\n");
    for (k, h) in opts.hs.iter().enumerate() {
        writeln!(mins, "{h},{:.12e},{:.12e},{:.12e}", r.free_min[k], r.free_dual_min[k], r.perturbed_min[k]).unwrap();
    }
    b.table("carleman_minima", mins)?;
    let hmin = opts.hs.iter().cloned().fold(f64::INFINITY, f64::min);
    b.field("test_function", &Container::Scalar(test_function(&g, cfg.seed, hmin)))?;
    for (name, v) in [("a_term_min", r.min_slopes.a), ("f_term_min", r.min_slopes.f), ("p_term_min", r.min_slopes.p)] {
        b.slope(name, v, f64::NAN);
    }
    b.slope("p_term_hm1_min", r.min_slopes.p_hm1, f64::NAN);
    b.detail("in_regime", r.in_regime);
    b.detail("samples", opts.samples);
    b.detail("free_min", &r.free_min);
    b.detail("perturbed_min", &r.perturbed_min);
    b.at_most("free_spread", r.free_spread, cfg.threshold("max_spread"));
    b.at_least("a_term_slope", r.min_slopes.a, cfg.threshold("min_af_slope"));
    b.at_least("f_term_slope", r.min_slopes.f, cfg.threshold("min_af_slope"));
    b.at_least("p_term_slope", r.min_slopes.p, cfg.threshold("min_p_slope"));
    b.at_most("degradation", r.degradation, cfg.threshold("max_degradation"));
    Ok(())
}
