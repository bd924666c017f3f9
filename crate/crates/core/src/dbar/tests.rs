use super::*;
use crate::grid::Grid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R: f64 = 0.3;

/// `(1 - |x - c|^2/R^2)^4` and its gradient.
fn poly_bump(x: [f64; 3]) -> (f64, [f64; 3]) {
    let d = x.map(|v| v - 0.5);
    let u = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (R * R);
    if u >= 1.0 {
        return (0.0, [0.0; 3]);
    }
    let w = 1.0 - u;
    (w.powi(4), d.map(|v| -8.0 * w.powi(3) * v / (R * R)))
}

fn dbar_of_bump(g: Grid, z: CVec3) -> ScalarField {
    ScalarField::from_fn(g, |x| cdot(z, poly_bump(x).1.map(|v| C64::new(v, 0.0))))
}

fn oblique_zeta() -> CVec3 {
    build_frame([1.0, -2.0, 0.5], 0.1).unwrap().zetas().zeta0_1
}

#[test]
fn frame_preconditions() {
    assert!(matches!(build_frame([0.0; 3], 0.1), Err(Error::ZeroFrequency)));
    assert!(matches!(build_frame([4.0, 0.0, 0.0], 0.5), Err(Error::FrameRadicalNegative(_))));
    assert!(build_frame([1.0, 0.0, 0.0], 0.0).is_err());
    assert!(Frame::with_vectors([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], 0.1).is_err());
}

#[test]
fn frames_are_orthonormal_and_deterministic() {
    let f = build_frame([0.0, 0.0, 3.0], 0.2).unwrap();
    assert_eq!(f.mu1, [0.0, -1.0, 0.0]);
    assert_eq!(f, build_frame([0.0, 0.0, 3.0], 0.2).unwrap());
    let r = f.reflected();
    assert_eq!(r.mu2, f.mu2.map(|v| -v));
    assert!((f.radical() - (1.0f64 - 0.01 * 9.0).sqrt()).abs() < 1e-15);
}

#[test]
fn zeta_algebra_on_random_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let xi: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-5.0..5.0));
        let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = rng.gen_range(0.01..1.0) * 2.0 / n;
        let Ok(frame) = build_frame(xi, h) else { continue };
        let z = frame.zetas();
        let scale = 1.0 + n * h;
        assert!(cdot(z.zeta1, z.zeta1).norm() < 1e-12 * scale);
        assert!(cdot(z.zeta2, z.zeta2).norm() < 1e-12 * scale);
        let sum = [0, 1, 2].map(|d| (z.zeta1[d] + z.zeta2[d].conj()) / h);
        for d in 0..3 {
            assert!((sum[d] - C64::new(0.0, xi[d])).norm() < 1e-12 * (1.0 + n));
        }
    }
}

#[test]
fn cauchy_transform_inverts_the_dbar_operator() {
    let g = Grid::unit(32);
    let z = oblique_zeta();
    let n = cauchy_transform(&dbar_of_bump(g, z), z, CauchyQuadrature { n_r: 32, n_phi: 32 }).unwrap();
    let exact = ScalarField::from_real_fn(g, |x| poly_bump(x).0);
    let err = n.sub(&exact).sup_norm();
    assert!(err < 0.01, "{err}");
}

#[test]
fn cauchy_residual_is_small() {
    let g = Grid::unit(32);
    let z = oblique_zeta();
    let f = ScalarField::from_real_fn(g, |x| poly_bump(x).0);
    let n = cauchy_transform(&f, z, CauchyQuadrature { n_r: 32, n_phi: 32 }).unwrap();
    let d = directional_derivative(&n, z).unwrap();
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..g.len() {
        if g.boundary_distance(i) >= 2 {
            num = num.max((d.values[i] - f.values[i]).norm());
            den = den.max(f.values[i].norm());
        }
    }
    assert!(num / den < 0.04, "{}", num / den);
}

#[test]
fn cauchy_conjugation_identities() {
    let g = Grid::unit(16);
    let z = oblique_zeta();
    let q = CauchyQuadrature { n_r: 16, n_phi: 16 };
    let f = ScalarField::from_fn(g, |x| C64::new(poly_bump(x).0, x[0] * poly_bump(x).0));
    let base = cauchy_transform(&f, z, q).unwrap();
    let neg = cauchy_transform(&f, z.map(|v| -v), q).unwrap();
    let conj = cauchy_transform(&f.conj(), cconj(z), q).unwrap();
    let s = base.sup_norm();
    assert!(neg.add(&base).sup_norm() < 1e-12 * s);
    assert!(conj.sub(&base.conj()).sup_norm() < 1e-12 * s);
}

#[test]
fn cauchy_preconditions() {
    let g = Grid::unit(8);
    let z = oblique_zeta();
    let q = CauchyQuadrature::default();
    assert!(cauchy_transform(&ScalarField::constant(g, C64::new(1.0, 0.0)), z, q).is_err());
    let bad = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    assert!(cauchy_transform(&ScalarField::zeros(g), bad, q).is_err());
    assert_eq!(cauchy_transform(&ScalarField::zeros(g), z, q).unwrap().sup_norm(), 0.0);
}

#[test]
fn transport_phase_and_amplitude_solve_their_equations() {
    let g = Grid::unit(32);
    let z = oblique_zeta();
    let a = VectorField::from_real_fn(g, |x| [0.5, -0.2, 0.3].map(|s| s * poly_bump(x).0));
    let phi = transport_phase(&a, z, CauchyQuadrature { n_r: 32, n_phi: 32 }).unwrap();
    assert!(transport_residual(&phi, &a, z).unwrap() < 0.05);
    assert!(amplitude_residual(&amplitude(&phi), &a, z).unwrap() < 0.05);
}

#[test]
fn phase_rates_reject_bad_gamma() {
    let g = Grid::unit(8);
    let z = oblique_zeta();
    let a = VectorField::zeros(g);
    let q = CauchyQuadrature { n_r: 4, n_phi: 4 };
    let e = phase_convergence(&a, 1.5, z, ThetaRule::half(8.0), &[0.5], q, q, None).unwrap_err();
    assert!(e.to_string().contains("0 < γ ≤ 1 violated"));
    let r = phase_convergence(&a, 1.0, z, ThetaRule::half(8.0), &[0.5, 0.25], q, q, None).unwrap();
    assert!(r.exact && r.error_slope.is_none());
}

#[test]
fn theta_rules() {
    assert!((ThetaRule::half(8.0).theta(0.25) - 16.0).abs() < 1e-12);
    assert!((ThetaRule::full(4.0).theta(0.5) - 8.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn zeta_limits_are_isotropic(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, x2 in 0.1f64..3.0, t in 0.01f64..0.99) {
        let xi = [x0, x1, x2];
        let n = (x0 * x0 + x1 * x1 + x2 * x2).sqrt();
        let f = build_frame(xi, t * 2.0 / n).unwrap();
        let z = f.zetas();
        prop_assert!(cdot(z.zeta0_1, z.zeta0_1).norm() < 1e-12);
        prop_assert!(cdot(z.zeta0_2, z.zeta0_2).norm() < 1e-12);
        prop_assert!((cnorm(z.zeta0_1) - 2f64.sqrt()).abs() < 1e-12);
        let xi_dot: f64 = (0..3).map(|d| f.mu1[d] * xi[d] + f.mu2[d] * xi[d]).sum();
        prop_assert!(xi_dot.abs() < 1e-12 * n);
    }
}
