use super::*;
use crate::grid::Container;
use crate::potentials::{make_gauge, BumpSpec};
use crate::quad::loglog_slope;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn bump_v(grid: Grid, center: [f64; 3], amp: [f64; 3]) -> VectorField {
    let b = BumpSpec { center, radius: 0.3, amplitude: 1.0 };
    VectorField::from_real_fn(grid, |x| {
        let v = b.eval(x);
        [amp[0] * v, amp[1] * v, amp[2] * v]
    })
}

#[test]
fn linear_trace_is_reproduced() {
    let g = Grid::unit(12);
    let op = DiscreteOperator::laplacian(g);
    let f = ScalarField::from_real_fn(g, |x| x[0]);
    let u = solve_dirichlet(&op, &f).unwrap();
    assert!(u.sub(&f).sup_norm() < 1e-10);
}

#[test]
fn quadratic_harmonic_is_reproduced() {
    let g = Grid::unit(14);
    let op = DiscreteOperator::laplacian(g);
    let f = ScalarField::from_real_fn(g, |x| x[0] * x[0] - x[1] * x[1]);
    let u = solve_dirichlet(&op, &f).unwrap();
    assert!(u.sub(&f).sup_norm() < 1e-10);
}

#[test]
fn dirichlet_energy_of_coordinate_is_volume() {
    let g = Grid::unit(10);
    let op = DiscreteOperator::laplacian(g);
    let f = ScalarField::from_real_fn(g, |x| x[0]);
    let v = dn_pairing(&op, &f, &f).unwrap();
    assert!((v - c(1.0)).norm() < 1e-12);
}

#[test]
fn conjugated_apply_matches_direct_conjugation() {
    let g = Grid::unit(9);
    let v = bump_v(g, [0.5, 0.5, 0.5], [1.0, -0.5, 2.0]);
    let op = magnetic_from_convection(&v).unwrap();
    let h = 0.4;
    let zeta = [C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.3, 0.1)];
    let conj = Conjugation::linear(&g, zeta, h, g.center()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u: Vec<C64> = (0..g.len()).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let got = op.apply(&u, Some(&conj));
    let eu: Vec<C64> = u.iter().zip(&conj.w).map(|(a, w)| a * w.exp()).collect();
    let lu = op.apply(&eu, None);
    for i in 0..g.len() {
        let want = lu[i] * (-conj.w[i]).exp() * h * h;
        assert!((got[i] - want).norm() < 1e-9 * (1.0 + want.norm()), "node {i}");
    }
}

#[test]
fn reduction_is_exact_at_the_discrete_level() {
    let g = Grid::unit(10);
    let v = bump_v(g, [0.45, 0.5, 0.55], [1.5, -1.0, 0.5]);
    let conv = DiscreteOperator::convection(v.clone()).unwrap();
    let mag = magnetic_from_convection(&v).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u: Vec<C64> = (0..g.len()).map(|_| c(rng.gen::<f64>())).collect();
    let a = conv.apply(&u, None);
    let b = mag.apply(&u, None);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).norm() < 1e-12 * (1.0 + x.norm()));
    }
}

#[test]
fn magnetic_and_convection_pairings_agree() {
    let g = Grid::unit(14);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let basis = BoundaryBasis::new(g, 1).unwrap();
    for _ in 0..3 {
        let amp = [0, 1, 2].map(|_| rng.gen_range(-2.0..2.0));
        let v = bump_v(g, [0.5, 0.5, 0.5], amp);
        let f = basis.lift(rng.gen_range(0..basis.len()), Lift::Harmonic);
        let phi = basis.lift(rng.gen_range(0..basis.len()), Lift::Polynomial);
        let a = dn_pairing(&DiscreteOperator::convection(v.clone()).unwrap(), &f, &phi).unwrap();
        let b = dn_pairing(&magnetic_from_convection(&v).unwrap(), &f, &phi).unwrap();
        assert!((a - b).norm() <= 1e-8 * a.norm().max(1e-300));
    }
}

#[test]
fn pairing_does_not_depend_on_the_lift() {
    let g = Grid::unit(14);
    let v = bump_v(g, [0.5, 0.5, 0.5], [2.0, 1.0, -1.0]);
    let op = DiscreteOperator::convection(v).unwrap();
    let basis = BoundaryBasis::new(g, 1).unwrap();
    let (a, b) = lift_independence(&op, &basis, 0, 1).unwrap();
    assert!((a - b).norm() <= 1e-8 * a.norm());
}

#[test]
fn free_dn_matrix_is_symmetric() {
    let g = Grid::unit(12);
    let basis = BoundaryBasis::new(g, 1).unwrap();
    let m = dn_matrix(&DiscreteOperator::laplacian(g), &basis).unwrap();
    assert_eq!(m.size(), 6);
    assert!(m.asymmetry() < 1e-8);
    assert!(m.get(0, 0).re > 0.0);
}

#[test]
fn fine_modes_are_rejected() {
    let err = BoundaryBasis::new(Grid::unit(12), 3).unwrap_err();
    assert_eq!(err.code(), "basis-underresolved");
    assert!(BoundaryBasis::new(Grid::unit(13), 3).is_ok());
}

#[test]
fn harmonic_lift_has_the_mode_as_trace() {
    let g = Grid::unit(11);
    let basis = BoundaryBasis::new(g, 2).unwrap();
    let k = basis.modes.iter().position(|m| m.axis == 2 && m.side == 1 && m.m == 2 && m.n == 1).unwrap();
    let f = basis.lift(k, Lift::Harmonic);
    for i in 0..g.len() {
        let x = g.node(i);
        let ijk = g.unindex(i);
        if ijk[2] == g.n[2] - 1 {
            let want = (2.0 * std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin();
            assert!((f.values[i].re - want).abs() < 1e-12);
        } else if g.is_boundary(i) {
            assert!(f.values[i].norm() < 1e-12);
        }
    }
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    use std::f64::consts::PI;
    let vb = BumpSpec { center: [0.5, 0.5, 0.5], radius: 0.45, amplitude: 1.0 };
    let vdir = [1.0, -0.5, 0.75];
    let exact = |x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin() + 0.3 * x[0] - 0.2 * x[2];
    let mut hs = vec![];
    let mut errs = vec![];
    for n in [13usize, 19, 25] {
        let g = Grid::unit(n);
        let v = VectorField::from_real_fn(g, |x| vdir.map(|d| d * vb.eval(x)));
        let op = DiscreteOperator::convection(v).unwrap();
        let source = ScalarField::from_real_fn(g, |x| {
            let (s, c) = (x.map(|t| (PI * t).sin()), x.map(|t| (PI * t).cos()));
            let grad = [PI * c[0] * s[1] * s[2] + 0.3, PI * s[0] * c[1] * s[2], PI * s[0] * s[1] * c[2] - 0.2];
            let w = vb.eval(x);
            3.0 * PI * PI * s[0] * s[1] * s[2] + (0..3).map(|d| vdir[d] * w * grad[d]).sum::<f64>()
        });
        let f = ScalarField::from_real_fn(g, exact);
        let u = op.solve(&f, Some(&source), None, GmresOptions::default()).unwrap().u;
        hs.push(g.spacing()[0]);
        errs.push(u.sub(&f).sup_norm());
    }
    let (slope, _) = loglog_slope(&hs, &errs);
    assert!((slope - 2.0).abs() <= 0.2, "slope {slope}, errors {errs:?}");
}

#[test]
fn gauge_checks() {
    let g = Grid::unit(16);
    let a = bump_v(g, [0.5, 0.5, 0.5], [1.0, 0.0, 0.0]);
    assert_eq!(gauge_transform(&a, &ScalarField::zeros(g)).unwrap(), a);
    let bad = ScalarField::constant(g, c(1.0));
    assert_eq!(gauge_transform(&a, &bad).unwrap_err().code(), "gauge-not-boundary-vanishing");
    let psi = make_gauge(&g, &BumpSpec { center: [0.5, 0.5, 0.5], radius: 0.3, amplitude: 0.5 }).unwrap();
    let b = gauge_transform(&a, &psi).unwrap();
    assert!(b.sub(&a).sup_norm() > 0.1);
}

#[test]
fn gauge_conjugation_error_is_second_order() {
    // Polynomial bumps keep the pointwise truncation error in its asymptotic regime.
    let poly = |x: [f64; 3], r: f64, k: i32| {
        let u: f64 = x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / (r * r);
        if u < 1.0 { (1.0 - u).powi(k) } else { 0.0 }
    };
    let mut errs = vec![];
    let mut hs = vec![];
    for n in [25usize, 49, 97] {
        let g = Grid::unit(n);
        let a = VectorField::from_real_fn(g, |x| {
            let b = poly(x, 0.45, 5);
            [b, -0.5 * b, 0.8 * b]
        });
        let p = ScalarField::from_real_fn(g, |x| 2.0 * poly(x, 0.45, 5));
        let psi = ScalarField::from_real_fn(g, |x| 0.5 * poly(x, 0.4, 5));
        let op1 = DiscreteOperator::magnetic(a.clone(), VectorField::zeros(g), p.clone()).unwrap();
        let op2 = DiscreteOperator::magnetic(gauge_transform(&a, &psi).unwrap(), VectorField::zeros(g), p).unwrap();
        let u = ScalarField::from_real_fn(g, |x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() * (x[2] * x[2]));
        let eu = u.mul(&psi.map(|z| (C64::new(0.0, 1.0) * z).exp()));
        let lhs = op1.apply(&eu.values, None);
        let rhs = op2.apply(&u.values, None);
        let mut e: f64 = 0.0;
        for i in 0..g.len() {
            if !g.is_boundary(i) {
                e = e.max((lhs[i] * (C64::new(0.0, -1.0) * psi.values[i]).exp() - rhs[i]).norm());
            }
        }
        errs.push(e);
        hs.push(g.spacing()[0]);
    }
    let (slope, _) = loglog_slope(&hs, &errs);
    assert!(slope > 1.8, "slope {slope}, errors {errs:?}");
}

#[test]
fn oversized_coefficients_are_rejected() {
    let g = Grid::unit(8);
    let v = VectorField::from_real_fn(g, |_| [5.0, 0.0, 0.0]);
    assert_eq!(DiscreteOperator::convection(v).unwrap_err().code(), "coefficient-too-large");
}

#[test]
fn dn_matrix_round_trips_through_the_container() {
    let g = Grid::unit(9);
    let basis = BoundaryBasis::new(g, 1).unwrap();
    let m = dn_matrix(&DiscreteOperator::laplacian(g), &basis).unwrap();
    let back = Container::from_bytes(&m.to_container().to_bytes()).unwrap();
    assert_eq!(back, m.to_container());
    let desc: BoundaryBasis = serde_json::from_str(&basis.descriptor_json()).unwrap();
    assert_eq!(desc, basis);
}

#[test]
fn equal_fields_give_equal_dn_on_both_domains() {
    let outer = Grid::new([-0.25; 3], [1.5; 3], [19; 3]).unwrap();
    let inner = Grid::new([0.0; 3], [1.0; 3], [13; 3]).unwrap();
    let v = bump_v(outer, [0.5, 0.5, 0.5], [1.0, 0.0, 0.0]);
    let r = extension_consistency(&v, &v, &inner, 1).unwrap();
    assert!(r.inner_difference <= 1e-10 && r.outer_difference <= 1e-10);
    let w = bump_v(outer, [0.5, 0.5, 0.5], [1.0, 0.5, 0.0]);
    let shifted = bump_v(outer, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
    assert!(extension_consistency(&v, &w, &inner, 1).is_ok());
    assert_eq!(
        extension_consistency(&v, &v.add(&shifted), &inner, 1).unwrap_err().code(),
        "coefficients-differ-outside-omega"
    );
}
