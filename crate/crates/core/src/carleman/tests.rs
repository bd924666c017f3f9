use super::*;
use crate::grid::fd_gradient;

fn spec(h: f64) -> WeightSpec {
    WeightSpec::relaxed([1.0, 0.0, 0.0], 0.25, h).unwrap()
}

#[test]
fn weight_bounds_are_enforced() {
    assert!(WeightSpec::new([1.0, 0.0, 0.0], 0.25, 0.05).is_ok());
    assert!(WeightSpec::new([1.0, 0.0, 0.0], 0.25, 0.1).is_err());
    assert!(WeightSpec::relaxed([1.0, 0.0, 0.0], 0.25, 0.1).is_ok());
    assert!(WeightSpec::relaxed([1.0, 0.0, 0.0], 0.3, 0.01).is_err());
    assert!(WeightSpec::relaxed([1.0, 1e-5, 0.0], 0.25, 0.01).is_err());
    let s = 0.5f64.sqrt();
    assert!(WeightSpec::relaxed([s, s, 0.0], 0.25, 0.01).is_ok());
}

#[test]
fn conjugation_matches_naive_exponentials() {
    let g = Grid::unit(21);
    let op = default_perturbation(g).unwrap();
    let u = test_function(&g, 4, 0.2);
    for w in [spec(0.2), spec(0.2).plain()] {
        let got = conjugate_apply(&op, &w, &u).unwrap();
        let e: Vec<f64> = (0..g.len()).map(|i| w.phi(g.node(i)) / w.h).collect();
        let eu: Vec<C64> = u.values.iter().zip(&e).map(|(v, p)| v * (-p).exp()).collect();
        let lu = op.apply(&eu, None);
        let scale = got.sup_norm();
        for i in 0..g.len() {
            let want = lu[i] * e[i].exp() * w.h * w.h;
            assert!((got.values[i] - want).norm() <= 1e-9 * scale, "node {i}");
        }
    }
}

#[test]
fn free_plain_conjugation_is_the_product_rule() {
    // e^{x1/h} h^2 (-Lap)(e^{-x1/h} u) = -h^2 Lap u + 2h d1 u - u, up to O(dx^2).
    let mut errs = vec![];
    let mut hs = vec![];
    for n in [25usize, 49] {
        let g = Grid::unit(n);
        let u = ScalarField::from_fn(g, |x| {
            let r2: f64 = x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / 0.16;
            C64::new(1.0 + x[0], x[1] - x[2]) * if r2 < 1.0 { (1.0 - r2).powi(6) } else { 0.0 }
        });
        let h = 0.3;
        let got = conjugate_apply(&DiscreteOperator::laplacian(g), &spec(h).plain(), &u).unwrap();
        let lap = crate::grid::fd_laplacian(&u).unwrap();
        let d1 = fd_gradient(&u).unwrap().component(0);
        let mut e: f64 = 0.0;
        for i in 0..g.len() {
            if g.boundary_distance(i) > 1 {
                let want = -h * h * lap.values[i] + 2.0 * h * d1.values[i] - u.values[i];
                e = e.max((got.values[i] - want).norm());
            }
        }
        errs.push(e / got.sup_norm());
        hs.push(g.spacing()[0]);
    }
    let (slope, _) = loglog_slope(&hs, &errs);
    assert!(slope > 1.8 && errs[1] < 0.03, "{errs:?}");
}

#[test]
fn zero_input_gives_zero_and_ratio_rejects_it() {
    let g = Grid::unit(13);
    let op = default_perturbation(g).unwrap();
    let z = ScalarField::zeros(g);
    assert_eq!(conjugate_apply(&op, &spec(0.2), &z).unwrap().sup_norm(), 0.0);
    assert_eq!(carleman_ratio(&op, &spec(0.2), &z).unwrap_err().code(), "zero-test-function");
}

#[test]
fn ratio_is_homogeneous() {
    let g = Grid::unit(17);
    let op = default_perturbation(g).unwrap();
    let u = test_function(&g, 2, 0.2);
    let r = carleman_ratio(&op, &spec(0.2), &u).unwrap();
    for c in [C64::new(3.0, 0.0), C64::new(-0.2, 1.5), C64::new(1e-4, 0.0)] {
        let rc = carleman_ratio(&op, &spec(0.2), &u.scale(c)).unwrap();
        assert!((rc - r).abs() <= 1e-12 * r);
    }
}

#[test]
fn convexification_shift_is_first_order_in_h_over_eps() {
    let g = Grid::unit(25);
    let op = DiscreteOperator::laplacian(g);
    let u = test_function(&g, 3, 0.2);
    let h = 0.05;
    let diff = |eps: f64| {
        let w = WeightSpec::relaxed([1.0, 0.0, 0.0], eps, h).unwrap();
        conjugate_apply(&op, &w, &u).unwrap().sub(&conjugate_apply(&op, &w.plain(), &u).unwrap()).sup_norm()
    };
    let (d1, d2) = (diff(0.25), diff(0.125));
    let ratio = d2 / d1;
    assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
    assert!(d1 <= 4.0 * (h / 0.25) * u.sup_norm() * 3.0);
}

#[test]
fn zero_coefficients_have_zero_terms() {
    let g = Grid::unit(13);
    let t = perturbation_bounds(&DiscreteOperator::laplacian(g), &spec(0.2), &test_function(&g, 0, 0.2)).unwrap();
    assert_eq!((t.a_term, t.f_term, t.p_term, t.p_term_hm1), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn overflow_guard_trips_on_tiny_h() {
    let g = Grid::unit(9);
    let u = test_function(&g, 0, 0.2);
    let err = conjugate_apply(&DiscreteOperator::laplacian(g), &spec(1e-4), &u).unwrap_err();
    assert_eq!(err.code(), "overflow-guard");
}

#[test]
fn small_probe_is_deterministic_and_sane() {
    let opts = ProbeOptions { n: 21, hs: vec![0.4, 0.2], samples: 6, seed: 9, ..ProbeOptions::default() };
    let op = default_perturbation(Grid::unit(21)).unwrap();
    let a = carleman_probe(&op, &opts).unwrap();
    let b = carleman_probe(&op, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 12);
    assert!(a.free_min.iter().all(|&r| r > 0.0 && r.is_finite()));
    assert!(!a.in_regime);
    assert!(probe_csv(&a).starts_with("h,eps,seed,ratio,a_term_norm,f_term_norm,p_term_norm"));
}

#[test]
fn perturbation_terms_have_the_stated_orders() {
    let opts = ProbeOptions { samples: 3, seed: 40, ..ProbeOptions::default() };
    let r = carleman_probe(&default_perturbation(Grid::unit(opts.n)).unwrap(), &opts).unwrap();
    assert!(r.min_slopes.a >= 0.85 && r.min_slopes.f >= 0.85, "{:?}", r.min_slopes);
    assert!((r.min_slopes.p - 2.0).abs() < 1e-6, "{:?}", r.min_slopes);
    assert!(r.degradation <= 5.0);
}
