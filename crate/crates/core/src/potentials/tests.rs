use super::*;
use crate::grid::curl_two_form;
use proptest::prelude::*;

fn cone(gamma: f64, normal: Option<[f64; 3]>) -> HolderSpec {
    HolderSpec { gamma, center: [0.5; 3], radius: 0.35, amplitude: 1.0, normal }
}

fn fd_check(f: impl Fn([f64; 3]) -> f64, grad: [f64; 3], x: [f64; 3]) -> f64 {
    let e = 1e-6;
    (0..3)
        .map(|d| {
            let (mut p, mut m) = (x, x);
            p[d] += e;
            m[d] -= e;
            ((f(p) - f(m)) / (2.0 * e) - grad[d]).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn kernel_has_unit_mass() {
    let k = MollifierKernel::new(4.0).unwrap();
    let g = Grid::centered([0.0; 3], 0.6, 61);
    let mass: f64 = (0..g.len()).map(|i| k.eval(g.node(i)) * g.weight(i)).sum();
    assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    assert_eq!(k.eval([0.26, 0.0, 0.0]), 0.0);
    assert!(MollifierKernel::new(0.0).is_err());
}

#[test]
fn holder_validation() {
    let msg = cone(1.5, None).validate().unwrap_err().to_string();
    assert!(msg.contains("0 < γ ≤ 1 violated"), "{msg}");
    assert!(cone(0.0, None).validate().is_err());
    assert!(cone(1.0, Some([1.0, 1.0, 0.0])).validate().is_err());
    assert!(cone(0.5, Some([0.0, 0.0, 1.0])).validate().is_ok());
    let g = Grid::unit(9);
    let outside = HolderSpec { center: [1.5, 0.5, 0.5], ..cone(0.5, None) };
    assert!(matches!(make_holder_scalar(&outside, &g), Err(Error::SingularPointOutsideDomain(_))));
    let wide = HolderSpec { radius: 0.6, ..cone(0.5, None) };
    assert!(make_holder_scalar(&wide, &g).is_err());
}

#[test]
fn analytic_gradients_match_difference_quotients() {
    let b = BumpSpec { center: [0.4, 0.5, 0.6], radius: 0.3, amplitude: 2.0 };
    for s in [cone(0.75, None), cone(0.5, Some([0.0, 0.6, 0.8]))] {
        for x in [[0.6, 0.55, 0.45], [0.4, 0.3, 0.7], [0.5, 0.5, 0.62]] {
            assert!(fd_check(|y| s.eval(y), s.gradient(x), x) < 1e-5);
        }
    }
    for x in [[0.5, 0.55, 0.5], [0.3, 0.6, 0.7]] {
        assert!(fd_check(|y| b.eval(y), b.gradient(x), x) < 1e-6);
        let e = 1e-4;
        let mut lap = -6.0 * b.eval(x);
        for d in 0..3 {
            let (mut p, mut m) = (x, x);
            p[d] += e;
            m[d] -= e;
            lap += b.eval(p) + b.eval(m);
        }
        assert!((lap / (e * e) - b.laplacian(x)).abs() < 1e-3 * (1.0 + b.laplacian(x).abs()));
    }
}

#[test]
fn mollification_preserves_mass_and_support_margin() {
    let g = Grid::unit(24);
    let f = make_holder_scalar(&cone(0.5, None), &g).unwrap();
    let m = mollify(&f, 8.0).unwrap();
    let (a, b) = (f.values.iter().sum::<C64>(), m.values.iter().sum::<C64>());
    assert!((a - b).norm() < 1e-10 * a.norm());
    assert!(m.sub(&f).sup_norm() < 0.2);
    assert!(matches!(mollify(&f, 2.0), Err(Error::SupportMarginTooSmall { .. })));
}

#[test]
fn mollified_vector_matches_componentwise() {
    let g = Grid::unit(16);
    let v = sample_vector(&[Recipe::Rotation { bump: BumpSpec { center: [0.5; 3], radius: 0.3, amplitude: 1.0 } }], &g).unwrap();
    let mv = mollify_vector(&v, 10.0).unwrap();
    for d in 0..3 {
        let md = mollify(&v.component(d), 10.0).unwrap();
        assert!(md.sub(&mv.component(d)).sup_norm() < 1e-14);
    }
}

#[test]
fn mollifier_rates_follow_the_hoelder_exponent() {
    for gamma in [0.5, 1.0] {
        let r = mollifier_rates(&HolderSpec { center: [0.0; 3], radius: 2.0, ..cone(gamma, None) }, &[8.0, 16.0, 32.0], 32, 8.0)
            .unwrap();
        assert!((r.err_slope + gamma).abs() < 0.15, "{gamma}: {}", r.err_slope);
        assert!((r.grad_slope - (1.0 - gamma)).abs() < 0.15, "{gamma}: {}", r.grad_slope);
    }
}

#[test]
fn cutoff_extension_keeps_the_inner_values() {
    let inner = Grid::new([0.25; 3], [0.5; 3], [9; 3]).unwrap();
    let outer = Grid::unit(17);
    let f = ScalarField::from_real_fn(inner, |x| 1.0 + x[0] * x[1]);
    let e = extend_by_cutoff(&f, &outer).unwrap();
    for i in 0..inner.len() {
        let [a, b, k] = inner.unindex(i);
        assert_eq!(e.values[outer.index(a + 4, b + 4, k + 4)], f.values[i]);
    }
    assert_eq!(e.boundary_layer_sup(1), 0.0);
    let shifted = Grid::new([0.26; 3], [0.5; 3], [9; 3]).unwrap();
    assert!(extend_by_cutoff(&ScalarField::zeros(shifted), &outer).is_err());
    assert!(matches!(extend_by_cutoff(&ScalarField::zeros(outer), &inner), Err(Error::DomainsNotNested(_))));
}

#[test]
fn convection_reduction() {
    let g = Grid::unit(6);
    let v = VectorField::from_real_fn(g, |x| [x[0], -x[1], 2.0]);
    let (a, f, p) = reduce_convection(&v);
    for i in 0..g.len() {
        let vi = v.at(i);
        for d in 0..3 {
            assert_eq!(a.comps[d][i], vi[d] * C64::new(0.0, 0.5));
            assert_eq!(f.comps[d][i], vi[d] * -0.5);
        }
        let vv: C64 = vi.iter().map(|z| z * z).sum();
        assert!((p.values[i] - vv * 0.25).norm() < 1e-14);
    }
}

#[test]
fn gauge_recipes() {
    let g = Grid::unit(33);
    let b = BumpSpec { center: [0.5; 3], radius: 0.4, amplitude: 1.0 };
    assert!(make_gauge(&g, &b).is_ok());
    assert!(make_gauge(&g, &BumpSpec { radius: 0.49, ..b }).is_err());
    let grad = sample_vector(&[Recipe::GaugeGradient { bump: b }], &g).unwrap();
    let rot = sample_vector(&[Recipe::Rotation { bump: b }], &g).unwrap();
    let closure = |v: &VectorField| {
        let d = (0..3).map(|k| crate::grid::fd_gradient(&v.component(k)).unwrap().sup_norm()).fold(0.0, f64::max);
        curl_two_form(v).unwrap().sup_norm() / d
    };
    let (cg, cr) = (closure(&grad), closure(&rot));
    assert!(cg < 0.25 && cr > 0.5, "{cg} {cr}");
    assert!(sample_scalar(&[Recipe::Rotation { bump: b }], &g).is_err());
    assert!(sample_vector(&[Recipe::Bump { bump: b, direction: None }], &g).is_err());
}

#[test]
fn recipes_deserialise_from_config_json() {
    let r: Recipe = serde_json::from_str(r#"{"kind":"holder","gamma":0.75,"center":[0.5,0.5,0.5],"radius":0.3}"#).unwrap();
    assert_eq!(r.support_radius(), 0.3);
    let back: Recipe = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

proptest! {
    #[test]
    fn holder_cone_is_hoelder(gamma in 0.1f64..1.0, t in 0.0f64..0.1, s in 0.0f64..0.1) {
        let spec = cone(gamma, None);
        let (x, y) = ([0.5 + t, 0.5, 0.5], [0.5 + s, 0.5, 0.5]);
        let lhs = (spec.eval(x) - spec.eval(y)).abs();
        prop_assert!(lhs <= (t - s).abs().powf(gamma) + 1e-12);
    }

    #[test]
    fn bump_is_supported_in_its_ball(x0 in 0.0f64..1.0, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
        let b = BumpSpec { center: [0.5; 3], radius: 0.3, amplitude: 1.0 };
        let r = ((x0 - 0.5).powi(2) + (x1 - 0.5).powi(2) + (x2 - 0.5).powi(2)).sqrt();
        let v = b.eval([x0, x1, x2]);
        prop_assert!(v >= 0.0 && v <= 1.0);
        prop_assert!(r < 0.3 || v == 0.0);
    }
}
