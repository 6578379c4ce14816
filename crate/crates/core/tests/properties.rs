use proptest::prelude::*;
use qannulus::lattice::NormKind;
use qannulus::modes::{apply_dn, apply_qn, qn_kernel, roundtrip_errors};
use qannulus::operator::{apply_d, check_covariance};
use qannulus::sample::random_beta;
use qannulus::{AlgebraElement, BetaFunction, CoeffFunction, EventuallyConstant, FourierVector, ModeOperatorSpec};
use qannulus::{TailPoly, TailVector, WeightParams, Window, C64};

fn params() -> WeightParams {
    WeightParams::new(2.0, 1.0, 3.0).unwrap()
}

fn scalar() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn coeff() -> impl Strategy<Value = CoeffFunction> {
    (-4i64..=4, prop::collection::vec(scalar(), 1..6))
        .prop_map(|(start, values)| EventuallyConstant::from_core(start, values).unwrap())
}

fn element() -> impl Strategy<Value = AlgebraElement> {
    prop::collection::btree_map(-3i64..=3, coeff(), 1..3).prop_map(AlgebraElement::from_modes)
}

fn finite_vector() -> impl Strategy<Value = TailVector> {
    (-8i64..=8, prop::collection::vec(scalar(), 1..10)).prop_map(|(start, values)| TailVector::finite(start, &values))
}

/// Vector with constant tails equal to its edge values.
fn tail_vector() -> impl Strategy<Value = TailVector> {
    (0u32..6, prop::collection::vec(scalar(), 13)).prop_map(|(half, values)| {
        let window = Window::symmetric(half);
        let core: Vec<C64> = (0..window.len()).map(|i| values[i]).collect();
        let left = TailPoly::constant(core[0]);
        let right = TailPoly::constant(*core.last().unwrap());
        TailVector::new(window, core, left, right).unwrap()
    })
}

fn close(x: &AlgebraElement, y: &AlgebraElement, tol: f64) -> bool {
    let scale = 1.0 + x.sup_norm() + y.sup_norm();
    x.sub(y).sup_norm() <= tol * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_is_associative(x in element(), y in element(), z in element()) {
        prop_assert!(close(&x.multiply(&y).multiply(&z), &x.multiply(&y.multiply(&z)), 1e-13));
    }

    #[test]
    fn delta_is_a_derivation(x in element(), y in element()) {
        let beta = BetaFunction::canonical();
        let lhs = x.multiply(&y).delta(&beta);
        let rhs = x.delta(&beta).multiply(&y).add(&x.multiply(&y.delta(&beta)));
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn delta_is_a_derivation_for_perturbed_beta(x in element(), y in element(), seed in 0u64..1000) {
        let beta = random_beta(&mut qannulus::sample::rng(seed));
        let lhs = x.multiply(&y).delta(&beta);
        let rhs = x.delta(&beta).multiply(&y).add(&x.multiply(&y.delta(&beta)));
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn adjoint_is_an_antimultiplicative_involution(x in element(), y in element()) {
        prop_assert_eq!(x.adjoint().adjoint(), x.clone());
        prop_assert!(close(&x.multiply(&y).adjoint(), &y.adjoint().multiply(&x.adjoint()), 1e-14));
    }

    #[test]
    fn rotation_is_multiplicative_and_twists_delta(x in element(), y in element(), theta in -4.0f64..4.0) {
        let beta = BetaFunction::canonical();
        prop_assert!(close(&x.multiply(&y).rotate(theta), &x.rotate(theta).multiply(&y.rotate(theta)), 1e-13));
        let lhs = x.delta(&beta).rotate(theta);
        let rhs = x.rotate(theta).delta(&beta).scale(C64::from_polar(1.0, theta));
        prop_assert!(close(&lhs, &rhs, 1e-13));
    }

    #[test]
    fn json_roundtrip(x in element()) {
        prop_assert_eq!(AlgebraElement::from_json(&x.to_json()).unwrap(), x);
    }

    #[test]
    fn cauchy_schwarz(u in tail_vector(), v in tail_vector()) {
        let p = params();
        for kind in [NormKind::W, NormKind::WPrime] {
            let (ip, err) = u.inner(&v, &p, kind);
            let nu = u.weighted_norm(&p, kind);
            let nv = v.weighted_norm(&p, kind);
            prop_assert!(ip.norm() - err <= (nu.value + nu.error) * (nv.value + nv.error) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn qn_inverts_dn(g in finite_vector(), n in -10i64..=10) {
        let spec = ModeOperatorSpec::canonical(n, params());
        let rt = roundtrip_errors(&g, &spec).unwrap();
        prop_assert!(rt.dq <= 1e-10, "DQ residual {}", rt.dq);
        prop_assert!(rt.qd <= 1e-10 + rt.qd_truncation, "QD residual {}", rt.qd);
    }

    #[test]
    fn qn_inverts_dn_for_perturbed_beta(g in finite_vector(), n in -10i64..=10, seed in 0u64..1000) {
        let beta = random_beta(&mut qannulus::sample::rng(seed));
        let spec = ModeOperatorSpec::new(n, beta, params());
        let rt = roundtrip_errors(&g, &spec).unwrap();
        prop_assert!(rt.dq <= 1e-10 && rt.qd <= 1e-10 + rt.qd_truncation, "{:?}", rt);
    }

    #[test]
    fn qn_image_is_supported_left_of_input(g in finite_vector(), n in -6i64..=6) {
        let spec = ModeOperatorSpec::canonical(n, params());
        let img = apply_qn(&g, &spec).unwrap();
        let (_, hi) = g.support().unwrap();
        for l in hi + 1..hi + 5 {
            prop_assert_eq!(img.vector.get(l), C64::new(0.0, 0.0));
        }
        let back = apply_dn(&img.vector, &spec).unwrap();
        prop_assert!(back.sub(&g).sup_scale() <= 1e-10 * (1.0 + g.sup_scale()));
    }

    #[test]
    fn d_is_rotation_covariant(x in element(), theta in -4.0f64..4.0) {
        let f = FourierVector::from_algebra(&x);
        let res = check_covariance(&f, theta, &BetaFunction::canonical(), &params()).unwrap();
        prop_assert!(res.relative() <= 1e-12, "{:?}", res);
    }

    #[test]
    fn d_is_linear(x in element(), y in element(), s in scalar()) {
        let (p, beta) = (params(), BetaFunction::canonical());
        let fx = FourierVector::from_algebra(&x);
        let fy = FourierVector::from_algebra(&y);
        let lhs = apply_d(&fx.scale(s).add(&fy), &beta, &p).unwrap();
        let rhs = apply_d(&fx, &beta, &p).unwrap().scale(s).add(&apply_d(&fy, &beta, &p).unwrap());
        let scale = lhs.norm(&p, NormKind::WPrime).value + rhs.norm(&p, NormKind::WPrime).value;
        prop_assert!(lhs.sub(&rhs).norm(&p, NormKind::WPrime).value <= 1e-13 * (1.0 + scale));
    }

    #[test]
    fn kernel_ratio_along_rows(n in -12i64..=12, l in -15i64..=15, d in 0i64..20) {
        // K(l−1, j)/K(l, j) = xβ(l−1)/β(l−1+n).
        let spec = ModeOperatorSpec::canonical(n, params());
        let beta = BetaFunction::canonical();
        let j = l + d;
        let a = qn_kernel(&spec, l - 1, j);
        let b = qn_kernel(&spec, l, j);
        let expected = spec.x() * beta.value(l - 1) / beta.value(l - 1 + n);
        let ratio = f64::from(a.sign * b.sign) * (a.log_magnitude - b.log_magnitude).exp();
        prop_assert!((ratio - expected).abs() <= 1e-12 * expected.abs());
    }
}
