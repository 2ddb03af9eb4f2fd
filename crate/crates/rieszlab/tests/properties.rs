//! Property tests for the spec invariants that hold on all inputs.

use proptest::prelude::*;
use rieszlab::flatness::psi_annulus;
use rieszlab::geometry::{dot, norm, Hyperplane};
use rieszlab::measure::{gen_cantor, DiscreteMeasure, Provenance};
use rieszlab::riesz::{kernel_eval, riesz_transform, EvalMethod, KernelSpec};

fn unit2(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kernel_antisymmetry_full_and_restricted(
        x0 in -3.0f64..3.0, x1 in -3.0f64..3.0,
        y0 in -3.0f64..3.0, y1 in -3.0f64..3.0,
        delta in 0.0f64..0.5,
        angle in 0.0f64..std::f64::consts::PI,
    ) {
        let x = [x0, x1];
        let y = [y0, y1];
        prop_assume!(x != y);
        let full = KernelSpec::full(delta).unwrap();
        let a = kernel_eval(&full, &x, &y).unwrap();
        let b = kernel_eval(&full, &y, &x).unwrap();
        for c in 0..2 {
            prop_assert_eq!(a[c], -b[c]);
        }
        let h = Hyperplane::new(unit2(angle), vec![0.0, 0.0]).unwrap();
        let spec = KernelSpec::restricted(h, delta).unwrap();
        let a = kernel_eval(&spec, &x, &y).unwrap();
        let b = kernel_eval(&spec, &y, &x).unwrap();
        for c in 0..2 {
            prop_assert_eq!(a[c], -b[c]);
        }
    }

    #[test]
    fn kernel_antisymmetry_reflected(
        x0 in -3.0f64..3.0, x1 in 0.0f64..3.0,
        y0 in -3.0f64..3.0, y1 in 0.0f64..3.0,
        delta in 0.0f64..0.5,
    ) {
        let x = [x0, x1];
        let y = [y0, y1];
        prop_assume!(x != y);
        let boundary = Hyperplane::coordinate(2, 1, 0.0);
        let plane = Hyperplane::coordinate(2, 1, 0.0);
        let spec = KernelSpec::reflected(plane, boundary, delta).unwrap();
        let a = kernel_eval(&spec, &x, &y).unwrap();
        let b = kernel_eval(&spec, &y, &x).unwrap();
        for c in 0..2 {
            prop_assert!((a[c] + b[c]).abs() <= 1e-12 * (1.0 + a[c].abs()));
        }
    }

    #[test]
    fn kernel_bounds(
        x0 in -2.0f64..2.0, x1 in -2.0f64..2.0,
        delta in 1e-3f64..0.5,
    ) {
        let x = [x0, x1];
        prop_assume!(x != [0.0, 0.0]);
        // |K_delta(x)| <= delta^-d (d = 1 here)
        let spec = KernelSpec::full(delta).unwrap();
        let v = kernel_eval(&spec, &x, &[0.0, 0.0]).unwrap();
        prop_assert!(norm(&v) <= 1.0 / delta + 1e-12);
        // |K(x)| = |x|^-d exactly at delta = 0
        let spec = KernelSpec::full(0.0).unwrap();
        let v = kernel_eval(&spec, &x, &[0.0, 0.0]).unwrap();
        let r = norm(&x);
        prop_assert!((norm(&v) - 1.0 / r).abs() <= 1e-12 * (1.0 + 1.0 / r));
    }

    #[test]
    fn restricted_kernel_lies_in_h(
        x0 in -2.0f64..2.0, x1 in -2.0f64..2.0,
        angle in 0.0f64..std::f64::consts::PI,
        delta in 0.0f64..0.3,
    ) {
        let x = [x0, x1];
        prop_assume!(norm(&x) > 1e-6);
        let h = Hyperplane::new(unit2(angle), vec![0.0, 0.0]).unwrap();
        let spec = KernelSpec::restricted(h.clone(), delta).unwrap();
        let v = kernel_eval(&spec, &x, &[0.0, 0.0]).unwrap();
        prop_assert!(dot(&v, h.normal()).abs() <= 1e-12);
    }

    #[test]
    fn blow_up_round_trip(
        z0 in -1.0f64..1.0, z1 in -1.0f64..1.0,
        lambda in 0.05f64..4.0,
    ) {
        let m = gen_cantor(2).unwrap();
        let z = vec![z0, z1];
        let blown = m.blow_up(&z, lambda).unwrap();
        let back = blown.blow_up(&vec![0.0, 0.0], 1.0 / lambda).unwrap();
        for i in 0..m.len() {
            let orig = m.point(i);
            let b = back.point(i);
            for c in 0..2 {
                prop_assert!((b[c] + z[c] - orig[c]).abs() <= 1e-12);
            }
            prop_assert!((back.weight(i) - m.weight(i)).abs() <= 1e-12 * m.weight(i));
        }
    }

    #[test]
    fn ball_mass_monotone_in_radius(
        x0 in -0.5f64..1.5, x1 in -0.5f64..1.5,
        r1 in 0.01f64..1.0,
        grow in 1.0f64..3.0,
    ) {
        let m = gen_cantor(3).unwrap();
        let x = [x0, x1];
        let small = m.ball_mass(&x, r1);
        let large = m.ball_mass(&x, r1 * grow);
        prop_assert!(small <= large);
    }

    #[test]
    fn annulus_splits_additively(
        p0 in -2.0f64..2.0, p1 in -2.0f64..2.0,
        r in 0.01f64..0.2, mid in 0.21f64..0.5, big in 0.51f64..1.0,
    ) {
        let z = [0.0, 0.0];
        let x = [p0, p1];
        let whole = psi_annulus(&z, r, big, &x);
        let split = psi_annulus(&z, r, mid, &x) + psi_annulus(&z, mid, big, &x);
        prop_assert!((whole - split).abs() <= 1e-12);
    }

    #[test]
    fn bilinear_form_antisymmetric_under_swap(
        seed in 0u64..1000,
        delta in 0.07f64..0.3,
        angle in 0.0f64..std::f64::consts::PI,
    ) {
        // <R f, g e> is antisymmetric under (f <-> g) with a sign flip
        use rand::Rng;
        let m = gen_cantor(2).unwrap();
        let mut rng = rieszlab::util::seeded_rng(seed);
        let n = m.len();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = unit2(angle);
        let spec = KernelSpec::full(delta).unwrap();
        let pair = |a: &[f64], b: &[f64]| -> f64 {
            let fs = riesz_transform(&m, a, &spec, m.coords(), EvalMethod::Naive).unwrap();
            (0..n).map(|i| dot(fs.value(i), &e) * b[i] * m.weight(i)).sum()
        };
        let fg = pair(&f, &g);
        let gf = pair(&g, &f);
        prop_assert!((fg + gf).abs() <= 1e-10 * (1.0 + fg.abs()));
    }

    #[test]
    fn weights_must_be_positive(w in -1.0f64..0.0) {
        let r = DiscreteMeasure::new(
            1,
            vec![0.0, 0.0],
            vec![w],
            0.1,
            Provenance::Custom { tag: "bad".into() },
        );
        prop_assert!(r.is_err());
    }
}
