use proptest::prelude::*;

use shg_core::io::{parse_complex, parse_window};
use shg_core::medium::{Geometry, Grid, MediumProfile, Piece, ProfileFn};
use shg_core::ode::{fundamental_pair, symmetry_check};
use shg_core::projection::{
    apply_a, first_component, kernel_basis, poly_member, project_kernel, random_states, PolyFamily,
    TrialSpace,
};
use shg_core::spectral::{evaluate, SpectralKind};
use shg_core::xspace::{DiscreteXSpace, SpaceMode};
use shg_core::Complex64 as C;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn sup_norm_dominates_samples(coeffs in prop::collection::vec(-3.0f64..3.0, 1..7)) {
        let p = ProfileFn::poly(coeffs.clone());
        let sup = p.sup_norm();
        let n = 20_001;
        let sampled = (0..n).map(|i| p.eval(i as f64 / (n - 1) as f64).abs()).fold(0.0, f64::max);
        prop_assert!(sup >= sampled - 1e-12);
        // the sampled max misses the true max by at most h^2/8 |p''| on the finest cell
        let d2: f64 = coeffs.iter().enumerate().skip(2)
            .map(|(k, c)| (k * (k - 1)) as f64 * c.abs()).sum();
        let h = 1.0 / (n - 1) as f64;
        prop_assert!(sup <= sampled + h * h / 8.0 * d2 + 1e-12);
    }

    #[test]
    fn piecewise_sup_norm(split in 0.1f64..0.9, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let p = ProfileFn::new(vec![
            Piece { a: 0.0, b: split, coeffs: vec![a] },
            Piece { a: split, b: 1.0, coeffs: vec![0.0, b] },
        ]).unwrap();
        let want = a.abs().max(b.abs()).max((b * split).abs());
        prop_assert!((p.sup_norm() - want).abs() < 1e-12);
    }

    #[test]
    fn wronskian_is_conserved(re in -10.0f64..10.0, im in -2.0f64..2.0) {
        let g = Grid::new(2001).unwrap();
        let q = ProfileFn::poly(vec![1.0, 0.5, -0.25]);
        prop_assert!(fundamental_pair(C::new(re, im), &q, &g).wronskian_drift() <= 1e-8);
    }

    #[test]
    fn conjugate_symmetry(re in -8.0f64..8.0, im in -3.0f64..3.0) {
        let g = Grid::new(1001).unwrap();
        let q = ProfileFn::poly(vec![2.0, -1.0]);
        prop_assert!(symmetry_check(C::new(re, im), &q, &g) <= 1e-10);
    }

    #[test]
    fn spectral_values_are_real_on_real_axis(w in 0.01f64..15.0) {
        let g = Grid::with_breakpoints(1001, &[0.5]).unwrap();
        for (kind, p) in [
            (SpectralKind::Zeta, MediumProfile::figure1()),
            (SpectralKind::Upsilon1, MediumProfile::figure2a()),
            (SpectralKind::Upsilon2, MediumProfile::figure2b()),
        ] {
            let v = evaluate(kind, C::new(w, 0.0), &p, &g).unwrap();
            prop_assert!(v.im.abs() <= 1e-12 * v.re.abs().max(1.0), "{kind}: {v}");
        }
    }

    #[test]
    fn kernel_projection_is_idempotent(re in -0.5f64..0.5, im in -0.5f64..0.5, seed in 0u64..1000) {
        let g = Grid::new(801).unwrap();
        let q = ProfileFn::constant(1.0);
        for mode in [SpaceMode::X, SpaceMode::XDiamond] {
            let sp = DiscreteXSpace::new(g.clone(), mode);
            let b = kernel_basis(C::new(re, im), &q, &sp);
            for u in random_states(&sp, 3, 4, seed) {
                let pu = project_kernel(&sp, &b, &u);
                let ppu = project_kernel(&sp, &b, &pu);
                prop_assert!(sp.norm(&ppu.axpy(C::new(-1.0, 0.0), &pu)) <= 1e-10);
            }
        }
    }

    #[test]
    fn nonlinear_term_is_quadratic(lambda in 0.1f64..5.0, k in 0usize..5) {
        let g = Grid::new(801).unwrap();
        let one = ProfileFn::constant(1.0);
        let p = MediumProfile::new(one.clone(), one.clone(), one, ProfileFn::zero(), Geometry::Interval).unwrap();
        let sp = DiscreteXSpace::new(g.clone(), SpaceMode::X);
        let trial = TrialSpace::polynomial(&sp, Vec::new(), 6);
        let (v, d2) = poly_member(&g, PolyFamily::Plain, k);
        let u = first_component(&g, v, d2);
        let a1 = sp.norm(&apply_a(&p, &sp, &trial, &u));
        let al = sp.norm(&apply_a(&p, &sp, &trial, &u.scale(C::new(lambda, 0.0))));
        prop_assert!((al - lambda * lambda * a1).abs() <= 1e-8 * (1.0 + al));
    }

    #[test]
    fn complex_text_round_trip(re in -1e6f64..1e6, im in -1e6f64..1e6) {
        let text = format!("{re}{im:+}i");
        prop_assert_eq!(parse_complex(&text).unwrap(), C::new(re, im));
    }

    #[test]
    fn window_text_round_trip(a in -1e3f64..1e3, len in 0.0f64..1e3) {
        let b = a + len;
        prop_assert_eq!(parse_window(&format!("{a},{b}")).unwrap(), (a, b));
    }

    #[test]
    fn parsers_never_panic(s in "\\PC{0,24}") {
        let _ = parse_complex(&s);
        let _ = parse_window(&s);
        let _ = shg_core::medium::load_profile(&s);
    }

    #[test]
    fn refinement_keeps_breakpoints(k in 1usize..40) {
        let n = 2 * 8 * k + 1;
        let g = Grid::with_breakpoints(n, &[0.5]).unwrap();
        let r = g.refined();
        prop_assert_eq!(r.n(), 2 * n - 1);
        prop_assert_eq!(r.x(r.breaks()[0]), 0.5);
    }
}
