//! Slower end-to-end scenarios over the public API.

use shg_core::forced::{build_p, fixed_point_solve, Branch, FixedPointOptions};
use shg_core::medium::{Geometry, Grid, MediumProfile, ProfileFn};
use shg_core::projection::{
    blowup_probe, gamma_estimate, cubic_kernel_constant, lipschitz_probe, BlowupOptions, ProbeMode, TrialSpace,
};
use shg_core::rootscan::{admissible, scan_complex, scan_real, AdmissibleRegion};
use shg_core::spectral::{evaluate, SpectralKind};
use shg_core::xspace::{DiscreteXSpace, SpaceMode};
use shg_core::{Complex64 as C, Error};

fn unit_interval() -> MediumProfile {
    let one = ProfileFn::constant(1.0);
    MediumProfile::new(one.clone(), one.clone(), one, ProfileFn::zero(), Geometry::Interval).unwrap()
}

#[test]
fn complex_zeta_roots_match_real_scan() {
    let p = MediumProfile::figure1();
    let g = p.grid(1001).unwrap();
    let disk = scan_complex(SpectralKind::Zeta, &p, C::new(0.0, 0.0), 3.0, 0.1, &g).unwrap();
    let real = scan_real(SpectralKind::Zeta, &p, 0.05, 3.0, 0.05, &g).unwrap();
    assert!(!real.roots.is_empty());
    for r in &real.roots {
        for target in [r.omega, -r.omega] {
            let hit = disk.roots.iter().any(|d| (d.omega - target).norm() < 1e-6);
            assert!(hit, "{target} missing from {:?}", disk.roots);
        }
    }
    for d in &disk.roots {
        assert!(disk.roots.iter().any(|e| (e.omega - d.omega.conj()).norm() < 1e-8));
        let corner = evaluate(SpectralKind::Zeta, C::new(3.0, 3.0), &p, &g).unwrap().norm();
        assert!(d.residual <= 1e-10 * corner.max(1.0));
    }
}

#[test]
fn admissibility_near_one() {
    let p = MediumProfile::figure1();
    let g = p.grid(1001).unwrap();
    let lambda = scan_complex(SpectralKind::Zeta, &p, C::new(0.0, 0.0), 5.1, 0.1, &g).unwrap();
    let region = AdmissibleRegion::new(5.0, 0.1, lambda).unwrap();
    let near = region.distance_to_lambda(C::new(1.0, 0.0));
    assert_eq!(admissible(C::new(1.0, 0.0), &region), near >= 0.1);
    assert!(admissible(C::new(1.0, 0.0), &region));
    assert!(!admissible(C::new(0.0, 0.0), &region));
    assert!(!admissible(C::new(5.5, 0.0), &region));
}

#[test]
fn forced_solve_rejects_zeta_zero_and_diverges_for_large_chi1() {
    let p = MediumProfile::figure1();
    let g = p.grid(2001).unwrap();
    let roots = scan_real(SpectralKind::Zeta, &p, 1.0, 2.5, 0.05, &g).unwrap();
    let w = roots.roots[0].omega;
    assert!(matches!(build_p(w, &p, &g, Branch::Plus), Err(Error::OnLambda { .. })));
    let strong = p.with_chi1(ProfileFn::constant(1e4));
    let r = fixed_point_solve(C::new(1.0, 0.0), &strong, &g, FixedPointOptions::default());
    assert!(matches!(r, Err(Error::NoContraction { .. })));
}

#[test]
fn contraction_history_is_geometric() {
    let p = MediumProfile::figure1().with_chi1(ProfileFn::constant(100.0));
    let g = p.grid(2001).unwrap();
    let rep = fixed_point_solve(C::new(1.0, 0.0), &p, &g, FixedPointOptions::default()).unwrap();
    let h = &rep.increment_history;
    assert!(rep.contraction_estimate < 1.0);
    for (k, d) in h.iter().enumerate() {
        assert!(*d <= h[0] * rep.contraction_estimate.powi(k as i32) * (1.0 + 1e-9) + 1e-300);
    }
}

#[test]
fn gamma_resolution_and_cokernel() {
    let q = ProfileFn::constant(1.0);
    let g = Grid::new(2001).unwrap();
    for mode in [SpaceMode::X, SpaceMode::XDiamond] {
        let sp = DiscreteXSpace::new(g.clone(), mode);
        let a = gamma_estimate(C::new(0.0, 0.0), &q, &sp, 32).unwrap();
        let b = gamma_estimate(C::new(0.0, 0.0), &q, &sp, 64).unwrap();
        assert!((a.gamma - b.gamma).abs() / b.gamma <= 0.05);
        let c = gamma_estimate(C::new(0.3, 0.2), &q, &sp, 64).unwrap();
        assert_eq!(c.kernel_dim, mode.kernel_dim());
        assert!(c.cokernel_angle <= 1e-3, "{}", c.cokernel_angle);
    }
}

#[test]
fn cubic_kernel_interval_mode_is_stable() {
    let g = Grid::new(2001).unwrap();
    let sp = DiscreteXSpace::new(g, SpaceMode::X);
    let p = unit_interval();
    let a = cubic_kernel_constant(&p, &sp, 10_000).unwrap();
    let b = cubic_kernel_constant(&p, &sp, 20_000).unwrap();
    assert!(a > 0.0);
    assert!((a - b).abs() / b <= 0.02);
}

#[test]
fn nonlinear_term_lipschitz_ratio_is_stable() {
    let g = Grid::new(1001).unwrap();
    let sp = DiscreteXSpace::new(g, SpaceMode::X);
    let p = unit_interval();
    let trial = TrialSpace::polynomial(&sp, Vec::new(), 8);
    let ratios = lipschitz_probe(&p, &sp, &trial, 100, 5);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let first = ratios[..50].iter().copied().fold(0.0, f64::max);
    assert!(max.is_finite() && max > 0.0);
    // the constant is bounded by 3 C_S^2 with C_S the H^2 -> sup embedding constant; it must not drift
    assert!(max <= 1.5 * first, "{first} -> {max}");
}

#[test]
fn decoupled_probe_settles_at_zero() {
    let g = Grid::new(1001).unwrap();
    let sp = DiscreteXSpace::new(g, SpaceMode::X);
    let p = unit_interval().with_chi1(ProfileFn::zero());
    let opts = BlowupOptions { mode: ProbeMode::Free { scale: 0.05 }, seeds: 4, ..Default::default() };
    for row in blowup_probe(&p, &sp, &[0.5, 0.3], opts).unwrap() {
        assert!(row.best_residual < 1e-10, "{row:?}");
        assert!(row.norm < 1e-4, "{row:?}");
    }
}
