use std::panic::{catch_unwind, AssertUnwindSafe};

use anyhow::{anyhow, Result};
use serde::Serialize;

use shg_core::medium::{Geometry, MediumProfile};
use shg_core::ode::{fundamental_pair, symmetry_check};
use shg_core::projection::{
    gamma_estimate, cubic_kernel_constant, projection_rate, random_states, t_bound_trial, t_lower_bound_with,
};
use shg_core::Complex64 as C;

use crate::commands::space_for;
use crate::output::Output;
use crate::Level;

const TEST_OMEGAS: [C; 5] = [
    C::new(0.5, 0.0),
    C::new(2.0, 0.0),
    C::new(5.0, 0.0),
    C::new(0.0, 0.3),
    C::new(1.0, 1.0),
];

const TBOUND_OMEGAS: [C; 5] = [
    C::new(0.3, 0.1),
    C::new(0.5, 0.0),
    C::new(1.0, 0.0),
    C::new(1.5, 0.0),
    C::new(2.5, 0.0),
];

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: Option<f64>,
    detail: String,
}

#[derive(Serialize)]
struct GammaRow {
    omega: f64,
    gamma: f64,
    kernel_dim: usize,
    basis_size: usize,
    cokernel_angle: f64,
}

#[derive(Serialize, Default)]
struct Report {
    level: &'static str,
    seed: u64,
    wronskian_max: Option<f64>,
    symmetry_defect: Option<f64>,
    cubic_kernel_constant: Option<f64>,
    cubic_kernel_reference: Option<f64>,
    gamma_table: Vec<GammaRow>,
    tbound_violations: Option<usize>,
    projection_rate_slope: Option<f64>,
    checks: Vec<Check>,
    passed: bool,
}

/// `int chi2 x^2` over [0,1], exact on each polynomial piece.
fn chi2_x2_integral(p: &MediumProfile) -> f64 {
    p.chi2
        .pieces()
        .iter()
        .map(|pc| {
            pc.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let e = k as i32 + 3;
                    c * (pc.b.powi(e) - pc.a.powi(e)) / e as f64
                })
                .sum::<f64>()
        })
        .sum()
}

impl Report {
    /// Runs one check; errors and panics both count as failures.
    fn check(&mut self, name: &'static str, f: impl FnOnce(&mut Report) -> Result<(bool, Option<f64>, String)>) {
        let res = catch_unwind(AssertUnwindSafe(|| f(self)))
            .unwrap_or_else(|_| Err(anyhow!("check panicked")));
        let c = match res {
            Ok((passed, value, detail)) => Check { name, passed, value, detail },
            Err(e) => Check { name, passed: false, value: None, detail: format!("error: {e:#}") },
        };
        println!("{} {name}: {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
        self.checks.push(c);
    }
}

pub fn run(out: &Output, profile: &MediumProfile, n: usize, seed: u64, level: Level) -> Result<u8> {
    let full = matches!(level, Level::Full);
    let g = profile.grid(n)?;
    let space = space_for(profile, n)?;
    let mut rep = Report { level: if full { "full" } else { "quick" }, seed, ..Default::default() };
    // keep the panic hook quiet while checks run
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));

    rep.check("wronskian", |r| {
        let m = TEST_OMEGAS
            .iter()
            .map(|&w| fundamental_pair(w, &profile.q, &g).wronskian_drift())
            .fold(0.0, f64::max);
        r.wronskian_max = Some(m);
        Ok((m <= 1e-8, Some(m), format!("max drift {m:.3e} (<= 1e-8)")))
    });

    rep.check("conjugate_symmetry", |r| {
        let m = TEST_OMEGAS.iter().map(|&w| symmetry_check(w, &profile.q, &g)).fold(0.0, f64::max);
        r.symmetry_defect = Some(m);
        Ok((m <= 1e-10, Some(m), format!("max defect {m:.3e} (<= 1e-10)")))
    });

    rep.check("cubic_kernel_constant", |r| {
        let c = cubic_kernel_constant(profile, &space, if full { 10_000 } else { 2_000 })?;
        r.cubic_kernel_constant = Some(c);
        match profile.geometry {
            Geometry::Radial => {
                let want = 3.0 * 3f64.sqrt() * chi2_x2_integral(profile);
                r.cubic_kernel_reference = Some(want);
                let err = (c - want).abs();
                Ok((err <= 1e-4, Some(c), format!("{c:.8} vs 3 sqrt3 int chi2 x^2 = {want:.8}, err {err:.2e} (<= 1e-4)")))
            }
            Geometry::Interval => Ok((c.is_finite() && c > 0.0, Some(c), format!("{c:.8} (> 0)"))),
        }
    });

    let bound = 0.5 / profile.q_sup().sqrt();
    let w_small = 0.1f64.min(0.5 * bound);
    rep.check("gamma_kernel_dim", |r| {
        let want = space.mode.kernel_dim();
        let mut ok = true;
        for w in [0.0, w_small] {
            let e = gamma_estimate(C::new(w, 0.0), &profile.q, &space, 64)?;
            ok &= e.kernel_dim == want && e.gamma.is_finite();
            r.gamma_table.push(GammaRow {
                omega: w,
                gamma: e.gamma,
                kernel_dim: e.kernel_dim,
                basis_size: e.basis_size,
                cokernel_angle: e.cokernel_angle,
            });
        }
        let dims: Vec<usize> = r.gamma_table.iter().map(|g| g.kernel_dim).collect();
        Ok((ok, None, format!("kernel dims {dims:?} (want {want})")))
    });

    rep.check("t_lower_bound", |r| {
        let per = if full { 100 } else { 20 };
        let mut violations = 0;
        let mut worst = f64::INFINITY;
        for (k, &w) in TBOUND_OMEGAS.iter().enumerate() {
            let trial = t_bound_trial(profile, &space, w, 12);
            for u in random_states(&space, per, 6, seed.wrapping_add(k as u64)) {
                let (lhs, rhs) = t_lower_bound_with(profile, &space, w, &u, &trial);
                worst = worst.min(lhs - rhs);
                if !(lhs >= rhs - 1e-8) {
                    violations += 1;
                }
            }
        }
        r.tbound_violations = Some(violations);
        Ok((
            violations == 0,
            Some(violations as f64),
            format!("{violations}/{} violations, min lhs-rhs {worst:.3e}", per * TBOUND_OMEGAS.len()),
        ))
    });

    if full {
        rep.check("gamma_continuity", |r| {
            let (g0, g1) = match r.gamma_table.as_slice() {
                [a, b, ..] => (a.gamma, b.gamma),
                _ => return Err(anyhow!("gamma table unavailable")),
            };
            let rel = (g1 - g0).abs() / g0;
            Ok((rel <= 0.1, Some(rel), format!("|gamma_{w_small} - gamma_0|/gamma_0 = {rel:.3e} (<= 0.1)")))
        });
        rep.check("projection_rate", |r| {
            let probes = random_states(&space, 50, 5, seed);
            let ws: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|w| w * (2.0 * bound).min(1.0)).collect();
            let (_, slope) = projection_rate(&profile.q, &space, &ws, &probes);
            r.projection_rate_slope = Some(slope);
            Ok(((1.7..=2.3).contains(&slope), Some(slope), format!("log-log slope {slope:.4} in [1.7, 2.3]")))
        });
    }

    std::panic::set_hook(hook);
    rep.passed = rep.checks.iter().all(|c| c.passed);
    out.write_json("verify_report.json", &rep)?;
    Ok(if rep.passed { 0 } else { 1 })
}
