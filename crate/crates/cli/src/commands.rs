use std::fmt::Write as _;

use anyhow::{Context as _, Result};
use serde::Serialize;

use shg_core::forced::{fixed_point_solve, Branch, FixedPointOptions};
use shg_core::io::{parse_omega, parse_window};
use shg_core::medium::{load_profile, Geometry, MediumProfile, ProfileFn};
use shg_core::projection::{blowup_probe, BlowupOptions, ProbeMode};
use shg_core::rootscan::{admissible, real_nodes, scan_complex, scan_real, AdmissibleRegion};
use shg_core::spectral::{evaluate, SpectralKind};
use shg_core::xspace::{DiscreteXSpace, SpaceMode};
use shg_core::{Complex64 as C, Error};

use crate::output::{sha256_hex, Output};
use crate::{verify, Cli, Command, ConfigError, Figure, Mode};

const MIN_N: usize = 201;

pub fn builtin(name: &str) -> Option<MediumProfile> {
    Some(match name {
        "fig1" => MediumProfile::figure1(),
        "fig2a" => MediumProfile::figure2a(),
        "fig2b" => MediumProfile::figure2b(),
        "unit" => {
            let one = ProfileFn::constant(1.0);
            MediumProfile::new(one.clone(), one.clone(), one, ProfileFn::zero(), Geometry::Interval).ok()?
        }
        _ => return None,
    })
}

/// Resolves `--config` (or the command default) to a profile and the hash recorded in headers.
fn resolve(config: Option<&str>, default: &str) -> Result<(MediumProfile, String)> {
    let spec = config.unwrap_or(default);
    if let Some(name) = spec.strip_prefix("builtin:") {
        let p = builtin(name).ok_or_else(|| {
            ConfigError(format!("unknown builtin profile '{name}' (fig1|fig2a|fig2b|unit)"))
        })?;
        return Ok((p, sha256_hex(spec.as_bytes())));
    }
    let text = std::fs::read(spec).map_err(|e| ConfigError(format!("reading config {spec}: {e}")))?;
    let utf8 = String::from_utf8(text.clone()).map_err(|_| ConfigError(format!("{spec} is not UTF-8")))?;
    Ok((load_profile(&utf8)?, sha256_hex(&text)))
}

fn space_mode(p: &MediumProfile) -> SpaceMode {
    match p.geometry {
        Geometry::Radial => SpaceMode::XDiamond,
        Geometry::Interval => SpaceMode::X,
    }
}

pub fn space_for(p: &MediumProfile, n: usize) -> Result<DiscreteXSpace> {
    Ok(DiscreteXSpace::new(p.grid(n)?, space_mode(p)))
}

pub fn run(cli: &Cli) -> Result<u8> {
    if cli.n % 2 == 0 || cli.n < MIN_N {
        return Err(ConfigError(format!("--n must be odd and at least {MIN_N}, got {}", cli.n)).into());
    }
    let default = match &cli.command {
        Command::Scan { kind, .. } => match kind.as_str() {
            "u1" => "builtin:fig2a",
            "u2" => "builtin:fig2b",
            _ => "builtin:fig1",
        },
        Command::ProbeBlowup { .. } => "builtin:unit",
        _ => "builtin:fig1",
    };
    let (profile, hash) = match &cli.command {
        // the figures are pinned to their own profiles
        Command::Figures { .. } => {
            if cli.config.is_some() {
                log::warn!("figures uses the built-in profiles; --config is ignored");
            }
            (MediumProfile::figure1(), sha256_hex(b"builtin:figures"))
        }
        _ => resolve(cli.config.as_deref(), default)?,
    };
    let out = Output::new(&cli.out, &hash, cli.n)?;
    match &cli.command {
        Command::Figures { which, window, step, f_zero } => {
            figures(&out, cli.n, *which, window, *step, *f_zero)
        }
        Command::Scan { kind, window, step, complex_center, complex_radius, grid_step } => {
            let kind: SpectralKind = kind.parse()?;
            let g = profile.grid(cli.n)?;
            let set = match (complex_center, complex_radius) {
                (None, None) => {
                    let (a, b) = parse_window(window)?;
                    scan_real(kind, &profile, a, b, *step, &g)?
                }
                (c, r) => {
                    let center = c.as_deref().map(parse_omega).transpose()?.unwrap_or_default();
                    let radius = r.ok_or_else(|| ConfigError("--complex-radius is required".into()))?;
                    scan_complex(kind, &profile, center, radius, *grid_step, &g)?
                }
            };
            for d in &set.diagnostics {
                log::warn!("{d}");
            }
            let body = Output::render(|w| set.write_csv(w))?;
            let path = out.write(&format!("roots_{kind}.csv"), &body)?;
            println!("{} root(s) of {kind} -> {}", set.len(), path.display());
            Ok(0)
        }
        Command::Lambda { rho, delta, grid_step, check } => {
            let g = profile.grid(cli.n)?;
            let region = AdmissibleRegion::scan(&profile, *rho, *delta, *grid_step, &g)?;
            let body = Output::render(|w| region.lambda_approx.write_csv(w))?;
            let path = out.write("lambda.csv", &body)?;
            println!(
                "{} zeta zero(s) in |w| <= {} -> {}",
                region.lambda_approx.len(),
                rho + delta,
                path.display()
            );
            if let Some(list) = check {
                let mut body = String::from("omega_re,omega_im,distance,admissible\n");
                for item in list.split(';') {
                    let w = parse_omega(item)?;
                    let ok = admissible(w, &region);
                    let d = region.distance_to_lambda(w);
                    writeln!(body, "{:e},{:e},{d:e},{ok}", w.re, w.im)?;
                    println!("w = {w}: distance {d:.6e}, admissible {ok}");
                }
                out.write("admissible.csv", &body)?;
            }
            Ok(0)
        }
        Command::SolveForced { omega, branch, tol, max_iter } => {
            let omega = parse_omega(omega)?;
            let branch: Branch = branch.parse()?;
            solve(&out, &profile, cli.n, omega, branch, *tol, *max_iter)
        }
        Command::Verify { level } => verify::run(&out, &profile, cli.n, cli.seed, *level),
        Command::ProbeBlowup { omegas, mode, radius, seeds, basis } => {
            let ws: Vec<f64> = omegas
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| ConfigError(format!("bad frequency '{s}'"))))
                .collect::<std::result::Result<_, _>>()?;
            let space = space_for(&profile, cli.n)?;
            let mode = match mode {
                Mode::Free => ProbeMode::Free { scale: *radius },
                Mode::Sphere => ProbeMode::Sphere { radius: *radius },
            };
            let opts = BlowupOptions { mode, seeds: *seeds, basis_size: *basis, seed: cli.seed, ..Default::default() };
            let rows = blowup_probe(&profile, &space, &ws, opts)?;
            let mut body = String::from("omega,best_residual,norm,min_residual,max_residual,seeds\n");
            for r in &rows {
                let lo = r.residuals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = r.residuals.iter().copied().fold(0.0, f64::max);
                writeln!(body, "{:e},{:e},{:e},{lo:e},{hi:e},{}", r.omega, r.best_residual, r.norm, r.residuals.len())?;
                println!("w = {}: best residual {:.4e} at norm {:.4e}", r.omega, r.best_residual, r.norm);
            }
            out.write("blowup.csv", &body)?;
            Ok(0)
        }
    }
}

struct FigureSpec {
    name: &'static str,
    kind: SpectralKind,
    power: i32,
    label: &'static str,
}

const FIGURES: [FigureSpec; 3] = [
    FigureSpec { name: "fig1", kind: SpectralKind::Zeta, power: 10, label: "w^10 zeta(w)" },
    FigureSpec { name: "fig2a", kind: SpectralKind::Upsilon1, power: 3, label: "w^3 Y1(w)" },
    FigureSpec { name: "fig2b", kind: SpectralKind::Upsilon2, power: 6, label: "w^6 Y2(w)" },
];

fn figures(out: &Output, n: usize, which: Figure, window: &str, step: f64, f_zero: bool) -> Result<u8> {
    let (a, b) = parse_window(window)?;
    if !(step > 0.0) {
        return Err(ConfigError(format!("--step must be positive, got {step}")).into());
    }
    let chosen: Vec<&FigureSpec> = FIGURES
        .iter()
        .filter(|f| matches!((which, f.name), (Figure::All, _) | (Figure::Fig1, "fig1") | (Figure::Fig2a, "fig2a") | (Figure::Fig2b, "fig2b")))
        .collect();
    // the scaled curves vanish at 0 by construction; start one step in
    let nodes: Vec<f64> = real_nodes(a, b, step).into_iter().filter(|&w| w != 0.0).collect();
    for fig in chosen {
        let mut p = builtin(fig.name).expect("builtin figure profile");
        if f_zero {
            p = p.with_f(ProfileFn::zero());
        }
        let g = p.grid(n)?;
        let values: Vec<f64> = nodes
            .iter()
            .map(|&w| evaluate(fig.kind, C::new(w, 0.0), &p, &g).map(|v| w.powi(fig.power) * v.re))
            .collect::<shg_core::Result<_>>()
            .with_context(|| format!("evaluating {}", fig.name))?;
        let mut csv = String::from("omega,scaled\n");
        for (w, v) in nodes.iter().zip(&values) {
            writeln!(csv, "{w:e},{v:e}")?;
        }
        out.write(&format!("{}.csv", fig.name), &csv)?;
        let gp = format!(
            "set datafile separator ','\nset key off\nset xlabel 'w'\nset ylabel '{label}'\nset xzeroaxis\nplot '{name}.csv' every ::1 using 1:2 with lines\n",
            label = fig.label,
            name = fig.name
        );
        out.write(&format!("{}.gp", fig.name), &gp)?;
        let changes = values.windows(2).filter(|v| v[0] * v[1] < 0.0).count();
        println!("{}: {} points, {changes} sign change(s)", fig.name, values.len());
    }
    Ok(0)
}

#[derive(Serialize)]
struct ComplexOut {
    re: f64,
    im: f64,
}

impl From<C> for ComplexOut {
    fn from(z: C) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Serialize)]
struct ForcedOut {
    omega: ComplexOut,
    branch: &'static str,
    c_omega: ComplexOut,
    ctilde_omega: ComplexOut,
    zeta: ComplexOut,
    k1: ComplexOut,
    k2: ComplexOut,
    k3: ComplexOut,
    iterations: usize,
    contraction_estimate: f64,
    final_residual: f64,
    increment_history: Vec<f64>,
}

fn solve(
    out: &Output,
    profile: &MediumProfile,
    n: usize,
    omega: C,
    branch: Branch,
    tol: f64,
    max_iter: usize,
) -> Result<u8> {
    let g = profile.grid(n)?;
    let rep = match fixed_point_solve(omega, profile, &g, FixedPointOptions { branch, tol, max_iter }) {
        Ok(r) => r,
        Err(Error::NoContraction { history }) => {
            let mut body = String::from("iteration,increment\n");
            for (k, d) in history.iter().enumerate() {
                writeln!(body, "{},{d:e}", k + 1)?;
            }
            out.write("forced_history.csv", &body)?;
            return Err(Error::NoContraction { history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let b = &rep.base;
    let report = ForcedOut {
        omega: omega.into(),
        branch: b.branch_tag.name(),
        c_omega: b.c_omega.into(),
        ctilde_omega: b.ctilde_omega.into(),
        zeta: b.zeta_value.into(),
        k1: b.kmoments.k1.into(),
        k2: b.kmoments.k2.into(),
        k3: b.kmoments.k3.into(),
        iterations: rep.iterations,
        contraction_estimate: rep.contraction_estimate,
        final_residual: rep.final_residual,
        increment_history: rep.increment_history.clone(),
    };
    out.write_json("forced_report.json", &report)?;
    let body = Output::render(|w| rep.write_solution_csv(w))?;
    out.write("forced_solution.csv", &body)?;
    println!(
        "converged in {} iteration(s), residual {:.3e}, contraction {:.3e}",
        rep.iterations, rep.final_residual, rep.contraction_estimate
    );
    Ok(0)
}
