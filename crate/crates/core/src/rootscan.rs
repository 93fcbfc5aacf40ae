//! Zeros of the spectral functions on the real line and in complex disks, and the
//! admissible region built from them.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{Grid, MediumProfile};
use crate::spectral::{evaluate, SpectralKind};

type C64 = Complex64;

/// Real-axis brackets are refined until shorter than this.
pub const BISECTION_TOL: f64 = 1e-12;
/// Largest imaginary part tolerated on the real axis.
pub const REALITY_TOL: f64 = 1e-12;
const NEWTON_FD_STEP: f64 = 1e-5;
const NEWTON_MAX_ITER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub omega: C64,
    /// `|function(omega)|` at the refined root.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Real { a: f64, b: f64 },
    Disk { center: C64, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub kind: SpectralKind,
    pub roots: Vec<Root>,
    pub window: Window,
    /// Set when the function vanished at every scan point.
    pub degenerate: bool,
    /// Seeds that failed to converge, and similar notes.
    pub diagnostics: Vec<String>,
}

impl RootSet {
    fn empty(kind: SpectralKind, window: Window) -> Self {
        Self { kind, roots: Vec::new(), window, degenerate: false, diagnostics: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// CSV with header `kind,omega_re,omega_im,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,omega_re,omega_im,residual")?;
        for r in &self.roots {
            writeln!(w, "{},{:e},{:e},{:e}", self.kind, r.omega.re, r.omega.im, r.residual)?;
        }
        Ok(())
    }
}

fn real_value(kind: SpectralKind, profile: &MediumProfile, g: &Grid, w: f64) -> Result<f64> {
    let v = evaluate(kind, C64::new(w, 0.0), profile, g)?;
    if v.im.abs() > REALITY_TOL {
        return Err(Error::NonRealProfile { omega: w, imag: v.im });
    }
    Ok(v.re)
}

/// The scan abscissae `a, a + step, ...`, closed at `b`.
pub fn real_nodes(a: f64, b: f64, step: f64) -> Vec<f64> {
    if !(b > a) {
        return Vec::new();
    }
    let m = ((b - a) / step - 1e-9).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (0..m).map(|j| a + j as f64 * step).collect();
    out.push(b);
    out
}

/// Sign changes of the real part on `[a, b]` sampled every `step`, refined by bisection.
pub fn scan_real(
    kind: SpectralKind,
    profile: &MediumProfile,
    a: f64,
    b: f64,
    step: f64,
    g: &Grid,
) -> Result<RootSet> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("scan step must be positive, got {step}")));
    }
    let window = Window::Real { a, b };
    let mut set = RootSet::empty(kind, window);
    let nodes = real_nodes(a, b, step);
    if nodes.is_empty() {
        return Ok(set);
    }
    if a <= 0.0 {
        set.diagnostics
            .push("window includes omega <= 0, where the functions are not sign-definite".into());
    }
    let values: Vec<f64> = nodes
        .par_iter()
        .map(|&w| real_value(kind, profile, g, w))
        .collect::<Result<_>>()?;
    if values.iter().all(|&v| v == 0.0) {
        set.degenerate = true;
        set.diagnostics.push("function vanishes identically on the scan".into());
        return Ok(set);
    }
    let brackets: Vec<(f64, f64, f64, f64)> = (0..nodes.len() - 1)
        .filter_map(|j| {
            let (fl, fr) = (values[j], values[j + 1]);
            if fl != 0.0 && fr != 0.0 && fl.signum() != fr.signum() {
                Some((nodes[j], nodes[j + 1], fl, fr))
            } else {
                None
            }
        })
        .collect();
    let mut roots: Vec<Root> = brackets
        .par_iter()
        .map(|&(lo, hi, flo, fhi)| bisect(kind, profile, g, lo, hi, flo, fhi))
        .collect::<Result<_>>()?;
    for (j, &v) in values.iter().enumerate() {
        if v == 0.0 {
            roots.push(Root { omega: C64::new(nodes[j], 0.0), residual: 0.0 });
        }
    }
    roots.sort_by(|x, y| x.omega.re.total_cmp(&y.omega.re));
    set.roots = roots;
    Ok(set)
}

fn bisect(
    kind: SpectralKind,
    profile: &MediumProfile,
    g: &Grid,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
) -> Result<Root> {
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = real_value(kind, profile, g, mid)?;
        if fm == 0.0 {
            return Ok(Root { omega: C64::new(mid, 0.0), residual: 0.0 });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    // one secant step inside the final bracket; keep whichever point is better
    let mid = 0.5 * (lo + hi);
    let sec = (lo - flo * (hi - lo) / (fhi - flo)).clamp(lo, hi);
    let fmid = real_value(kind, profile, g, mid)?.abs();
    let fsec = real_value(kind, profile, g, sec)?.abs();
    let (w, residual) = if fsec < fmid { (sec, fsec) } else { (mid, fmid) };
    Ok(Root { omega: C64::new(w, 0.0), residual })
}

/// Zeros inside the disk `|w - center| <= radius`: local minima of `|f|` on a square grid
/// seed a damped Newton iteration with a central-difference derivative.
pub fn scan_complex(
    kind: SpectralKind,
    profile: &MediumProfile,
    center: C64,
    radius: f64,
    grid_step: f64,
    g: &Grid,
) -> Result<RootSet> {
    if !(radius > 0.0) || !(grid_step > 0.0) {
        return Err(Error::Domain("complex scan needs positive radius and grid step".into()));
    }
    let window = Window::Disk { center, radius };
    let mut set = RootSet::empty(kind, window);
    let m = (radius / grid_step).ceil() as i64;
    let side = (2 * m + 1) as usize;
    let idx = |i: i64, j: i64| ((i + m) as usize) * side + (j + m) as usize;
    let points: Vec<(i64, i64, C64)> = (-m..=m)
        .flat_map(|i| (-m..=m).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, center + C64::new(i as f64 * grid_step, j as f64 * grid_step)))
        .collect();
    let inside = |w: C64| (w - center).norm() <= radius + 1e-12;
    let mags: Vec<Option<f64>> = points
        .par_iter()
        .map(|&(_, _, w)| {
            if inside(w) {
                evaluate(kind, w, profile, g).map(|v| Some(v.norm()))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let corners = [C64::new(1.0, 1.0), C64::new(1.0, -1.0), C64::new(-1.0, 1.0), C64::new(-1.0, -1.0)];
    let corner_scale = corners
        .iter()
        .map(|c| evaluate(kind, center + radius * c, profile, g).map(|v| v.norm()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(1.0, f64::max);
    let accept = 1e-10 * corner_scale;

    let mut present: Vec<f64> = mags.iter().flatten().copied().collect();
    if present.is_empty() {
        return Ok(set);
    }
    if present.iter().all(|&v| v == 0.0) {
        set.degenerate = true;
        set.diagnostics.push("function vanishes identically on the scan".into());
        return Ok(set);
    }
    present.sort_by(f64::total_cmp);
    let median = present[present.len() / 2];
    let seeds: Vec<C64> = points
        .iter()
        .filter_map(|&(i, j, w)| {
            let v = mags[idx(i, j)]?;
            if v >= 10.0 * median {
                return None;
            }
            for di in -1..=1 {
                for dj in -1..=1 {
                    if (di, dj) == (0, 0) || (i + di).abs() > m || (j + dj).abs() > m {
                        continue;
                    }
                    if let Some(nv) = mags[idx(i + di, j + dj)] {
                        if nv < v {
                            return None;
                        }
                    }
                }
            }
            Some(w)
        })
        .collect();

    let refined: Vec<std::result::Result<Root, String>> = seeds
        .par_iter()
        .map(|&seed| newton(kind, profile, g, seed, accept))
        .collect::<Result<_>>()?;
    let mut roots: Vec<Root> = Vec::new();
    for r in refined {
        match r {
            Ok(root) if inside(root.omega) => {
                if roots.iter().all(|q| (q.omega - root.omega).norm() > grid_step / 2.0) {
                    roots.push(root);
                }
            }
            Ok(root) => set
                .diagnostics
                .push(format!("root {} converged outside the disk; dropped", root.omega)),
            Err(msg) => set.diagnostics.push(msg),
        }
    }
    roots.sort_by(|x, y| {
        x.omega
            .re
            .total_cmp(&y.omega.re)
            .then(x.omega.im.total_cmp(&y.omega.im))
    });
    set.roots = roots;
    Ok(set)
}

fn newton(
    kind: SpectralKind,
    profile: &MediumProfile,
    g: &Grid,
    seed: C64,
    accept: f64,
) -> Result<std::result::Result<Root, String>> {
    let f = |w: C64| evaluate(kind, w, profile, g);
    let mut w = seed;
    let mut fw = f(w)?;
    for _ in 0..NEWTON_MAX_ITER {
        let e = C64::new(NEWTON_FD_STEP, 0.0);
        let d = (f(w + e)? - f(w - e)?) / (2.0 * e);
        if d.norm() == 0.0 || !d.is_finite() {
            return Ok(Err(format!("seed {seed}: vanishing derivative at {w}")));
        }
        let full = fw / d;
        let mut lambda = 1.0;
        let (mut wn, mut fn_) = (w - full, f(w - full)?);
        while fn_.norm() > fw.norm() && lambda > 1e-3 {
            lambda *= 0.5;
            wn = w - lambda * full;
            fn_ = f(wn)?;
        }
        let step = (wn - w).norm();
        w = wn;
        fw = fn_;
        if step <= 1e-12 * w.norm().max(1.0) || fw.norm() == 0.0 {
            break;
        }
    }
    if fw.norm() <= accept && w.is_finite() {
        Ok(Ok(Root { omega: w, residual: fw.norm() }))
    } else {
        Ok(Err(format!("seed {seed}: no convergence (|f| = {:e} at {w})", fw.norm())))
    }
}

/// Frequencies of modulus at most `rho` that stay `delta` away from the forbidden set.
#[derive(Debug, Clone)]
pub struct AdmissibleRegion {
    pub rho: f64,
    pub delta: f64,
    pub lambda_approx: RootSet,
}

impl AdmissibleRegion {
    /// Fails with `Coverage` unless `lambda_approx` was scanned over a disk containing `|w| <= rho + delta`.
    pub fn new(rho: f64, delta: f64, lambda_approx: RootSet) -> Result<Self> {
        if !(rho > 0.0 && delta > 0.0) {
            return Err(Error::Domain(format!("rho and delta must be positive, got {rho}, {delta}")));
        }
        if lambda_approx.kind != SpectralKind::Zeta {
            return Err(Error::Domain("the forbidden set is made of zeta zeros".into()));
        }
        let needed = rho + delta;
        match lambda_approx.window {
            Window::Disk { center, radius } if center.norm() + needed <= radius + 1e-12 => {
                Ok(Self { rho, delta, lambda_approx })
            }
            _ => Err(Error::Coverage { needed }),
        }
    }

    /// Scans zeta over the disk `|w| <= rho + delta` and builds the region.
    pub fn scan(
        profile: &MediumProfile,
        rho: f64,
        delta: f64,
        grid_step: f64,
        g: &Grid,
    ) -> Result<Self> {
        let set = scan_complex(SpectralKind::Zeta, profile, C64::new(0.0, 0.0), rho + delta, grid_step, g)?;
        Self::new(rho, delta, set)
    }

    /// Distance from `omega` to the stored roots and to 0.
    pub fn distance_to_lambda(&self, omega: C64) -> f64 {
        self.lambda_approx
            .roots
            .iter()
            .map(|r| (r.omega - omega).norm())
            .fold(omega.norm(), f64::min)
    }
}

/// `|w| <= rho` and `w` is at least `delta` from every stored root and from 0.
pub fn admissible(omega: C64, region: &AdmissibleRegion) -> bool {
    omega.norm() <= region.rho && region.distance_to_lambda(omega) >= region.delta
}
