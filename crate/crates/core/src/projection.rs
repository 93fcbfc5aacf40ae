//! Finite-dimensional realizations of the linearization, its kernel and the nonlinear term.
//!
//! Trial vectors carry exact second derivatives (polynomials analytically, ODE solutions
//! through their equation), so kernel directions are represented without discretization error.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{Grid, MediumProfile, ProfileFn};
use crate::ode::fundamental_pair;
use crate::quad::{inv_x, sample_segments, seg_at};
use crate::xspace::{DiscreteXSpace, SpaceMode, XVec};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Splits node values into per-segment copies.
fn segmented(g: &Grid, v: &[C64]) -> Vec<Vec<C64>> {
    g.segments().into_iter().map(|(a, b)| v[a..=b].to_vec()).collect()
}

/// Collapses per-segment values to one value per node, taking the later segment at breakpoints.
fn collapse(g: &Grid, segs: &[Vec<C64>]) -> Vec<C64> {
    let mut out = vec![ZERO; g.n()];
    for (s, (a, b)) in g.segments().into_iter().enumerate() {
        out[a..=b].copy_from_slice(&segs[s]);
    }
    out
}

/// `(u1, 0)` with the given second derivative.
pub fn first_component(g: &Grid, u1: Vec<C64>, d2u1: Vec<Vec<C64>>) -> XVec {
    XVec { u1, d2u1, u2: vec![ZERO; g.n()] }
}

/// `(0, u2)`.
pub fn second_component(g: &Grid, u2: Vec<C64>) -> XVec {
    let zeros = vec![ZERO; g.n()];
    XVec { u1: zeros.clone(), d2u1: segmented(g, &zeros), u2 }
}

/// Shifted Legendre polynomial `P_k(2x - 1)` and its first two x-derivatives.
pub fn legendre(k: usize, x: f64) -> (f64, f64, f64) {
    let t = 2.0 * x - 1.0;
    let (mut p0, mut d0, mut s0) = (1.0, 0.0, 0.0);
    if k == 0 {
        return (1.0, 0.0, 0.0);
    }
    let (mut p1, mut d1, mut s1) = (t, 1.0, 0.0);
    for j in 1..k {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * t * p1 - jf * p0) / (jf + 1.0);
        let d2 = d0 + (2.0 * jf + 1.0) * p1;
        let s2 = s0 + (2.0 * jf + 1.0) * d1;
        (p0, d0, s0) = (p1, d1, s1);
        (p1, d1, s1) = (p2, d2, s2);
    }
    (p1, 2.0 * d1, 4.0 * s1)
}

/// Polynomial families used as trial functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyFamily {
    /// `P_k`
    Plain,
    /// `x P_k`, vanishing at 0.
    TimesX,
    /// `x^2 P_k`, vanishing with its derivative at 0.
    TimesX2,
}

/// Values and exact second derivative of one family member.
pub fn poly_member(g: &Grid, family: PolyFamily, k: usize) -> (Vec<C64>, Vec<Vec<C64>>) {
    let mut v = Vec::with_capacity(g.n());
    let mut d2 = Vec::with_capacity(g.n());
    for x in g.nodes() {
        let (p, dp, ddp) = legendre(k, x);
        let (val, sec) = match family {
            PolyFamily::Plain => (p, ddp),
            PolyFamily::TimesX => (x * p, 2.0 * dp + x * ddp),
            PolyFamily::TimesX2 => (x * x * p, 2.0 * p + 4.0 * x * dp + x * x * ddp),
        };
        v.push(C64::new(val, 0.0));
        d2.push(C64::new(sec, 0.0));
    }
    let d2 = segmented(g, &d2);
    (v, d2)
}

/// The first-component family natural for `mode`.
fn h2_family(mode: SpaceMode) -> PolyFamily {
    match mode {
        SpaceMode::X => PolyFamily::Plain,
        SpaceMode::XDiamond => PolyFamily::TimesX,
    }
}

/// Solutions of `y'' + w^2 q y = 0` as first components with exact second derivatives:
/// `(z, ztilde)`.
pub fn kernel_functions(omega: C64, q: &ProfileFn, g: &Grid) -> (XVec, XVec) {
    let pair = fundamental_pair(omega, q, g);
    let qs = sample_segments(q, g);
    let w2 = omega * omega;
    let d2 = |v: &[C64]| -> Vec<Vec<C64>> {
        g.segments()
            .into_iter()
            .enumerate()
            .map(|(s, (a, b))| (a..=b).map(|i| -w2 * seg_at(g, &qs, i, s) * v[i]).collect())
            .collect()
    };
    let z = first_component(g, pair.z.values.clone(), d2(&pair.z.values));
    let t = first_component(g, pair.ztilde.values.clone(), d2(&pair.ztilde.values));
    (z, t)
}

/// Modified Gram-Schmidt, applied twice; vectors whose norm falls below `drop_tol`
/// times their original norm are discarded.
pub fn orthonormalize(space: &DiscreteXSpace, vecs: Vec<XVec>, drop_tol: f64) -> Vec<XVec> {
    let mut out: Vec<XVec> = Vec::with_capacity(vecs.len());
    for v in vecs {
        let n0 = space.norm(&v);
        if n0 == 0.0 {
            continue;
        }
        let mut w = v;
        for _ in 0..2 {
            for e in &out {
                let c = space.inner(&w, e);
                w = w.axpy(-c, e);
            }
        }
        let n = space.norm(&w);
        if n > drop_tol * n0 {
            out.push(w.scale(C64::new(1.0 / n, 0.0)));
        }
    }
    out
}

/// An X-orthonormal basis of the kernel `u'' + w^2 q u = 0` (with `u(0) = 0` in `X_diamond`).
#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub omega: C64,
    pub mode: SpaceMode,
    pub vectors: Vec<XVec>,
}

pub fn kernel_basis(omega: C64, q: &ProfileFn, space: &DiscreteXSpace) -> KernelBasis {
    let (z, t) = kernel_functions(omega, q, &space.grid);
    let raw = match space.mode {
        SpaceMode::XDiamond => vec![z],
        SpaceMode::X => vec![t, z],
    };
    let vectors = orthonormalize(space, raw, 0.0);
    KernelBasis { omega, mode: space.mode, vectors }
}

/// `sum <u, e_j> e_j`.
pub fn project_kernel(space: &DiscreteXSpace, basis: &KernelBasis, u: &XVec) -> XVec {
    basis.vectors.iter().fold(u.zeros_like(), |acc, e| acc.axpy(space.inner(u, e), e))
}

/// Random smooth states: degree-`deg` Legendre combinations in both components.
pub fn random_states(space: &DiscreteXSpace, count: usize, deg: usize, seed: u64) -> Vec<XVec> {
    let g = &space.grid;
    let fam = h2_family(space.mode);
    let basis1: Vec<_> = (0..=deg).map(|k| poly_member(g, fam, k)).collect();
    let basis2: Vec<_> = (0..=deg).map(|k| poly_member(g, PolyFamily::Plain, k).0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> C64 {
        let mut n = || {
            let u: f64 = rng.random::<f64>().max(1e-300);
            let v: f64 = rng.random();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        };
        C64::new(n(), n())
    };
    (0..count)
        .map(|_| {
            let mut u = second_component(g, vec![ZERO; g.n()]);
            for (v, d2) in &basis1 {
                u = u.axpy(gauss(), &first_component(g, v.clone(), d2.clone()));
            }
            for v in &basis2 {
                u = u.axpy(gauss(), &second_component(g, v.clone()));
            }
            let n = space.norm(&u);
            u.scale(C64::new(1.0 / n, 0.0))
        })
        .collect()
}

/// `max ||(P_a - P_b) u|| / ||u||` over the probes.
pub fn projection_difference(
    space: &DiscreteXSpace,
    a: &KernelBasis,
    b: &KernelBasis,
    probes: &[XVec],
) -> f64 {
    probes
        .par_iter()
        .map(|u| {
            let d = project_kernel(space, a, u).axpy(-ONE, &project_kernel(space, b, u));
            space.norm(&d) / space.norm(u)
        })
        .reduce(|| 0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Distance of the kernel projector at each real `omega` from the one at 0, and the log-log slope.
pub fn projection_rate(
    q: &ProfileFn,
    space: &DiscreteXSpace,
    omegas: &[f64],
    probes: &[XVec],
) -> (Vec<f64>, f64) {
    let p0 = kernel_basis(ZERO, q, space);
    let dists: Vec<f64> = omegas
        .iter()
        .map(|&w| projection_difference(space, &kernel_basis(C64::new(w, 0.0), q, space), &p0, probes))
        .collect();
    let slope = loglog_slope(omegas, &dists);
    (dists, slope)
}

/// An X-orthonormal trial basis.
#[derive(Debug, Clone)]
pub struct TrialSpace {
    pub vectors: Vec<XVec>,
}

impl TrialSpace {
    /// Legendre polynomials up to `deg` in each component (vanishing at 0 in `X_diamond`),
    /// preceded by `leading` (kept first, in order).
    pub fn polynomial(space: &DiscreteXSpace, leading: Vec<XVec>, deg: usize) -> Self {
        let g = &space.grid;
        let fam = h2_family(space.mode);
        let mut raw = leading;
        for k in 0..=deg {
            let (v, d2) = poly_member(g, fam, k);
            raw.push(first_component(g, v, d2));
        }
        for k in 0..=deg {
            raw.push(second_component(g, poly_member(g, PolyFamily::Plain, k).0));
        }
        Self { vectors: orthonormalize(space, raw, 1e-10) }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Coefficients `l(e_j)` of a conjugate-linear functional; their 2-norm is the dual norm.
    pub fn functional(&self, l: impl Fn(&XVec) -> C64 + Sync + Send) -> Vec<C64> {
        self.vectors.par_iter().map(l).collect()
    }

    /// Riesz representative `sum l(e_j) e_j`.
    pub fn riesz(&self, coeffs: &[C64]) -> XVec {
        self.vectors
            .iter()
            .zip(coeffs)
            .fold(self.vectors[0].zeros_like(), |acc, (e, c)| acc.axpy(*c, e))
    }
}

pub fn dual_norm(coeffs: &[C64]) -> f64 {
    coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Coefficient samples and the weight attached to the space mode.
struct Coefs {
    q: Vec<Vec<f64>>,
    chi1: Vec<Vec<f64>>,
    chi2: Vec<Vec<f64>>,
    radial: bool,
}

impl Coefs {
    fn new(profile: &MediumProfile, space: &DiscreteXSpace) -> Self {
        let g = &space.grid;
        Self {
            q: sample_segments(&profile.q, g),
            chi1: sample_segments(&profile.chi1, g),
            chi2: sample_segments(&profile.chi2, g),
            radial: space.mode == SpaceMode::XDiamond,
        }
    }

    fn weight(&self, g: &Grid, i: usize) -> f64 {
        if self.radial {
            inv_x(g, i)
        } else {
            1.0
        }
    }
}

/// `int (chi1 u2 conj(u1) conj(phi2) + chi2 u1^2 conj(phi1)) w`, `w = 1/x` in `X_diamond`.
fn a_form_with(space: &DiscreteXSpace, c: &Coefs, u: &XVec, phi: &XVec) -> C64 {
    let g = &space.grid;
    space.integrate(|i, s| {
        let w = c.weight(g, i);
        w * (seg_at(g, &c.chi1, i, s) * u.u2[i] * u.u1[i].conj() * phi.u2[i].conj()
            + seg_at(g, &c.chi2, i, s) * u.u1[i] * u.u1[i] * phi.u1[i].conj())
    })
}

pub fn a_form(profile: &MediumProfile, space: &DiscreteXSpace, u: &XVec, phi: &XVec) -> C64 {
    a_form_with(space, &Coefs::new(profile, space), u, phi)
}

/// Riesz representative of the nonlinear term on `trial`.
pub fn apply_a(profile: &MediumProfile, space: &DiscreteXSpace, trial: &TrialSpace, u: &XVec) -> XVec {
    let c = Coefs::new(profile, space);
    trial.riesz(&trial.functional(|e| a_form_with(space, &c, u, e)))
}

/// Empirical Lipschitz ratios `||A(u) - A(v)|| / (M max(||u||, ||v||) ||u - v||)` for random
/// pairs in the unit ball.
pub fn lipschitz_probe(
    profile: &MediumProfile,
    space: &DiscreteXSpace,
    trial: &TrialSpace,
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    let states = random_states(space, 2 * trials, 4, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let radii: Vec<f64> = (0..2 * trials).map(|_| rng.random_range(0.05..1.0)).collect();
    let m = profile.m_bound();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let u = states[2 * t].scale(C64::new(radii[2 * t], 0.0));
            let v = states[2 * t + 1].scale(C64::new(radii[2 * t + 1], 0.0));
            let diff = apply_a(profile, space, trial, &u).axpy(-ONE, &apply_a(profile, space, trial, &v));
            let scale = m * space.norm(&u).max(space.norm(&v)) * space.norm(&u.axpy(-ONE, &v));
            space.norm(&diff) / scale
        })
        .collect()
}

/// `int (u1'' + w^2 q u1) conj(phi2) + u2 conj(phi1'' + 4 conj(w)^2 q phi1)`.
fn l_form_with(space: &DiscreteXSpace, c: &Coefs, omega: C64, u: &XVec, phi: &XVec) -> C64 {
    let g = &space.grid;
    let w2 = omega * omega;
    let start = |s: usize| if s == 0 { 0 } else { g.breaks()[s - 1] };
    space.integrate(|i, s| {
        let j = i - start(s);
        let q = seg_at(g, &c.q, i, s);
        (u.d2u1[s][j] + w2 * q * u.u1[i]) * phi.u2[i].conj()
            + u.u2[i] * (phi.d2u1[s][j].conj() + 4.0 * w2 * q * phi.u1[i].conj())
    })
}

/// The full form `T(u, phi) = L(u, phi) + w^2 A(u, phi)`.
pub fn t_form(profile: &MediumProfile, space: &DiscreteXSpace, omega: C64, u: &XVec, phi: &XVec) -> C64 {
    let c = Coefs::new(profile, space);
    l_form_with(space, &c, omega, u, phi) + omega * omega * a_form_with(space, &c, u, phi)
}

/// Lower-bound check for `||T(u)||`: returns `(lhs, rhs)` where `lhs` is the dual norm of
/// `T(u, .)` on a trial space led by `(z at -2 conj(w), 0)`, and `rhs` is
/// `|w|^2 / ||z_{2w}|| * |int chi2 u1^2 z_{2w} w|`.
pub fn t_lower_bound_check(
    profile: &MediumProfile,
    space: &DiscreteXSpace,
    omega: C64,
    u: &XVec,
) -> (f64, f64) {
    let trial = t_bound_trial(profile, space, omega, 12);
    t_lower_bound_with(profile, space, omega, u, &trial)
}

/// The trial space used by [`t_lower_bound_check`], reusable across many states.
pub fn t_bound_trial(profile: &MediumProfile, space: &DiscreteXSpace, omega: C64, deg: usize) -> TrialSpace {
    let (zm, _) = kernel_functions(-2.0 * omega.conj(), &profile.q, &space.grid);
    TrialSpace::polynomial(space, vec![zm], deg)
}

pub fn t_lower_bound_with(
    profile: &MediumProfile,
    space: &DiscreteXSpace,
    omega: C64,
    u: &XVec,
    trial: &TrialSpace,
) -> (f64, f64) {
    let c = Coefs::new(profile, space);
    let g = &space.grid;
    let coeffs = trial.functional(|e| {
        l_form_with(space, &c, omega, u, e) + omega * omega * a_form_with(space, &c, u, e)
    });
    let lhs = dual_norm(&coeffs);
    let (z2, _) = kernel_functions(2.0 * omega, &profile.q, g);
    let z2_norm = space.norm(&z2);
    let integral = space.integrate(|i, s| {
        seg_at(g, &c.chi2, i, s) * u.u1[i] * u.u1[i] * z2.u1[i] * c.weight(g, i)
    });
    let rhs = omega.norm_sqr() / z2_norm * integral.norm();
    (lhs, rhs)
}

fn check_chi2(chi2: &ProfileFn, g: &Grid) -> Result<()> {
    let s = sample_segments(chi2, g);
    let min = s.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let max = s.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if min < -1e-12 {
        return Err(Error::DegenerateChi2(format!("chi2 reaches {min:e} < 0")));
    }
    if max <= 1e-12 {
        return Err(Error::DegenerateChi2("chi2 vanishes on the grid".into()));
    }
    Ok(())
}

/// Radical inverse of `i` in `base` (one coordinate of a Halton sequence).
fn halton(mut i: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Plain Nelder-Mead minimization from `x0` with initial simplex edge `step`.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=n)
        .map(|k| {
            let mut x = x0.to_vec();
            if k > 0 {
                x[k - 1] += step;
            }
            let fx = f(&x);
            (x, fx)
        })
        .collect();
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[n].1 - simplex[0].1).abs() <= tol * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|p| p.0[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|d| centroid[d] + t * (simplex[n].0[d] - centroid[d])).collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = best.iter().zip(&p.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    p.1 = f(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// `min ||P_{N_0} A(v)||` over unit `v` in the zero-frequency kernel.
///
/// In `X_diamond` the kernel is one-dimensional and the minimum is the single value.
/// In `X`, `v = cos(t) e1 + sin(t) e^{i p} e2` (the overall phase drops out) is sampled on a
/// Halton set of `samples` points and the best ten are refined by Nelder-Mead.
pub fn cubic_kernel_constant(profile: &MediumProfile, space: &DiscreteXSpace, samples: usize) -> Result<f64> {
    let g = &space.grid;
    check_chi2(&profile.chi2, g)?;
    let basis = kernel_basis(ZERO, &profile.q, space);
    let c = Coefs::new(profile, space);
    let e: Vec<&XVec> = basis.vectors.iter().collect();
    let k = e.len();
    // t[a][b][c] = int chi2 e_a e_b conj(e_c) w
    let mut t = vec![vec![vec![ZERO; k]; k]; k];
    for a in 0..k {
        for b in 0..k {
            for cc in 0..k {
                t[a][b][cc] = space.integrate(|i, s| {
                    seg_at(g, &c.chi2, i, s) * e[a].u1[i] * e[b].u1[i] * e[cc].u1[i].conj() * c.weight(g, i)
                });
            }
        }
    }
    let value = |alpha: &[C64]| -> f64 {
        (0..k)
            .map(|cc| {
                let mut s = ZERO;
                for a in 0..k {
                    for b in 0..k {
                        s += alpha[a] * alpha[b] * t[a][b][cc];
                    }
                }
                s.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    };
    if k == 1 {
        return Ok(value(&[ONE]));
    }
    let obj = |p: &[f64]| value(&[C64::new(p[0].cos(), 0.0), C64::from_polar(p[0].sin(), p[1])]);
    let mut pts: Vec<(f64, [f64; 2])> = (1..=samples)
        .into_par_iter()
        .map(|i| {
            let p = [halton(i, 2) * std::f64::consts::FRAC_PI_2, halton(i, 3) * std::f64::consts::TAU];
            (obj(&p), p)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = pts
        .iter()
        .take(10)
        .map(|(_, p)| nelder_mead(obj, p, 0.05, 1e-14, 500).1)
        .fold(f64::INFINITY, f64::min);
    Ok(best.min(pts[0].0))
}

/// Discrete realization of the inverse bound of the linearization.
#[derive(Debug, Clone)]
pub struct GammaEstimate {
    pub omega: C64,
    /// Reciprocal of the smallest singular value above the kernel threshold.
    pub gamma: f64,
    /// Singular values below `1e-8` times the largest.
    pub kernel_dim: usize,
    pub basis_size: usize,
    pub singular_values: Vec<f64>,
    /// Largest angle between the discrete cokernel and `(z_{2 conj w}, 0)` directions.
    pub cokernel_angle: f64,
}

/// Square trial space adapted to the linearization at `omega`.
///
/// First components: the kernel solutions plus `x^2 P_k`; second components: the images
/// `(x^2 P_k)'' + w^2 q x^2 P_k`. On it the discrete operator is square with exactly the
/// kernel of the continuous one, and `(z_{2 conj w}, 0)` directions make up its cokernel.
pub fn operator_trial(omega: C64, q: &ProfileFn, space: &DiscreteXSpace, basis_size: usize) -> TrialSpace {
    let g = &space.grid;
    let kd = space.mode.kernel_dim();
    let m1 = (basis_size + kd).div_ceil(2).max(kd + 1);
    let (z, t) = kernel_functions(omega, q, g);
    let qs = sample_segments(q, g);
    let w2 = omega * omega;
    let mut first = match space.mode {
        SpaceMode::X => vec![t, z],
        SpaceMode::XDiamond => vec![z],
    };
    let mut second = Vec::with_capacity(m1 - kd);
    for k in 0..m1 - kd {
        let (v, d2) = poly_member(g, PolyFamily::TimesX2, k);
        let image: Vec<Vec<C64>> = g
            .segments()
            .into_iter()
            .enumerate()
            .map(|(s, (a, b))| (a..=b).map(|i| d2[s][i - a] + w2 * seg_at(g, &qs, i, s) * v[i]).collect())
            .collect();
        second.push(second_component(g, collapse(g, &image)));
        first.push(first_component(g, v, d2));
    }
    let mut vectors = orthonormalize(space, first, 1e-12);
    vectors.extend(orthonormalize(space, second, 1e-12));
    TrialSpace { vectors }
}

/// `M[j][k] = L(e_k, e_j)` as a dense matrix.
fn linear_matrix(space: &DiscreteXSpace, q: &ProfileFn, omega: C64, trial: &TrialSpace) -> DMatrix<C64> {
    let c = Coefs { q: sample_segments(q, &space.grid), chi1: Vec::new(), chi2: Vec::new(), radial: false };
    let m = trial.dim();
    let entries: Vec<C64> = (0..m * m)
        .into_par_iter()
        .map(|idx| l_form_with(space, &c, omega, &trial.vectors[idx % m], &trial.vectors[idx / m]))
        .collect();
    DMatrix::from_fn(m, m, |j, k| entries[j * m + k])
}

/// Assembles the linearization on [`operator_trial`] and reads off its singular values.
pub fn gamma_estimate(omega: C64, q: &ProfileFn, space: &DiscreteXSpace, basis_size: usize) -> Result<GammaEstimate> {
    let bound = 0.5 / q.sup_norm().sqrt();
    if omega.norm() > bound {
        return Err(Error::OutsideOmegaQ { modulus: omega.norm(), bound });
    }
    let g = &space.grid;
    let trial = operator_trial(omega, q, space, basis_size);
    let basis = &trial.vectors;
    let m = basis.len();
    let mat = linear_matrix(space, q, omega, &trial).map(|v| Complex::new(v.re, v.im));
    let svd = mat.svd(true, false);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv[0];
    let kernel_dim = sv.iter().filter(|&&s| s < 1e-8 * smax).count();
    let smallest = sv.iter().rev().find(|&&s| s >= 1e-8 * smax).copied().unwrap_or(0.0);
    let u = svd.u.as_ref().expect("requested");
    let (cz, ct) = kernel_functions(2.0 * omega.conj(), q, g);
    let target = match space.mode {
        SpaceMode::X => orthonormalize(space, vec![ct, cz], 0.0),
        SpaceMode::XDiamond => orthonormalize(space, vec![cz], 0.0),
    };
    let mut cokernel_angle: f64 = 0.0;
    for &col in order.iter().skip(m - kernel_dim) {
        let phi = (0..m).fold(basis[0].zeros_like(), |acc, j| {
            let y = u[(j, col)];
            acc.axpy(C64::new(y.re, y.im), &basis[j])
        });
        let n = space.norm(&phi);
        let resid = target.iter().fold(phi.clone(), |acc, e| acc.axpy(-space.inner(&phi, e), e));
        cokernel_angle = cokernel_angle.max((space.norm(&resid) / n).min(1.0).asin());
    }
    Ok(GammaEstimate {
        omega,
        gamma: if smallest > 0.0 { 1.0 / smallest } else { f64::INFINITY },
        kernel_dim,
        basis_size: m,
        singular_values: sv,
        cokernel_angle,
    })
}

/// Starting-point policy for [`blowup_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeMode {
    /// Seeds of norm `scale / w^2`, unconstrained iteration.
    Free { scale: f64 },
    /// Iterates kept on the sphere `||u|| = radius`.
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct BlowupOptions {
    pub mode: ProbeMode,
    pub seeds: usize,
    pub max_iter: usize,
    /// Dimension of the trial space (see [`operator_trial`]).
    pub basis_size: usize,
    pub seed: u64,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        Self { mode: ProbeMode::Free { scale: 1.0 }, seeds: 8, max_iter: 60, basis_size: 24, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct BlowupRow {
    pub omega: f64,
    /// Smallest dual-norm residual over all seeds.
    pub best_residual: f64,
    /// `||u||` at the best residual.
    pub norm: f64,
    /// Final residual of every seed.
    pub residuals: Vec<f64>,
}

/// Node samples of a trial space, flattened over segments with Simpson weights folded in.
struct Sampled {
    /// `[weight * w(x)]`, chi1, chi2 per entry.
    w: Vec<f64>,
    chi1: Vec<f64>,
    chi2: Vec<f64>,
    u1: DMatrix<C64>,
    u2: DMatrix<C64>,
}

impl Sampled {
    fn new(profile: &MediumProfile, space: &DiscreteXSpace, trial: &TrialSpace) -> Self {
        let g = &space.grid;
        let c = Coefs::new(profile, space);
        let mut idx = Vec::new();
        let (mut w, mut chi1, mut chi2) = (Vec::new(), Vec::new(), Vec::new());
        let h = g.h();
        for (s, (a, b)) in g.segments().into_iter().enumerate() {
            let len = b - a + 1;
            for j in 0..len {
                let i = a + j;
                let sw = if j == 0 || j == len - 1 {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                } * h
                    / 3.0;
                idx.push(i);
                w.push(sw * c.weight(g, i));
                chi1.push(seg_at(g, &c.chi1, i, s));
                chi2.push(seg_at(g, &c.chi2, i, s));
            }
        }
        let m = trial.dim();
        let u1 = DMatrix::from_fn(idx.len(), m, |e, k| trial.vectors[k].u1[idx[e]]);
        let u2 = DMatrix::from_fn(idx.len(), m, |e, k| trial.vectors[k].u2[idx[e]]);
        Self { w, chi1, chi2, u1, u2 }
    }

    /// `U^H diag(d) V`.
    fn sandwich(a: &DMatrix<C64>, d: &[C64], b: &DMatrix<C64>) -> DMatrix<C64> {
        let mut scaled = b.clone();
        for (mut row, dv) in scaled.row_iter_mut().zip(d) {
            row *= *dv;
        }
        a.adjoint() * scaled
    }
}

/// Damped Gauss-Newton (Levenberg-Marquardt) on the dual-norm residual of `T_w` over
/// [`operator_trial`], from random seeds. Exploratory: no convergence claim.
pub fn blowup_probe(
    profile: &MediumProfile,
    space: &DiscreteXSpace,
    omegas: &[f64],
    opts: BlowupOptions,
) -> Result<Vec<BlowupRow>> {
    if omegas.iter().any(|&w| !(w > 0.0)) || omegas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("probe frequencies must be positive and decreasing".into()));
    }
    omegas
        .iter()
        .enumerate()
        .map(|(wi, &w)| {
            let omega = C64::new(w, 0.0);
            let trial = operator_trial(omega, &profile.q, space, opts.basis_size);
            let lin = linear_matrix(space, &profile.q, omega, &trial);
            let sampled = Sampled::new(profile, space, &trial);
            let results: Vec<(f64, f64)> = (0..opts.seeds)
                .into_par_iter()
                .map(|s| {
                    let seed = opts.seed.wrapping_mul(1_000_003).wrapping_add((wi * 7919 + s) as u64);
                    gauss_newton(omega, &lin, &sampled, opts, seed)
                })
                .collect();
            let (best_residual, norm) = results
                .iter()
                .copied()
                .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
            Ok(BlowupRow { omega: w, best_residual, norm, residuals: results.iter().map(|r| r.0).collect() })
        })
        .collect()
}

/// Returns `(final residual, ||u||)` of one damped Gauss-Newton run.
fn gauss_newton(omega: C64, lin: &DMatrix<C64>, s: &Sampled, opts: BlowupOptions, seed: u64) -> (f64, f64) {
    let m = lin.ncols();
    let w2 = omega * omega;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<f64> = (0..2 * m).map(|_| rng.random::<f64>() - 0.5).collect();
    let target = match opts.mode {
        ProbeMode::Free { scale } => scale / omega.norm_sqr(),
        ProbeMode::Sphere { radius } => radius,
    };
    let rescale = |p: &mut Vec<f64>, r: f64| {
        let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            p.iter_mut().for_each(|x| *x *= r / n);
        }
    };
    rescale(&mut p, target);
    let coeffs = |p: &[f64]| DVector::from_fn(m, |k, _| C64::new(p[2 * k], p[2 * k + 1]));
    let fields = |a: &DVector<C64>| (&s.u1 * a, &s.u2 * a);
    let residual = |p: &[f64]| -> DVector<C64> {
        let a = coeffs(p);
        let (u1, u2) = fields(&a);
        let d1: Vec<C64> = (0..s.w.len()).map(|e| s.w[e] * s.chi1[e] * u2[e] * u1[e].conj()).collect();
        let d2: Vec<C64> = (0..s.w.len()).map(|e| s.w[e] * s.chi2[e] * u1[e] * u1[e]).collect();
        lin * &a + (s.u2.adjoint() * DVector::from_vec(d1) + s.u1.adjoint() * DVector::from_vec(d2)) * w2
    };
    let norm_of = |r: &DVector<C64>| r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut r = residual(&p);
    let mut rn = norm_of(&r);
    let mut lambda = 1e-3;
    let i = C64::new(0.0, 1.0);
    for _ in 0..opts.max_iter {
        let (u1, u2) = fields(&coeffs(&p));
        let n = s.w.len();
        let dp: Vec<C64> = (0..n).map(|e| s.w[e] * s.chi1[e] * u1[e].conj()).collect();
        let dq: Vec<C64> = (0..n).map(|e| s.w[e] * s.chi1[e] * u2[e]).collect();
        let ds: Vec<C64> = (0..n).map(|e| s.w[e] * s.chi2[e] * u1[e]).collect();
        let pm = Sampled::sandwich(&s.u2, &dp, &s.u2);
        let qm = Sampled::sandwich(&s.u2, &dq, &s.u1.map(|v| v.conj()));
        let sm = Sampled::sandwich(&s.u1, &ds, &s.u1) * C64::new(2.0, 0.0);
        let jre = lin + (&pm + &qm + &sm) * w2;
        let jim = (lin + (&pm - &qm + &sm) * w2) * i;
        let rows = 2 * m;
        let jm = DMatrix::from_fn(rows, 2 * m, |row, col| {
            let v = if col % 2 == 0 { jre[(row / 2, col / 2)] } else { jim[(row / 2, col / 2)] };
            if row % 2 == 0 {
                v.re
            } else {
                v.im
            }
        });
        let rv = DVector::from_fn(rows, |row, _| if row % 2 == 0 { r[row / 2].re } else { r[row / 2].im });
        let jtj = jm.transpose() * &jm;
        let jtr = jm.transpose() * rv;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 4.0;
                continue;
            };
            let mut pn: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            if let ProbeMode::Sphere { radius } = opts.mode {
                rescale(&mut pn, radius);
            }
            let rnew = residual(&pn);
            let nn = norm_of(&rnew);
            if nn < rn {
                let rel = (rn - nn) / rn.max(1e-300);
                p = pn;
                r = rnew;
                rn = nn;
                lambda = (lambda / 3.0).max(1e-12);
                improved = rel > 1e-10;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    (rn, norm)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::Geometry;
    use crate::quad::d2_order4;
    use crate::xspace::StateVector;

    #[test]
    fn legendre_derivatives() {
        let h = 1e-5;
        for k in 0..8 {
            let x = 0.37;
            let (_, d, dd) = legendre(k, x);
            let fd = (legendre(k, x + h).0 - legendre(k, x - h).0) / (2.0 * h);
            let fdd = (legendre(k, x + h).1 - legendre(k, x - h).1) / (2.0 * h);
            assert!((d - fd).abs() < 1e-6 * (1.0 + d.abs()), "k={k}");
            assert!((dd - fdd).abs() < 1e-5 * (1.0 + dd.abs()), "k={k}");
        }
    }

    #[test]
    fn zero_frequency_kernels() {
        let g = Grid::new(2001).unwrap();
        let q = ProfileFn::constant(1.0);
        let d = DiscreteXSpace::new(g.clone(), SpaceMode::XDiamond);
        let b = kernel_basis(ZERO, &q, &d);
        assert_eq!(b.vectors.len(), 1);
        for i in [0, 500, 2000] {
            let expect = 3f64.sqrt() * g.x(i);
            assert!((b.vectors[0].u1[i] - expect).norm() < 1e-12);
        }
        let x = DiscreteXSpace::new(g.clone(), SpaceMode::X);
        let b = kernel_basis(ZERO, &q, &x);
        assert_eq!(b.vectors.len(), 2);
        assert!((b.vectors[0].u1[700] - 1.0).norm() < 1e-12);
        let nrm = (1.0f64 / 12.0).sqrt();
        assert!((b.vectors[1].u1[1500] - (0.75 - 0.5) / nrm).norm() < 1e-10);
    }

    fn unit_profile(geometry: Geometry) -> MediumProfile {
        let one = ProfileFn::constant(1.0);
        MediumProfile::new(one.clone(), one.clone(), one, ProfileFn::zero(), geometry).unwrap()
    }

    #[test]
    fn trig_inner_product() {
        let g = Grid::new(2001).unwrap();
        let sp = DiscreteXSpace::new(g.clone(), SpaceMode::X);
        let pair = fundamental_pair(ONE, &ProfileFn::constant(1.0), &g);
        let zero = vec![ZERO; g.n()];
        let u = StateVector::from_values(pair.z.values.clone(), zero.clone());
        let v = StateVector::from_values(pair.ztilde.values.clone(), zero);
        // int sin cos + int (-sin)(-cos) = sin^2(1)
        let expect = 1f64.sin().powi(2);
        assert!((sp.x_inner(&u, &v) - expect).norm() < 1e-4);
    }

    #[test]
    fn kernel_basis_invariants() {
        let g = Grid::new(2001).unwrap();
        let q = ProfileFn::constant(1.0);
        for mode in [SpaceMode::X, SpaceMode::XDiamond] {
            let sp = DiscreteXSpace::new(g.clone(), mode);
            for w in [C64::new(0.1, 0.0), C64::new(0.7, 0.3)] {
                let b = kernel_basis(w, &q, &sp);
                for (i, e) in b.vectors.iter().enumerate() {
                    for (j, f) in b.vectors.iter().enumerate() {
                        let want = if i == j { ONE } else { ZERO };
                        assert!((sp.inner(e, f) - want).norm() < 1e-10);
                    }
                    let d2 = d2_order4(&g, &e.u1);
                    let res = d2[0].iter().zip(&e.u1).map(|(a, u)| (a + w * w * u).norm()).fold(0.0, f64::max);
                    assert!(res < 1e-6, "{res}");
                }
            }
            let b0 = kernel_basis(ZERO, &q, &sp);
            let b1 = kernel_basis(C64::new(0.1, 0.0), &q, &sp);
            for (e, f) in b0.vectors.iter().zip(&b1.vectors) {
                // The second-derivative part alone is ~ w^2 = 1e-2 in both modes.
                let d = sp.norm(&e.axpy(-ONE, f));
                assert!(d < 1.05e-2, "{mode:?} {d}");
            }
        }
    }

    #[test]
    fn projection_properties() {
        let g = Grid::new(1001).unwrap();
        let q = ProfileFn::constant(1.0);
        let sp = DiscreteXSpace::new(g, SpaceMode::X);
        let b = kernel_basis(C64::new(0.4, 0.1), &q, &sp);
        let probes = random_states(&sp, 10, 5, 1);
        for u in &probes {
            let pu = project_kernel(&sp, &b, u);
            let ppu = project_kernel(&sp, &b, &pu);
            assert!(sp.norm(&ppu.axpy(-ONE, &pu)) < 1e-10);
            for v in &probes {
                let pv = project_kernel(&sp, &b, v);
                assert!((sp.inner(&pu, v) - sp.inner(u, &pv)).norm() < 1e-10);
            }
            let orth = u.axpy(-ONE, &pu);
            assert!(sp.norm(&project_kernel(&sp, &b, &orth)) < 1e-10);
        }
        let inside = b.vectors[0].axpy(C64::new(0.3, -2.0), &b.vectors[1]);
        assert!(sp.norm(&project_kernel(&sp, &b, &inside).axpy(-ONE, &inside)) < 1e-10);
    }

    #[test]
    fn nonlinear_term_trivial_cases() {
        let g = Grid::new(401).unwrap();
        let sp = DiscreteXSpace::new(g.clone(), SpaceMode::X);
        let trial = TrialSpace::polynomial(&sp, Vec::new(), 5);
        let p = unit_profile(Geometry::Interval);
        let u = random_states(&sp, 1, 4, 3).pop().unwrap();
        assert_eq!(sp.norm(&apply_a(&p, &sp, &trial, &u.zeros_like())), 0.0);
        let off = p.with_chi1(ProfileFn::zero()).with_chi2(ProfileFn::zero());
        assert_eq!(sp.norm(&apply_a(&off, &sp, &trial, &u)), 0.0);
    }

    #[test]
    fn cubic_kernel_interval_oracle() {
        // e1 = 1, e2 = sqrt(12)(x - 1/2): the value is (|a1^2 + a2^2|^2 + 4|a1 a2|^2)^(1/2) >= 1,
        // with equality at a1 = 1.
        let g = Grid::new(1001).unwrap();
        let sp = DiscreteXSpace::new(g, SpaceMode::X);
        let p = unit_profile(Geometry::Interval);
        let c = cubic_kernel_constant(&p, &sp, 2000).unwrap();
        assert!((c - 1.0).abs() < 1e-8, "{c}");
    }

    #[test]
    fn cubic_kernel_rejects_degenerate_chi2() {
        let g = Grid::new(401).unwrap();
        let sp = DiscreteXSpace::new(g, SpaceMode::XDiamond);
        let p = unit_profile(Geometry::Radial);
        let neg = p.with_chi2(ProfileFn::constant(-0.5));
        assert!(matches!(cubic_kernel_constant(&neg, &sp, 10), Err(Error::DegenerateChi2(_))));
        let zero = p.with_chi2(ProfileFn::zero());
        assert!(matches!(cubic_kernel_constant(&zero, &sp, 10), Err(Error::DegenerateChi2(_))));
    }

    #[test]
    fn gamma_guard_and_tbound_trivial() {
        let g = Grid::new(401).unwrap();
        let sp = DiscreteXSpace::new(g.clone(), SpaceMode::X);
        let q = ProfileFn::constant(4.0);
        assert!(matches!(gamma_estimate(C64::new(0.3, 0.0), &q, &sp, 32), Err(Error::OutsideOmegaQ { .. })));
        let p = unit_profile(Geometry::Interval);
        let u = second_component(&g, vec![ONE; g.n()]);
        let (lhs, rhs) = t_lower_bound_check(&p, &sp, C64::new(0.5, 0.0), &u);
        assert_eq!(rhs, 0.0);
        assert!(lhs >= 0.0);
        let bad = blowup_probe(&p, &sp, &[0.1, 0.2], BlowupOptions::default());
        assert!(matches!(bad, Err(Error::Domain(_))));
    }

    #[test]
    fn nelder_mead_quadratic() {
        let (x, fx) = nelder_mead(|p| (p[0] - 1.0).powi(2) + 3.0 * (p[1] + 0.5).powi(2), &[0.0, 0.0], 0.1, 1e-15, 2000);
        assert!(fx < 1e-10 && (x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn halton_points() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 3), 2.0 / 3.0);
    }
}
