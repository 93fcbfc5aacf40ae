//! The forced problem: base point `p` with `F(p) = f`, the linearization `F'` and its
//! shooting inverse, and the fixed-point iteration for the coupled correction `u`.

use std::io::Write;

use nalgebra::{Complex, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::medium::{Geometry, Grid, MediumProfile};
use crate::ode::{
    fundamental_pair, green_particular, particular_a_with, particular_b_with, FundamentalPair,
    GridFunction,
};
use crate::quad::{d2_order4, inv_x, sample_segments, seg_at};
use crate::spectral::{k_moments_from, KMoments};
use crate::xspace::{DiscreteXSpace, SpaceMode, StateVector};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Guard for `|zeta|` relative to `max(|k2|^2, |k1 k3|)`.
pub const LAMBDA_GUARD: f64 = 1e-12;
/// Largest condition number accepted for the 2x2 terminal system.
pub const SHOOTING_CONDITION_MAX: f64 = 1e12;

/// Sign in front of the principal square root of zeta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(Branch::Plus),
            "minus" => Ok(Branch::Minus),
            other => Err(Error::Parse(format!("unknown branch '{other}' (plus|minus)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchTag {
    Plus,
    Minus,
    /// `k1` vanished and the linear equation `2 k2 c + k3 = 0` was used.
    K1Zero,
}

impl BranchTag {
    pub fn name(self) -> &'static str {
        match self {
            BranchTag::Plus => "plus",
            BranchTag::Minus => "minus",
            BranchTag::K1Zero => "k1zero",
        }
    }
}

/// Nonlinear-solve coefficient data shared by everything built on `p`.
#[derive(Debug, Clone)]
pub struct ForcedBase {
    pub omega: C64,
    pub p1: GridFunction,
    pub p2: GridFunction,
    pub c_omega: C64,
    pub ctilde_omega: C64,
    pub kmoments: KMoments,
    pub zeta_value: C64,
    pub branch_tag: BranchTag,
    /// Fundamental pairs at `w` and `2w`.
    pub pair: FundamentalPair,
    pub pair2: FundamentalPair,
    grid: Grid,
    q: Vec<Vec<f64>>,
    chi1: Vec<Vec<f64>>,
    chi2: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
}

/// Principal square root with a signed zero imaginary part normalized to `+0`.
fn principal_sqrt(z: C64) -> C64 {
    let z = if z.im == 0.0 { C64::new(z.re, 0.0) } else { z };
    z.sqrt()
}

pub fn build_p(omega: C64, profile: &MediumProfile, g: &Grid, branch: Branch) -> Result<ForcedBase> {
    if profile.geometry != Geometry::Radial {
        return Err(Error::Geometry { expected: "radial" });
    }
    if profile.f.is_zero() {
        return Err(Error::ZeroSource);
    }
    if omega == ZERO {
        return Err(Error::OnLambda { omega, zeta_abs: 0.0 });
    }
    let pair = fundamental_pair(omega, &profile.q, g);
    let pair2 = fundamental_pair(2.0 * omega, &profile.q, g);
    let a = particular_a_with(&pair, &profile.f, g);
    let k = k_moments_from(profile, g, &pair, &pair2, &a);
    let zeta_value = k.zeta();
    let scale = (k.k2.norm_sqr()).max((k.k1 * k.k3).norm());
    if !(zeta_value.norm() > LAMBDA_GUARD * scale) {
        return Err(Error::OnLambda { omega, zeta_abs: zeta_value.norm() });
    }
    let (c_omega, branch_tag) = if k.k1.norm() <= 1e-12 * k.k2.norm().max(k.k3.norm()) {
        (-k.k3 / (2.0 * k.k2), BranchTag::K1Zero)
    } else {
        let root = principal_sqrt(zeta_value);
        match branch {
            Branch::Plus => ((-k.k2 + root) / k.k1, BranchTag::Plus),
            Branch::Minus => ((-k.k2 - root) / k.k1, BranchTag::Minus),
        }
    };
    let pairing = k.k1 * c_omega + k.k2;
    if pairing.norm() <= 1e-10 * scale.sqrt() {
        return Err(Error::NonInvertible { value: pairing });
    }
    let p1 = pair.z.combine(c_omega, &a, C64::new(1.0, 0.0));
    let b = particular_b_with(&pair2, &profile.chi2, &p1, g, Geometry::Radial)?;
    let last = g.n() - 1;
    let z2 = &pair2.z;
    let dz2 = z2.derivs.as_ref().expect("integrated");
    let db = b.derivs.as_ref().expect("integrated");
    let ctilde_omega = if z2.values[last].norm() >= dz2[last].norm() {
        b.values[last] / z2.values[last]
    } else {
        db[last] / dz2[last]
    };
    let p2 = z2.combine(ctilde_omega, &b, C64::new(-1.0, 0.0));
    let base = ForcedBase {
        omega,
        p1,
        p2,
        c_omega,
        ctilde_omega,
        kmoments: k,
        zeta_value,
        branch_tag,
        pair,
        pair2,
        grid: g.clone(),
        q: sample_segments(&profile.q, g),
        chi1: sample_segments(&profile.chi1, g),
        chi2: sample_segments(&profile.chi2, g),
        f: sample_segments(&profile.f, g),
    };
    base.check_invariants(&b)?;
    Ok(base)
}

/// Strong-form densities paired against `phi1` (`r1`) and `phi2` (`r2`), per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Densities {
    pub r1: Vec<Vec<C64>>,
    pub r2: Vec<Vec<C64>>,
}

impl Densities {
    pub fn zeros(g: &Grid) -> Self {
        let z: Vec<Vec<C64>> = g.segments().iter().map(|(a, b)| vec![ZERO; b - a + 1]).collect();
        Self { r1: z.clone(), r2: z }
    }

    pub fn add(&self, other: &Densities) -> Densities {
        let add = |x: &Vec<Vec<C64>>, y: &Vec<Vec<C64>>| {
            x.iter()
                .zip(y)
                .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect())
                .collect()
        };
        Densities { r1: add(&self.r1, &other.r1), r2: add(&self.r2, &other.r2) }
    }

    pub fn max_abs(&self) -> f64 {
        self.r1
            .iter()
            .chain(&self.r2)
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

impl ForcedBase {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn segmented<F: Fn(usize, usize) -> C64>(&self, f: F) -> Vec<Vec<C64>> {
        self.grid
            .segments()
            .into_iter()
            .enumerate()
            .map(|(s, (a, b))| (a..=b).map(|i| f(i, s)).collect())
            .collect()
    }

    fn at(&self, segs: &[Vec<f64>], i: usize, s: usize) -> f64 {
        seg_at(&self.grid, segs, i, s)
    }

    fn check_invariants(&self, b: &GridFunction) -> Result<()> {
        let g = &self.grid;
        let w2 = self.omega * self.omega;
        let d2 = d2_order4(g, &self.p1.values);
        let mut res = 0.0f64;
        for (s, (a, bb)) in g.segments().into_iter().enumerate() {
            for i in a..=bb {
                let r = d2[s][i - a] + w2 * self.at(&self.q, i, s) * self.p1.values[i]
                    - self.at(&self.f, i, s);
                res = res.max(r.norm());
            }
        }
        let tol1 = 1e-6 * (1.0 + w2.norm()) * self.p1.max_abs().max(1.0);
        if !(res <= tol1) {
            return Err(Error::Invariant(format!("p1 residual {res:e} exceeds {tol1:e}")));
        }
        let last = g.n() - 1;
        let dp2 = self.p2.derivs.as_ref().expect("integrated");
        let bc = self.p2.values[last].norm() + dp2[last].norm();
        let tol2 = 1e-8 * b.max_abs().max(1.0);
        if !(bc <= tol2) || self.p2.values[0] != ZERO {
            return Err(Error::Invariant(format!(
                "p2 boundary values |p2(1)| + |p2'(1)| = {bc:e} exceed {tol2:e}"
            )));
        }
        Ok(())
    }

    /// `r2 = u1'' + w^2 q u1` and `r1 = u2'' + 4 w^2 q u2 + 2 w^2 chi2 p1 u1 / x`,
    /// with second derivatives by fourth-order differences.
    pub fn apply_fprime(&self, u: &StateVector) -> Densities {
        let g = &self.grid;
        let w2 = self.omega * self.omega;
        let d2u1 = d2_order4(g, &u.u1.values);
        let d2u2 = d2_order4(g, &u.u2.values);
        let start = |s: usize| if s == 0 { 0 } else { g.breaks()[s - 1] };
        let r2 = self.segmented(|i, s| {
            d2u1[s][i - start(s)] + w2 * self.at(&self.q, i, s) * u.u1.values[i]
        });
        let r1 = self.segmented(|i, s| {
            d2u2[s][i - start(s)]
                + 4.0 * w2 * self.at(&self.q, i, s) * u.u2.values[i]
                + 2.0 * w2 * self.at(&self.chi2, i, s) * inv_x(g, i) * self.p1.values[i] * u.u1.values[i]
        });
        Densities { r1, r2 }
    }

    /// Solves `F'(u) = (r1, r2)` with `u1(0) = u2(0) = u2(1) = u2'(1) = 0` by shooting.
    pub fn invert_fprime(&self, dens: &Densities) -> Result<StateVector> {
        let g = &self.grid;
        let w2 = self.omega * self.omega;
        let at = |segs: &Vec<Vec<C64>>, i: usize, s: usize| seg_at(g, segs, i, s);
        let u1p = green_particular(&self.pair, g, |i, s| at(&dens.r2, i, s));
        let coupling = |i: usize, s: usize| 2.0 * w2 * self.at(&self.chi2, i, s) * inv_x(g, i) * self.p1.values[i];
        let v0 = green_particular(&self.pair2, g, |i, s| {
            at(&dens.r1, i, s) - coupling(i, s) * u1p.values[i]
        });
        let z = &self.pair.z.values;
        let v1 = green_particular(&self.pair2, g, |i, s| -coupling(i, s) * z[i]);
        let last = g.n() - 1;
        let z2 = &self.pair2.z;
        let dz2 = z2.derivs.as_ref().expect("integrated");
        let dv0 = v0.derivs.as_ref().expect("green");
        let dv1 = v1.derivs.as_ref().expect("green");
        let m = Matrix2::new(
            Complex::new(v1.values[last].re, v1.values[last].im),
            Complex::new(z2.values[last].re, z2.values[last].im),
            Complex::new(dv1[last].re, dv1[last].im),
            Complex::new(dz2[last].re, dz2[last].im),
        );
        let cond = column_normalized_condition(&m);
        if !(cond <= SHOOTING_CONDITION_MAX) {
            return Err(Error::SingularShooting { condition: cond });
        }
        let rhs = nalgebra::Vector2::new(-v0.values[last], -dv0[last]);
        let sol = m.lu().solve(&rhs).ok_or(Error::SingularShooting { condition: f64::INFINITY })?;
        let (alpha, beta) = (sol[0], sol[1]);
        let u1 = u1p.combine(C64::new(1.0, 0.0), &self.pair.z, alpha);
        let u2 = v0.combine(C64::new(1.0, 0.0), &v1, alpha).combine(C64::new(1.0, 0.0), z2, beta);
        Ok(StateVector { u1, u2 })
    }

    /// Density of `E(u)`: `w^2 chi2 u1^2 / x` in the `r1` slot.
    pub fn e_density(&self, u: &StateVector) -> Densities {
        let g = &self.grid;
        let w2 = self.omega * self.omega;
        let r1 = self.segmented(|i, s| {
            w2 * self.at(&self.chi2, i, s) * inv_x(g, i) * u.u1.values[i] * u.u1.values[i]
        });
        Densities { r1, r2: Densities::zeros(g).r2 }
    }

    /// Density of `G(v)`: `w^2 chi1 v2 conj(v1) / x` in the `r2` slot.
    pub fn g_density(&self, v: &StateVector) -> Densities {
        let g = &self.grid;
        let w2 = self.omega * self.omega;
        let r2 = self.segmented(|i, s| {
            w2 * self.at(&self.chi1, i, s) * inv_x(g, i) * v.u2.values[i] * v.u1.values[i].conj()
        });
        Densities { r1: Densities::zeros(g).r1, r2 }
    }

    /// `p` as a state vector.
    pub fn p(&self) -> StateVector {
        StateVector { u1: self.p1.clone(), u2: self.p2.clone() }
    }

    /// `-(F')^{-1} [E(u) + G(p + u)]`.
    pub fn h_map(&self, u: &StateVector) -> Result<StateVector> {
        let total = self.p().combine(C64::new(1.0, 0.0), u, C64::new(1.0, 0.0));
        let dens = self.e_density(u).add(&self.g_density(&total));
        Ok(self.invert_fprime(&dens)?.scale(C64::new(-1.0, 0.0)))
    }

    /// Strong-form residual of the full forced system at `P = p + u`: both ODE residuals by
    /// fourth-order differences plus `|P1(0)| + |P2(0)| + |P2(1)| + |P2'(1)|`.
    pub fn residual(&self, u: &StateVector) -> f64 {
        let g = &self.grid;
        let w2 = self.omega * self.omega;
        let p = self.p().combine(C64::new(1.0, 0.0), u, C64::new(1.0, 0.0));
        let (p1, p2) = (&p.u1.values, &p.u2.values);
        let d1 = d2_order4(g, p1);
        let d2 = d2_order4(g, p2);
        let mut res = 0.0f64;
        for (s, (a, b)) in g.segments().into_iter().enumerate() {
            for i in a..=b {
                let wx = w2 * inv_x(g, i);
                let e1 = d1[s][i - a] + w2 * self.at(&self.q, i, s) * p1[i]
                    + wx * self.at(&self.chi1, i, s) * p2[i] * p1[i].conj()
                    - self.at(&self.f, i, s);
                let e2 = d2[s][i - a] + 4.0 * w2 * self.at(&self.q, i, s) * p2[i]
                    + wx * self.at(&self.chi2, i, s) * p1[i] * p1[i];
                res = res.max(e1.norm()).max(e2.norm());
            }
        }
        let last = g.n() - 1;
        let dp2 = match &p.u2.derivs {
            Some(d) => d[last],
            None => *crate::quad::derivative(g, p2, 1, 4)
                .last()
                .and_then(|s| s.last())
                .expect("nonempty grid"),
        };
        res + p1[0].norm() + p2[0].norm() + p2[last].norm() + dp2.norm()
    }
}

/// Condition number (2-norm) of the 2x2 matrix after scaling each column to unit length.
fn column_normalized_condition(m: &Matrix2<Complex<f64>>) -> f64 {
    let mut m = *m;
    for j in 0..2 {
        let n = m.column(j).norm();
        if n == 0.0 {
            return f64::INFINITY;
        }
        m.column_mut(j).unscale_mut(n);
    }
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub branch: Branch,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { branch: Branch::Plus, tol: 1e-10, max_iter: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub base: ForcedBase,
    pub solution: StateVector,
    pub iterations: usize,
    pub increment_history: Vec<f64>,
    pub final_residual: f64,
    pub contraction_estimate: f64,
}

impl FixedPointReport {
    /// `p + u`.
    pub fn total(&self) -> StateVector {
        self.base.p().combine(C64::new(1.0, 0.0), &self.solution, C64::new(1.0, 0.0))
    }

    /// CSV of the total field: `x,p1_re,p1_im,p2_re,p2_im`.
    pub fn write_solution_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let t = self.total();
        let g = self.base.grid();
        writeln!(w, "x,p1_re,p1_im,p2_re,p2_im")?;
        for i in 0..g.n() {
            let (a, b) = (t.u1.values[i], t.u2.values[i]);
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", g.x(i), a.re, a.im, b.re, b.im)?;
        }
        Ok(())
    }
}

/// Iterates `u <- H(u)` from `u = 0` until the X-norm increment drops below `tol`.
pub fn fixed_point_solve(
    omega: C64,
    profile: &MediumProfile,
    g: &Grid,
    opts: FixedPointOptions,
) -> Result<FixedPointReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let base = build_p(omega, profile, g, opts.branch)?;
    let space = DiscreteXSpace::new(g.clone(), SpaceMode::XDiamond);
    let mut u = StateVector::zeros(g.n());
    let mut history: Vec<f64> = Vec::new();
    let mut rising = 0usize;
    let mut iterations = 0usize;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NoContraction { history });
        }
        let next = base.h_map(&u)?;
        iterations += 1;
        let inc = space.x_norm(&next.combine(C64::new(1.0, 0.0), &u, C64::new(-1.0, 0.0)));
        if !inc.is_finite() {
            history.push(inc);
            return Err(Error::NoContraction { history });
        }
        if let Some(&prev) = history.last() {
            if inc >= prev {
                rising += 1;
                if rising >= 5 {
                    history.push(inc);
                    return Err(Error::NoContraction { history });
                }
            } else {
                rising = 0;
            }
        }
        history.push(inc);
        u = next;
        if inc <= opts.tol {
            break;
        }
    }
    let contraction_estimate = history
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    let final_residual = base.residual(&u);
    Ok(FixedPointReport {
        base,
        solution: u,
        iterations,
        increment_history: history,
        final_residual,
        contraction_estimate,
    })
}
