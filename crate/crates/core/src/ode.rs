//! Complex-frequency solutions of `y'' + w^2 q y = s` on a grid.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::medium::{Geometry, Grid, ProfileFn};
use crate::quad::{self, cumulative, inv_x, sample_segments, seg_at};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Complex samples at every node, with first derivatives when an integrator produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<C64>,
    pub derivs: Option<Vec<C64>>,
}

impl GridFunction {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![ZERO; n],
            derivs: Some(vec![ZERO; n]),
        }
    }

    pub fn from_values(values: Vec<C64>) -> Self {
        Self { values, derivs: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `a*self + b*other`; derivatives survive only if both carry them.
    pub fn combine(&self, a: C64, other: &GridFunction, b: C64) -> GridFunction {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let derivs = match (&self.derivs, &other.derivs) {
            (Some(dx), Some(dy)) => Some(dx.iter().zip(dy).map(|(x, y)| a * x + b * y).collect()),
            _ => None,
        };
        GridFunction { values, derivs }
    }

    /// CSV with header `x,re,im,dre,dim`; derivative columns are empty when absent.
    pub fn write_csv<W: Write>(&self, g: &Grid, mut w: W) -> Result<()> {
        writeln!(w, "x,re,im,dre,dim")?;
        for (i, v) in self.values.iter().enumerate() {
            match &self.derivs {
                Some(d) => writeln!(w, "{:e},{:e},{:e},{:e},{:e}", g.x(i), v.re, v.im, d[i].re, d[i].im)?,
                None => writeln!(w, "{:e},{:e},{:e},,", g.x(i), v.re, v.im)?,
            }
        }
        Ok(())
    }
}

/// `z` with `z(0)=0, z'(0)=1` and `ztilde` with `ztilde(0)=1, ztilde'(0)=0`.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub omega: C64,
    pub z: GridFunction,
    pub ztilde: GridFunction,
}

impl FundamentalPair {
    /// `max |z ztilde' - z' ztilde + 1|` over the nodes.
    pub fn wronskian_drift(&self) -> f64 {
        let (z, dz) = (&self.z.values, self.z.derivs.as_ref().expect("integrated"));
        let (t, dt) = (&self.ztilde.values, self.ztilde.derivs.as_ref().expect("integrated"));
        (0..z.len())
            .map(|i| (z[i] * dt[i] - dz[i] * t[i] + 1.0).norm())
            .fold(0.0, f64::max)
    }
}

/// `q` at the left end, midpoint and right end of every cell, from the piece owning the cell.
fn cell_samples(q: &ProfileFn, g: &Grid) -> Vec<[f64; 3]> {
    let h = g.h();
    (0..g.n() - 1)
        .map(|i| {
            let x0 = g.x(i);
            let x1 = g.x(i + 1);
            let piece = &q.pieces()[q.piece_index(x0 + 0.5 * h)];
            [piece.eval(x0), piece.eval(x0 + 0.5 * h), piece.eval(x1)]
        })
        .collect()
}

/// Classical RK4 for `y'' = -k q y` from several initial states at once.
fn rk4_homogeneous<const M: usize>(
    k: C64,
    q: &ProfileFn,
    g: &Grid,
    init: [(C64, C64); M],
) -> [(Vec<C64>, Vec<C64>); M] {
    let h = g.h();
    let cells = cell_samples(q, g);
    init.map(|(y0, d0)| {
        let mut ys = Vec::with_capacity(g.n());
        let mut ds = Vec::with_capacity(g.n());
        let (mut y, mut d) = (y0, d0);
        ys.push(y);
        ds.push(d);
        for c in &cells {
            let (a0, am, a1) = (-k * c[0], -k * c[1], -k * c[2]);
            let k1y = d;
            let k1d = a0 * y;
            let k2y = d + 0.5 * h * k1d;
            let k2d = am * (y + 0.5 * h * k1y);
            let k3y = d + 0.5 * h * k2d;
            let k3d = am * (y + 0.5 * h * k2y);
            let k4y = d + h * k3d;
            let k4d = a1 * (y + h * k3y);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            d += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            ys.push(y);
            ds.push(d);
        }
        (ys, ds)
    })
}

pub fn fundamental_pair(omega: C64, q: &ProfileFn, g: &Grid) -> FundamentalPair {
    let one = C64::new(1.0, 0.0);
    let [(z, dz), (t, dt)] = rk4_homogeneous(omega * omega, q, g, [(ZERO, one), (one, ZERO)]);
    FundamentalPair {
        omega,
        z: GridFunction { values: z, derivs: Some(dz) },
        ztilde: GridFunction { values: t, derivs: Some(dt) },
    }
}

/// Solution of `y'' + w^2 q y = s` with `y(0) = y'(0) = 0`, through the Green's kernel
/// `z(x) ztilde(t) - z(t) ztilde(x)` of `pair`.
///
/// `s(i, seg)` is the source at node `i` as seen from segment `seg`.
pub fn green_particular<F>(pair: &FundamentalPair, g: &Grid, s: F) -> GridFunction
where
    F: Fn(usize, usize) -> C64,
{
    let z = &pair.z.values;
    let t = &pair.ztilde.values;
    let dz = pair.z.derivs.as_ref().expect("integrated");
    let dt = pair.ztilde.derivs.as_ref().expect("integrated");
    let i1 = cumulative(g, |i, sg| t[i] * s(i, sg));
    let i2 = cumulative(g, |i, sg| z[i] * s(i, sg));
    let values = (0..g.n()).map(|i| z[i] * i1[i] - t[i] * i2[i]).collect();
    let derivs = (0..g.n()).map(|i| dz[i] * i1[i] - dt[i] * i2[i]).collect();
    GridFunction { values, derivs: Some(derivs) }
}

/// `a` with `a'' + w^2 q a = f`, `a(0) = a'(0) = 0`.
pub fn particular_a(omega: C64, q: &ProfileFn, f: &ProfileFn, g: &Grid) -> GridFunction {
    particular_a_with(&fundamental_pair(omega, q, g), f, g)
}

pub fn particular_a_with(pair: &FundamentalPair, f: &ProfileFn, g: &Grid) -> GridFunction {
    if f.is_zero() {
        return GridFunction::zeros(g.n());
    }
    let fs = sample_segments(f, g);
    green_particular(pair, g, |i, s| C64::new(seg_at(g, &fs, i, s), 0.0))
}

/// `b` with `b'' + 4 w^2 q b = w^2 chi2 p1^2 / x` (radial) or without the `1/x` (interval),
/// `b(0) = b'(0) = 0`.
pub fn particular_b(
    omega: C64,
    q: &ProfileFn,
    chi2: &ProfileFn,
    p1: &GridFunction,
    g: &Grid,
    geometry: Geometry,
) -> Result<GridFunction> {
    particular_b_with(&fundamental_pair(2.0 * omega, q, g), chi2, p1, g, geometry)
}

/// As [`particular_b`], reusing the fundamental pair at `2w`.
pub fn particular_b_with(
    pair2: &FundamentalPair,
    chi2: &ProfileFn,
    p1: &GridFunction,
    g: &Grid,
    geometry: Geometry,
) -> Result<GridFunction> {
    let p = &p1.values;
    if geometry == Geometry::Radial && p[0].norm() > 1e-12 * (1.0 + p1.max_abs()) {
        return Err(Error::SingularIntegrand { value: p[0] });
    }
    let w2 = 0.25 * pair2.omega * pair2.omega;
    let cs = sample_segments(chi2, g);
    let weight = |i: usize| match geometry {
        Geometry::Radial => inv_x(g, i),
        Geometry::Interval => 1.0,
    };
    Ok(green_particular(pair2, g, |i, s| {
        w2 * seg_at(g, &cs, i, s) * p[i] * p[i] * weight(i)
    }))
}

/// `max |conj(z at -conj(w)) - z at w|` over the nodes.
pub fn symmetry_check(omega: C64, q: &ProfileFn, g: &Grid) -> f64 {
    let a = fundamental_pair(omega, q, g);
    let b = fundamental_pair(-omega.conj(), q, g);
    a.z.values
        .iter()
        .zip(&b.z.values)
        .map(|(x, y)| (y.conj() - x).norm())
        .fold(0.0, f64::max)
}

/// Discrete H² norm of `r = (u - a x - b) / w^2`, where `u` solves the homogeneous
/// equation with `u(0) = b`, `u'(0) = a`.
///
/// The second derivative of `r` is taken from the equation itself (`r'' = -q u`).
pub fn smallomega_expansion(omega: C64, q: &ProfileFn, a: f64, b: f64, g: &Grid) -> Result<f64> {
    if omega == ZERO {
        return Ok(0.0);
    }
    let bound = 0.5 / q.sup_norm().sqrt();
    if omega.norm() > bound {
        return Err(Error::OutsideOmegaQ { modulus: omega.norm(), bound });
    }
    let pair = fundamental_pair(omega, q, g);
    let u: Vec<C64> = (0..g.n())
        .map(|i| a * pair.z.values[i] + b * pair.ztilde.values[i])
        .collect();
    let w2 = omega * omega;
    let qs = sample_segments(q, g);
    let l2 = quad::integrate(g, |i, _| {
        let r = (u[i] - a * g.x(i) - b) / w2;
        C64::new(r.norm_sqr(), 0.0)
    });
    let d2 = quad::integrate(g, |i, s| C64::new((seg_at(g, &qs, i, s) * u[i]).norm_sqr(), 0.0));
    Ok((l2.re + d2.re).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(g: &Grid, v: &[C64], f: impl Fn(f64) -> C64) -> f64 {
        (0..g.n()).map(|i| (v[i] - f(g.x(i))).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn closed_forms() {
        let g = Grid::new(2001).unwrap();
        let q = ProfileFn::constant(1.0);
        let w = C64::new(2.0, 0.0);
        let p = fundamental_pair(w, &q, &g);
        assert!(max_err(&g, &p.z.values, |x| (w * x).sin() / w) < 1e-8);
        assert!(max_err(&g, &p.ztilde.values, |x| (w * x).cos()) < 1e-8);
        let w = C64::new(0.0, 0.3);
        let p = fundamental_pair(w, &q, &g);
        assert!(max_err(&g, &p.z.values, |x| C64::new((0.3 * x).sinh() / 0.3, 0.0)) < 1e-8);
        let p = fundamental_pair(ZERO, &ProfileFn::poly(vec![1.0, 2.0, -3.0]), &g);
        // Exact up to the roundoff of summing 2000 steps.
        assert!(max_err(&g, &p.z.values, |x| C64::new(x, 0.0)) < 1e-13);
        assert_eq!(max_err(&g, &p.ztilde.values, |_| C64::new(1.0, 0.0)), 0.0);
    }

    #[test]
    fn particular_a_closed_forms() {
        let g = Grid::new(2001).unwrap();
        let q = ProfileFn::constant(1.0);
        let f = ProfileFn::poly(vec![0.0, 1.0]);
        let a0 = particular_a(ZERO, &q, &f, &g);
        assert!(max_err(&g, &a0.values, |x| C64::new(x.powi(3) / 6.0, 0.0)) < 1e-12);
        let a1 = particular_a(C64::new(1.0, 0.0), &q, &f, &g);
        assert!(max_err(&g, &a1.values, |x| C64::new(x - x.sin(), 0.0)) < 1e-8);
        let d = a1.derivs.as_ref().unwrap();
        assert!(a1.values[0].norm() + d[0].norm() <= 1e-12);
        let z = particular_a(C64::new(1.0, 0.0), &q, &ProfileFn::zero(), &g);
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn b_errors_and_trivial() {
        let g = Grid::new(201).unwrap();
        let q = ProfileFn::constant(1.0);
        let one = ProfileFn::constant(1.0);
        let p1 = GridFunction::from_values(vec![C64::new(1.0, 0.0); g.n()]);
        assert!(matches!(
            particular_b(C64::new(1.0, 0.0), &q, &one, &p1, &g, Geometry::Radial),
            Err(Error::SingularIntegrand { .. })
        ));
        let p1 = fundamental_pair(ZERO, &q, &g).z;
        let b = particular_b(ZERO, &q, &one, &p1, &g, Geometry::Radial).unwrap();
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn symmetry() {
        let g = Grid::new(2001).unwrap();
        let q = ProfileFn::constant(1.0);
        assert!(symmetry_check(C64::new(3.0, 0.0), &q, &g) < 1e-13);
        assert!(symmetry_check(C64::new(1.0, 0.5), &q, &g) < 1e-10);
    }

    #[test]
    fn expansion() {
        let g = Grid::new(2001).unwrap();
        let q = ProfileFn::constant(1.0);
        assert_eq!(smallomega_expansion(ZERO, &q, 1.0, 0.0, &g).unwrap(), 0.0);
        let r1 = smallomega_expansion(C64::new(0.1, 0.0), &q, 1.0, 0.0, &g).unwrap();
        let r2 = smallomega_expansion(C64::new(0.05, 0.0), &q, 1.0, 0.0, &g).unwrap();
        assert!((0.9..=1.1).contains(&(r1 / r2)));
        assert!(matches!(
            smallomega_expansion(C64::new(0.6, 0.0), &q, 1.0, 0.0, &g),
            Err(Error::OutsideOmegaQ { .. })
        ));
    }
}
