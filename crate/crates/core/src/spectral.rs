//! The entire functions of `w` whose zeros matter: zeta and the two degenerate-case
//! functions, plus the k-moments they are built from.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{Geometry, Grid, MediumProfile};
use crate::ode::{fundamental_pair, particular_a_with, FundamentalPair, GridFunction};
use crate::quad::{integrate, inv_x, sample_segments, seg_at};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectralKind {
    Zeta,
    Upsilon1,
    Upsilon2,
}

impl SpectralKind {
    pub fn name(self) -> &'static str {
        match self {
            SpectralKind::Zeta => "zeta",
            SpectralKind::Upsilon1 => "u1",
            SpectralKind::Upsilon2 => "u2",
        }
    }
}

impl fmt::Display for SpectralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectralKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeta" => Ok(SpectralKind::Zeta),
            "u1" => Ok(SpectralKind::Upsilon1),
            "u2" => Ok(SpectralKind::Upsilon2),
            other => Err(Error::Parse(format!("unknown spectral kind '{other}' (zeta|u1|u2)"))),
        }
    }
}

/// `k1 = int z^2 z2 chi2/x`, `k2 = int z a z2 chi2/x`, `k3 = int a^2 z2 chi2/x`,
/// where `z2` is the `z` solution at `2w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMoments {
    pub omega: C64,
    pub k1: C64,
    pub k2: C64,
    pub k3: C64,
}

impl KMoments {
    pub fn zeta(&self) -> C64 {
        self.k2 * self.k2 - self.k1 * self.k3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSample {
    pub omega: C64,
    pub value: C64,
    pub kind: SpectralKind,
}

fn require(profile: &MediumProfile, geometry: Geometry) -> Result<()> {
    if profile.geometry == geometry {
        Ok(())
    } else {
        Err(Error::Geometry { expected: geometry.name() })
    }
}

/// k-moments from already integrated solutions; used by the forced solver to avoid recomputation.
pub fn k_moments_from(
    profile: &MediumProfile,
    g: &Grid,
    pair: &FundamentalPair,
    pair2: &FundamentalPair,
    a: &GridFunction,
) -> KMoments {
    let cs = sample_segments(&profile.chi2, g);
    let z = &pair.z.values;
    let z2 = &pair2.z.values;
    let a = &a.values;
    let w = |i: usize, s: usize| seg_at(g, &cs, i, s) * inv_x(g, i);
    KMoments {
        omega: pair.omega,
        k1: integrate(g, |i, s| z[i] * z[i] * z2[i] * w(i, s)),
        k2: integrate(g, |i, s| z[i] * a[i] * z2[i] * w(i, s)),
        k3: integrate(g, |i, s| a[i] * a[i] * z2[i] * w(i, s)),
    }
}

pub fn k_moments(omega: C64, profile: &MediumProfile, g: &Grid) -> Result<KMoments> {
    require(profile, Geometry::Radial)?;
    let pair = fundamental_pair(omega, &profile.q, g);
    let pair2 = fundamental_pair(2.0 * omega, &profile.q, g);
    let a = particular_a_with(&pair, &profile.f, g);
    Ok(k_moments_from(profile, g, &pair, &pair2, &a))
}

/// `zeta = k2^2 - k1 k3`.
pub fn zeta(omega: C64, profile: &MediumProfile, g: &Grid) -> Result<SpectralSample> {
    let k = k_moments(omega, profile, g)?;
    Ok(SpectralSample { omega, value: k.zeta(), kind: SpectralKind::Zeta })
}

/// `int z^2 z2 chi2 / x` (radial geometry).
pub fn upsilon1(omega: C64, profile: &MediumProfile, g: &Grid) -> Result<SpectralSample> {
    require(profile, Geometry::Radial)?;
    let z = fundamental_pair(omega, &profile.q, g).z.values;
    let z2 = fundamental_pair(2.0 * omega, &profile.q, g).z.values;
    let cs = sample_segments(&profile.chi2, g);
    let value = integrate(g, |i, s| z[i] * z[i] * z2[i] * seg_at(g, &cs, i, s) * inv_x(g, i));
    Ok(SpectralSample { omega, value, kind: SpectralKind::Upsilon1 })
}

/// The six interval-geometry coefficients `(a1, b1, c1, a2, b2, c2)`.
pub fn upsilon2_coefficients(omega: C64, profile: &MediumProfile, g: &Grid) -> Result<[C64; 6]> {
    require(profile, Geometry::Interval)?;
    let p = fundamental_pair(omega, &profile.q, g);
    let p2 = fundamental_pair(2.0 * omega, &profile.q, g);
    let (z, t) = (&p.z.values, &p.ztilde.values);
    let (z2, t2) = (&p2.z.values, &p2.ztilde.values);
    let cs = sample_segments(&profile.chi2, g);
    let c = |i: usize, s: usize| seg_at(g, &cs, i, s);
    Ok([
        integrate(g, |i, s| z[i] * z[i] * z2[i] * c(i, s)),
        2.0 * integrate(g, |i, s| z[i] * t[i] * z2[i] * c(i, s)),
        integrate(g, |i, s| t[i] * t[i] * z2[i] * c(i, s)),
        integrate(g, |i, s| z[i] * z[i] * t2[i] * c(i, s)),
        2.0 * integrate(g, |i, s| z[i] * t[i] * t2[i] * c(i, s)),
        integrate(g, |i, s| t[i] * t[i] * t2[i] * c(i, s)),
    ])
}

/// `(a1 c2 - a2 c1)^2 - (a1 b2 - a2 b1)(b1 c2 - b2 c1)` (interval geometry).
pub fn upsilon2(omega: C64, profile: &MediumProfile, g: &Grid) -> Result<SpectralSample> {
    let [a1, b1, c1, a2, b2, c2] = upsilon2_coefficients(omega, profile, g)?;
    let r = a1 * c2 - a2 * c1;
    let value = r * r - (a1 * b2 - a2 * b1) * (b1 * c2 - b2 * c1);
    Ok(SpectralSample { omega, value, kind: SpectralKind::Upsilon2 })
}

pub fn evaluate(kind: SpectralKind, omega: C64, profile: &MediumProfile, g: &Grid) -> Result<C64> {
    let s = match kind {
        SpectralKind::Zeta => zeta(omega, profile, g)?,
        SpectralKind::Upsilon1 => upsilon1(omega, profile, g)?,
        SpectralKind::Upsilon2 => upsilon2(omega, profile, g)?,
    };
    Ok(s.value)
}

/// Evaluates `kind` at every frequency in parallel; output order follows `omegas`.
pub fn scan(
    kind: SpectralKind,
    profile: &MediumProfile,
    omegas: &[C64],
    g: &Grid,
) -> Result<Vec<SpectralSample>> {
    omegas
        .par_iter()
        .map(|&omega| {
            evaluate(kind, omega, profile, g).map(|value| SpectralSample { omega, value, kind })
        })
        .collect()
}

/// CSV with header `omega_re,omega_im,value_re,value_im,kind`.
pub fn write_scan_csv<W: Write>(samples: &[SpectralSample], mut w: W) -> Result<()> {
    writeln!(w, "omega_re,omega_im,value_re,value_im,kind")?;
    for s in samples {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{}",
            s.omega.re, s.omega.im, s.value.re, s.value.im, s.kind
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::ProfileFn;

    const Z: C64 = C64::new(0.0, 0.0);

    #[test]
    fn zero_frequency_moments() {
        let p = MediumProfile::figure1();
        let g = p.grid(2001).unwrap();
        let k = k_moments(Z, &p, &g).unwrap();
        assert!((k.k1 - 1.0 / 3.0).norm() < 1e-12);
        assert!((k.k2 - 1.0 / 30.0).norm() < 1e-12);
        assert!((k.k3 - 1.0 / 252.0).norm() < 1e-12);
        assert!((k.zeta() + 1.0 / 4725.0).norm() < 1e-12);
    }

    #[test]
    fn geometry_guard() {
        let p = MediumProfile::figure2b();
        let g = p.grid(201).unwrap();
        assert!(matches!(zeta(Z, &p, &g), Err(Error::Geometry { .. })));
        assert!(matches!(upsilon1(Z, &p, &g), Err(Error::Geometry { .. })));
        assert!(matches!(
            upsilon2(Z, &MediumProfile::figure1(), &g),
            Err(Error::Geometry { .. })
        ));
    }

    #[test]
    fn trivial_cases() {
        let p = MediumProfile::figure1().with_f(ProfileFn::zero());
        let g = p.grid(401).unwrap();
        let k = k_moments(C64::new(1.3, 0.2), &p, &g).unwrap();
        assert_eq!(k.k2, Z);
        assert_eq!(k.k3, Z);
        assert_eq!(k.zeta(), Z);
        let p = MediumProfile::figure2b().with_chi2(ProfileFn::zero());
        assert_eq!(upsilon2(C64::new(2.0, 0.0), &p, &g).unwrap().value, Z);
    }

    #[test]
    fn upsilon_zero_frequency() {
        let g = Grid::with_breakpoints(2001, &[0.5]).unwrap();
        let v = upsilon2(Z, &MediumProfile::figure2b(), &g).unwrap().value;
        assert!((v - 1.0 / 432.0).norm() < 1e-12);
        let v = upsilon1(Z, &MediumProfile::figure2a(), &g).unwrap().value;
        assert!((v - 7.0 / 24.0).norm() < 1e-12);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [SpectralKind::Zeta, SpectralKind::Upsilon1, SpectralKind::Upsilon2] {
            assert_eq!(k.name().parse::<SpectralKind>().unwrap(), k);
        }
        assert!("foo".parse::<SpectralKind>().is_err());
    }
}
