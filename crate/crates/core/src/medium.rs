//! Coefficient profiles on `[0,1]` and the uniform grids they are sampled on.
//!
//! Every profile is a piecewise polynomial of degree at most six. Pieces are
//! left-closed and right-open, except that the final piece also owns `x = 1`.

use serde::Deserialize;

use crate::error::{Error, Result};

/// Largest admissible polynomial degree of a profile piece.
pub const MAX_DEGREE: usize = 6;

const PARTITION_TOL: f64 = 1e-12;

/// Horner evaluation of `sum c_k x^k`.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

fn trimmed(coeffs: &[f64]) -> &[f64] {
    let len = coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    &coeffs[..len]
}

/// Real roots of a polynomial inside `[a, b]`, isolated through the roots of
/// its derivative and refined by bisection.
pub fn real_roots_in(coeffs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = trimmed(coeffs);
    match c.len() {
        0 | 1 => Vec::new(),
        2 => {
            let r = -c[0] / c[1];
            if (a..=b).contains(&r) {
                vec![r]
            } else {
                Vec::new()
            }
        }
        _ => {
            let mut knots = vec![a];
            knots.extend(real_roots_in(&poly_derivative(c), a, b));
            knots.push(b);
            let mut roots: Vec<f64> = Vec::new();
            for w in knots.windows(2) {
                let (mut lo, mut hi) = (w[0], w[1]);
                let (mut flo, fhi) = (poly_eval(c, lo), poly_eval(c, hi));
                if flo == 0.0 {
                    roots.push(lo);
                    continue;
                }
                if fhi == 0.0 || flo.signum() == fhi.signum() {
                    continue;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = poly_eval(c, mid);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            if poly_eval(c, b) == 0.0 {
                roots.push(b);
            }
            roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
            roots
        }
    }
}

/// One polynomial piece of a [`ProfileFn`].
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    /// Coefficients in the monomial basis, lowest order first.
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn eval(&self, x: f64) -> f64 {
        poly_eval(&self.coeffs, x)
    }

    /// Exact `max |p|` over the closed piece interval.
    pub fn sup_abs(&self) -> f64 {
        let mut best = self.eval(self.a).abs().max(self.eval(self.b).abs());
        for r in real_roots_in(&poly_derivative(&self.coeffs), self.a, self.b) {
            best = best.max(self.eval(r).abs());
        }
        best
    }
}

/// A real piecewise-polynomial function on `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFn {
    pieces: Vec<Piece>,
}

impl ProfileFn {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Domain("no pieces".into()));
        }
        if (pieces[0].a - 0.0).abs() > PARTITION_TOL {
            return Err(Error::Domain(format!("first piece starts at {}", pieces[0].a)));
        }
        let last = pieces.last().expect("nonempty");
        if (last.b - 1.0).abs() > PARTITION_TOL {
            return Err(Error::Domain(format!("last piece ends at {}", last.b)));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.a.is_finite() && p.b.is_finite()) || p.b <= p.a {
                return Err(Error::Domain(format!(
                    "piece {i} has empty or invalid interval [{}, {})",
                    p.a, p.b
                )));
            }
            if p.coeffs.len() > MAX_DEGREE + 1 {
                return Err(Error::InvalidProfile(format!(
                    "piece {i} has degree {} > {MAX_DEGREE}",
                    p.coeffs.len() - 1
                )));
            }
            if p.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidProfile(format!("piece {i} has non-finite coefficients")));
            }
        }
        for (i, w) in pieces.windows(2).enumerate() {
            let gap = w[1].a - w[0].b;
            if gap > PARTITION_TOL {
                return Err(Error::Domain(format!("gap between pieces {i} and {}", i + 1)));
            }
            if gap < -PARTITION_TOL {
                return Err(Error::Domain(format!("pieces {i} and {} overlap", i + 1)));
            }
        }
        let mut pieces = pieces;
        let n = pieces.len();
        pieces[0].a = 0.0;
        pieces[n - 1].b = 1.0;
        for i in 1..n {
            pieces[i].a = pieces[i - 1].b;
        }
        Ok(Self { pieces })
    }

    pub fn constant(value: f64) -> Self {
        Self::poly(vec![value])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn poly(coeffs: Vec<f64>) -> Self {
        Self {
            pieces: vec![Piece { a: 0.0, b: 1.0, coeffs }],
        }
    }

    /// Value 1 on `[a, b)` and 0 elsewhere (the point `x = 1` belongs to the last piece).
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) || !(b > a && b <= 1.0) {
            return Err(Error::Domain(format!("indicator interval ({a}, {b}) not inside [0,1]")));
        }
        let mut pieces = Vec::new();
        if a > 0.0 {
            pieces.push(Piece { a: 0.0, b: a, coeffs: vec![0.0] });
        }
        pieces.push(Piece { a, b, coeffs: vec![1.0] });
        if b < 1.0 {
            pieces.push(Piece { a: b, b: 1.0, coeffs: vec![0.0] });
        }
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Index of the piece owning `x` under the left-closed convention.
    pub fn piece_index(&self, x: f64) -> usize {
        self.pieces
            .iter()
            .rposition(|p| x >= p.a)
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// Multiplies every piece by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    a: p.a,
                    b: p.b,
                    coeffs: p.coeffs.iter().map(|c| c * factor).collect(),
                })
                .collect(),
        }
    }

    /// Interior piece boundaries.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.a).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.pieces.iter().map(Piece::sup_abs).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.coeffs.iter().all(|&c| c == 0.0))
    }

    /// Whether adjacent pieces agree at their shared endpoint.
    pub fn is_continuous(&self) -> bool {
        self.pieces.windows(2).all(|w| {
            let x = w[1].a;
            (w[0].eval(x) - w[1].eval(x)).abs() <= 1e-12 * (1.0 + w[0].eval(x).abs())
        })
    }
}

/// Values of `p` at every node of `g`; breakpoint nodes take the value of the piece starting there.
pub fn sample(p: &ProfileFn, g: &Grid) -> Vec<f64> {
    (0..g.n()).map(|i| p.eval(g.x(i))).collect()
}

/// Whether spectral integrands carry the `1/x` weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Interval,
    Radial,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Interval => "interval",
            Geometry::Radial => "radial",
        }
    }
}

/// The coefficient triple `(q, chi1, chi2)`, the source `f` and the geometry flag.
#[derive(Debug, Clone)]
pub struct MediumProfile {
    pub q: ProfileFn,
    pub chi1: ProfileFn,
    pub chi2: ProfileFn,
    pub f: ProfileFn,
    pub geometry: Geometry,
    q_sup: f64,
    m_bound: f64,
}

impl MediumProfile {
    pub fn new(
        q: ProfileFn,
        chi1: ProfileFn,
        chi2: ProfileFn,
        f: ProfileFn,
        geometry: Geometry,
    ) -> Result<Self> {
        let q_sup = q.sup_norm();
        if q_sup == 0.0 {
            return Err(Error::InvalidProfile("q vanishes identically (Q = 0)".into()));
        }
        if !q.is_continuous() {
            log::warn!("q is discontinuous; the small-frequency theory assumes q in C^1");
        }
        let m_bound = chi1.sup_norm() + chi2.sup_norm();
        Ok(Self {
            q,
            chi1,
            chi2,
            f,
            geometry,
            q_sup,
            m_bound,
        })
    }

    /// `Q = sup |q|`.
    pub fn q_sup(&self) -> f64 {
        self.q_sup
    }

    /// `M = sup |chi1| + sup |chi2|`.
    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    /// Radius `1/(2 sqrt(Q))` of the small-frequency disk.
    pub fn omega_q_radius(&self) -> f64 {
        0.5 / self.q_sup.sqrt()
    }

    pub fn with_chi1(&self, chi1: ProfileFn) -> Self {
        Self::new(self.q.clone(), chi1, self.chi2.clone(), self.f.clone(), self.geometry)
            .expect("q unchanged")
    }

    pub fn with_chi2(&self, chi2: ProfileFn) -> Self {
        Self::new(self.q.clone(), self.chi1.clone(), chi2, self.f.clone(), self.geometry)
            .expect("q unchanged")
    }

    pub fn with_f(&self, f: ProfileFn) -> Self {
        Self::new(self.q.clone(), self.chi1.clone(), self.chi2.clone(), f, self.geometry)
            .expect("q unchanged")
    }

    pub fn with_geometry(&self, geometry: Geometry) -> Self {
        let mut p = self.clone();
        p.geometry = geometry;
        p
    }

    /// Union of all coefficient breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = [&self.q, &self.chi1, &self.chi2, &self.f]
            .iter()
            .flat_map(|p| p.breakpoints())
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= PARTITION_TOL);
        pts
    }

    /// A grid of `n` nodes that places a Simpson panel boundary at every breakpoint.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::with_breakpoints(n, &self.breakpoints())
    }

    /// `q = 1, chi2 = 1, f = x`, radial.
    pub fn figure1() -> Self {
        Self::new(
            ProfileFn::constant(1.0),
            ProfileFn::zero(),
            ProfileFn::constant(1.0),
            ProfileFn::poly(vec![0.0, 1.0]),
            Geometry::Radial,
        )
        .expect("builtin")
    }

    /// `q = 1, chi2 = indicator of (1/2, 1)`, radial.
    pub fn figure2a() -> Self {
        Self::new(
            ProfileFn::constant(1.0),
            ProfileFn::zero(),
            ProfileFn::indicator(0.5, 1.0).expect("builtin"),
            ProfileFn::zero(),
            Geometry::Radial,
        )
        .expect("builtin")
    }

    /// `q = 1, chi2 = 1`, interval.
    pub fn figure2b() -> Self {
        Self::new(
            ProfileFn::constant(1.0),
            ProfileFn::zero(),
            ProfileFn::constant(1.0),
            ProfileFn::zero(),
            Geometry::Interval,
        )
        .expect("builtin")
    }
}

/// Uniform grid on `[0,1]` with an odd node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    breaks: Vec<usize>,
}

/// Nodes per segment needed by the one-sided fourth-order stencils.
const MIN_SEGMENT_NODES: usize = 7;

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_breakpoints(n, &[])
    }

    /// Grid whose node set contains each breakpoint at an even index.
    pub fn with_breakpoints(n: usize, points: &[f64]) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::Grid(format!("node count must be odd and >= 3, got {n}")));
        }
        let h = 1.0 / (n - 1) as f64;
        let mut breaks = Vec::new();
        for &p in points {
            if p <= 0.0 || p >= 1.0 {
                continue;
            }
            let idx = (p * (n - 1) as f64).round() as usize;
            if (idx as f64 * h - p).abs() > 1e-9 * h {
                return Err(Error::Grid(format!(
                    "breakpoint {p} is not a node of the {n}-node grid"
                )));
            }
            if idx % 2 != 0 {
                return Err(Error::Grid(format!(
                    "breakpoint {p} falls on odd node {idx}; Simpson panels would straddle it"
                )));
            }
            breaks.push(idx);
        }
        breaks.sort_unstable();
        breaks.dedup();
        let g = Self { n, h, breaks };
        if g.breaks.is_empty() && n < MIN_SEGMENT_NODES {
            return Ok(g);
        }
        for (a, b) in g.segments() {
            if b - a + 1 < MIN_SEGMENT_NODES {
                return Err(Error::Grid(format!(
                    "segment [{a}, {b}] has fewer than {MIN_SEGMENT_NODES} nodes"
                )));
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Node indices of interior breakpoints.
    pub fn breaks(&self) -> &[usize] {
        &self.breaks
    }

    /// Inclusive node ranges between consecutive breakpoints.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.breaks.len() + 1);
        let mut start = 0;
        for &b in &self.breaks {
            out.push((start, b));
            start = b;
        }
        out.push((start, self.n - 1));
        out
    }

    /// Grid with the same breakpoints and `2n - 1` nodes.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n - 1,
            h: self.h / 2.0,
            breaks: self.breaks.iter().map(|b| 2 * b).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceSpec {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ProfileSpec {
    Constant { value: f64 },
    Indicator { a: f64, b: f64 },
    Poly { coeffs: Vec<f64> },
    Piecewise { pieces: Vec<PieceSpec> },
}

impl ProfileSpec {
    fn build(self, name: &str) -> Result<ProfileFn> {
        let built = match self {
            ProfileSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidProfile(format!("{name}: non-finite constant")));
                }
                Ok(ProfileFn::constant(value))
            }
            ProfileSpec::Indicator { a, b } => ProfileFn::indicator(a, b),
            ProfileSpec::Poly { coeffs } => ProfileFn::new(vec![Piece { a: 0.0, b: 1.0, coeffs }]),
            ProfileSpec::Piecewise { pieces } => ProfileFn::new(
                pieces
                    .into_iter()
                    .map(|p| Piece { a: p.a, b: p.b, coeffs: p.coeffs })
                    .collect(),
            ),
        };
        built.map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("{name}: {m}")),
            Error::InvalidProfile(m) => Error::InvalidProfile(format!("{name}: {m}")),
            other => other,
        })
    }
}

fn default_geometry() -> Geometry {
    Geometry::Radial
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigSpec {
    #[serde(default = "default_geometry")]
    geometry: Geometry,
    q: ProfileSpec,
    chi2: ProfileSpec,
    chi1: Option<ProfileSpec>,
    f: Option<ProfileSpec>,
}

/// Parses a JSON profile config.
///
/// ```json
/// {"geometry":"radial","q":{"type":"constant","value":1.0},
///  "chi2":{"type":"indicator","a":0.5,"b":1.0},
///  "chi1":{"type":"constant","value":0.0},
///  "f":{"type":"poly","coeffs":[0.0,1.0]}}
/// ```
///
/// `chi1` and `f` default to zero and `geometry` to radial.
pub fn load_profile(config_text: &str) -> Result<MediumProfile> {
    let spec: ConfigSpec =
        serde_json::from_str(config_text).map_err(|e| Error::Parse(e.to_string()))?;
    let q = spec.q.build("q")?;
    let chi2 = spec.chi2.build("chi2")?;
    let chi1 = match spec.chi1 {
        Some(s) => s.build("chi1")?,
        None => ProfileFn::zero(),
    };
    let f = match spec.f {
        Some(s) => s.build("f")?,
        None => ProfileFn::zero(),
    };
    MediumProfile::new(q, chi1, chi2, f, spec.geometry)
}
