//! State vectors `(u1, u2)` and the discrete `H² x L²` inner product.

use num_complex::Complex64;

use crate::medium::Grid;
use crate::ode::GridFunction;
use crate::quad::{d2_order2, seg_at};

type C64 = Complex64;

/// `X` (interval) or `X_diamond` (radial, `u1(0) = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceMode {
    X,
    XDiamond,
}

impl SpaceMode {
    pub fn kernel_dim(self) -> usize {
        match self {
            SpaceMode::X => 2,
            SpaceMode::XDiamond => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub u1: GridFunction,
    pub u2: GridFunction,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        Self { u1: GridFunction::zeros(n), u2: GridFunction::zeros(n) }
    }

    pub fn from_values(u1: Vec<C64>, u2: Vec<C64>) -> Self {
        Self { u1: GridFunction::from_values(u1), u2: GridFunction::from_values(u2) }
    }

    pub fn scale(&self, a: C64) -> StateVector {
        self.combine(a, self, C64::new(0.0, 0.0))
    }

    /// `a*self + b*other`.
    pub fn combine(&self, a: C64, other: &StateVector, b: C64) -> StateVector {
        StateVector { u1: self.u1.combine(a, &other.u1, b), u2: self.u2.combine(a, &other.u2, b) }
    }
}

/// An element of the discrete space together with its second derivative per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct XVec {
    pub u1: Vec<C64>,
    pub d2u1: Vec<Vec<C64>>,
    pub u2: Vec<C64>,
}

impl XVec {
    pub fn scale(&self, a: C64) -> XVec {
        XVec {
            u1: self.u1.iter().map(|v| a * v).collect(),
            d2u1: self.d2u1.iter().map(|s| s.iter().map(|v| a * v).collect()).collect(),
            u2: self.u2.iter().map(|v| a * v).collect(),
        }
    }

    /// `self + a*other`.
    pub fn axpy(&self, a: C64, other: &XVec) -> XVec {
        let add = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(p, q)| p + a * q).collect();
        XVec {
            u1: add(&self.u1, &other.u1),
            d2u1: self.d2u1.iter().zip(&other.d2u1).map(|(x, y)| add(x, y)).collect(),
            u2: add(&self.u2, &other.u2),
        }
    }

    pub fn zeros_like(&self) -> XVec {
        self.scale(C64::new(0.0, 0.0))
    }
}

/// Simpson-weighted `H² x L²` inner product on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteXSpace {
    pub grid: Grid,
    pub mode: SpaceMode,
    weights: Vec<Vec<f64>>,
}

impl DiscreteXSpace {
    pub fn new(grid: Grid, mode: SpaceMode) -> Self {
        let h = grid.h();
        let weights = grid
            .segments()
            .into_iter()
            .map(|(a, b)| {
                let len = b - a + 1;
                (0..len)
                    .map(|j| {
                        let w = if j == 0 || j == len - 1 {
                            1.0
                        } else if j % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        w * h / 3.0
                    })
                    .collect()
            })
            .collect();
        Self { grid, mode, weights }
    }

    /// Second derivative of `u1` by second-order differences.
    pub fn lift(&self, u: &StateVector) -> XVec {
        XVec {
            u1: u.u1.values.clone(),
            d2u1: d2_order2(&self.grid, &u.u1.values),
            u2: u.u2.values.clone(),
        }
    }

    /// Simpson sum of `f(i, s, j)` weighted per segment (`j` is the node index within segment `s`).
    fn sum<F: Fn(usize, usize, usize) -> C64>(&self, f: F) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (s, (a, _)) in self.grid.segments().into_iter().enumerate() {
            for (j, &w) in self.weights[s].iter().enumerate() {
                acc += w * f(a + j, s, j);
            }
        }
        acc
    }

    /// `<u, v>_X = int u1 conj(v1) + u1'' conj(v1'') + u2 conj(v2)`.
    pub fn inner(&self, u: &XVec, v: &XVec) -> C64 {
        self.sum(|i, s, j| {
            u.u1[i] * v.u1[i].conj() + u.d2u1[s][j] * v.d2u1[s][j].conj() + u.u2[i] * v.u2[i].conj()
        })
    }

    pub fn norm(&self, u: &XVec) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    pub fn x_inner(&self, u: &StateVector, v: &StateVector) -> C64 {
        self.inner(&self.lift(u), &self.lift(v))
    }

    pub fn x_norm(&self, u: &StateVector) -> f64 {
        self.norm(&self.lift(u))
    }

    /// `int f(i, s)` with the same Simpson weights.
    pub fn integrate<F: Fn(usize, usize) -> C64>(&self, f: F) -> C64 {
        self.sum(|i, s, _| f(i, s))
    }

    /// Per-segment lookup helper.
    pub fn at<T: Copy>(&self, segs: &[Vec<T>], i: usize, s: usize) -> T {
        seg_at(&self.grid, segs, i, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_norms() {
        let g = Grid::new(2001).unwrap();
        let sp = DiscreteXSpace::new(g.clone(), SpaceMode::X);
        let zero = vec![C64::new(0.0, 0.0); g.n()];
        let x: Vec<C64> = g.nodes().iter().map(|&t| C64::new(t, 0.0)).collect();
        let x2: Vec<C64> = g.nodes().iter().map(|&t| C64::new(t * t, 0.0)).collect();
        let one = vec![C64::new(1.0, 0.0); g.n()];
        let u = StateVector::from_values(x, zero.clone());
        assert!((sp.x_inner(&u, &u).re - 1.0 / 3.0).abs() < 1e-6);
        let u = StateVector::from_values(x2, zero.clone());
        assert!((sp.x_inner(&u, &u).re - 21.0 / 5.0).abs() < 1e-4);
        let u = StateVector::from_values(one, zero);
        assert!((sp.x_norm(&u) - 1.0).abs() < 1e-12);
    }
}
