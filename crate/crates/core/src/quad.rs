//! Quadrature and finite differences on a [`Grid`], aware of breakpoints.
//!
//! Integrands that involve discontinuous coefficients are double-valued at a
//! breakpoint, so every routine here takes a closure `(node, segment) -> value`
//! and evaluates each segment with its own one-sided data.

use num_complex::Complex64;

use crate::medium::{Grid, ProfileFn};

type C64 = Complex64;

/// Composite Simpson on an odd-length slice of equally spaced samples.
pub fn simpson(h: f64, v: &[C64]) -> C64 {
    let n = v.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd number (>= 3) of samples, got {n}");
    let mut odd = C64::new(0.0, 0.0);
    let mut even = C64::new(0.0, 0.0);
    for (i, &x) in v.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += x;
        } else {
            even += x;
        }
    }
    (v[0] + v[n - 1] + 4.0 * odd + 2.0 * even) * (h / 3.0)
}

/// Simpson over the whole grid; `f(i, s)` is the integrand at node `i` seen from segment `s`.
pub fn integrate<F>(g: &Grid, f: F) -> C64
where
    F: Fn(usize, usize) -> C64,
{
    let mut total = C64::new(0.0, 0.0);
    let mut buf = Vec::new();
    for (s, (a, b)) in g.segments().into_iter().enumerate() {
        buf.clear();
        buf.extend((a..=b).map(|i| f(i, s)));
        total += simpson(g.h(), &buf);
    }
    total
}

/// Running integral `int_0^{x_i}` at every node.
///
/// Each cell uses the four-point rule through its neighbours, so the error
/// is smooth from node to node (no odd/even alternation as with cumulative Simpson).
pub fn cumulative<F>(g: &Grid, f: F) -> Vec<C64>
where
    F: Fn(usize, usize) -> C64,
{
    let h24 = g.h() / 24.0;
    let mut out = vec![C64::new(0.0, 0.0); g.n()];
    let mut buf = Vec::new();
    for (s, (a, b)) in g.segments().into_iter().enumerate() {
        buf.clear();
        buf.extend((a..=b).map(|i| f(i, s)));
        let len = buf.len();
        assert!(len >= 4, "segment too short for the cumulative rule");
        for j in 0..len - 1 {
            let cell = if j == 0 {
                9.0 * buf[0] + 19.0 * buf[1] - 5.0 * buf[2] + buf[3]
            } else if j == len - 2 {
                buf[len - 4] - 5.0 * buf[len - 3] + 19.0 * buf[len - 2] + 9.0 * buf[len - 1]
            } else {
                -buf[j - 1] + 13.0 * buf[j] + 13.0 * buf[j + 1] - buf[j + 2]
            };
            out[a + j + 1] = out[a + j] + cell * h24;
        }
    }
    out
}

/// Fornberg's finite-difference weights for the `m`-th derivative at `z`
/// from samples at `xs`.
pub fn fd_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Derivative of order `m` at every node of every segment, with formal accuracy `order`.
///
/// Interior nodes use centered stencils; the first and last nodes of a segment use
/// one-sided stencils widened by `m - 1` points so the order is kept.
pub fn derivative(g: &Grid, u: &[C64], m: usize, order: usize) -> Vec<Vec<C64>> {
    assert_eq!(u.len(), g.n());
    let central = if order % 2 == 0 { order + 1 } else { order + 2 };
    let edge = order + m;
    let scale = g.h().powi(m as i32);
    g.segments()
        .into_iter()
        .map(|(a, b)| {
            let len = b - a + 1;
            let half = central / 2;
            let mut cache: std::collections::HashMap<(usize, usize, usize), Vec<f64>> =
                std::collections::HashMap::new();
            (0..len)
                .map(|j| {
                    let (start, width) = if j >= half && j + half < len {
                        (j - half, central)
                    } else if j < half {
                        (0, edge.min(len))
                    } else {
                        (len - edge.min(len), edge.min(len))
                    };
                    let w = cache.entry((j - start, width, m)).or_insert_with(|| {
                        let xs: Vec<f64> = (0..width).map(|k| k as f64).collect();
                        fd_weights((j - start) as f64, &xs, m)
                    });
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, wk) in w.iter().enumerate() {
                        acc += u[a + start + k] * *wk;
                    }
                    acc / scale
                })
                .collect()
        })
        .collect()
}

/// Second derivative with second-order stencils (used by the discrete H² norms).
pub fn d2_order2(g: &Grid, u: &[C64]) -> Vec<Vec<C64>> {
    derivative(g, u, 2, 2)
}

/// Second derivative with fourth-order stencils (used by residual checks).
pub fn d2_order4(g: &Grid, u: &[C64]) -> Vec<Vec<C64>> {
    derivative(g, u, 2, 4)
}

/// Samples of `p` per segment, each segment using the piece that owns its interior.
pub fn sample_segments(p: &ProfileFn, g: &Grid) -> Vec<Vec<f64>> {
    g.segments()
        .into_iter()
        .map(|(a, b)| {
            let mid = 0.5 * (g.x(a) + g.x(b));
            let piece = &p.pieces()[p.piece_index(mid)];
            (a..=b).map(|i| piece.eval(g.x(i))).collect()
        })
        .collect()
}

/// Looks up a per-segment array at global node `i` in segment `s`.
#[inline]
pub fn seg_at<T: Copy>(g: &Grid, segs: &[Vec<T>], i: usize, s: usize) -> T {
    let start = if s == 0 { 0 } else { g.breaks()[s - 1] };
    segs[s][i - start]
}

/// The weight `1/x` with value 0 at `x = 0` (every weighted numerator vanishes to second order there).
#[inline]
pub fn inv_x(g: &Grid, i: usize) -> f64 {
    if i == 0 {
        0.0
    } else {
        1.0 / g.x(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let g = Grid::new(11).unwrap();
        let v = integrate(&g, |i, _| c(g.x(i).powi(3) - 2.0 * g.x(i)));
        assert!((v.re - (0.25 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let g = Grid::new(201).unwrap();
        let cum = cumulative(&g, |i, _| c(g.x(i).cos()));
        let err = (0..g.n())
            .map(|i| (cum[i].re - g.x(i).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn fornberg_central() {
        let w = fd_weights(2.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 2);
        let expect = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0, 3.0], 2);
        for (a, b) in w.iter().zip([2.0, -5.0, 4.0, -1.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn second_derivative_orders() {
        for (order, tol) in [(2usize, 1e-3), (4, 1e-7)] {
            let g = Grid::new(201).unwrap();
            let u: Vec<C64> = g.nodes().iter().map(|&x| c((2.0 * x).sin())).collect();
            let d = derivative(&g, &u, 2, order);
            let err = (0..g.n())
                .map(|i| (d[0][i].re + 4.0 * (2.0 * g.x(i)).sin()).abs())
                .fold(0.0, f64::max);
            assert!(err < tol, "order {order}: {err}");
        }
    }

    #[test]
    fn one_sided_at_breaks() {
        let g = Grid::with_breakpoints(41, &[0.5]).unwrap();
        let ind = ProfileFn::indicator(0.5, 1.0).unwrap();
        let segs = sample_segments(&ind, &g);
        assert_eq!(seg_at(&g, &segs, 20, 0), 0.0);
        assert_eq!(seg_at(&g, &segs, 20, 1), 1.0);
        let v = integrate(&g, |i, s| c(seg_at(&g, &segs, i, s) * g.x(i) * g.x(i)));
        assert!((v.re - 7.0 / 24.0).abs() < 1e-14);
    }
}
