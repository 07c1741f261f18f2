//! Small numerical toolbox: derivative-free 1-D minimization, finite-difference
//! Hessians, dense symmetric inversion and Gauss-Legendre rules.

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Brent's method on `[lo, hi]` without derivatives.
///
/// Converges to a local minimum; callers that need the global one on a
/// multimodal objective should bracket first (see [`grid_then_brent`]).
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut evals = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs().max(1.0) * 0.5 + 1e-15;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // parabolic fit through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: evals,
    }
}

/// Coarse grid scan over `[lo, hi]` followed by Brent refinement inside the
/// bracket around the best grid point.
pub fn grid_then_brent<F>(mut f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = 0usize;
    let mut best_val = f64::INFINITY;
    for k in 0..points {
        let v = f(lo + step * k as f64);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let left = lo + step * best.saturating_sub(1) as f64;
    let right = (lo + step * (best + 1) as f64).min(hi);
    let m = brent_minimize(&mut f, left, right, tol, 500);
    if m.value <= best_val {
        m
    } else {
        Minimum {
            x: lo + step * best as f64,
            value: best_val,
            evaluations: m.evaluations + points,
        }
    }
}

/// Central-difference Hessian of `f` at `x` with per-coordinate steps.
pub fn numerical_hessian<F>(f: F, x: &[f64], steps: &[f64]) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut h = vec![vec![0.0; n]; n];
    let mut pt = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        let hi = steps[i];
        pt[i] = x[i] + hi;
        let fp = f(&pt);
        pt[i] = x[i] - hi;
        let fm = f(&pt);
        pt[i] = x[i];
        h[i][i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..n {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                pt[i] = x[i] + si * hi;
                pt[j] = x[j] + sj * hj;
                let v = f(&pt);
                pt[i] = x[i];
                pt[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * hi * hj);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // invert L, then A^{-1} = L^{-T} L^{-1}
    let mut linv = vec![vec![0.0; n]; n];
    for i in 0..n {
        linv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i][k] * linv[k][j];
            }
            linv[i][j] = s / l[i][i];
        }
    }
    let mut inv = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in i.max(j)..n {
                s += linv[k][i] * linv[k][j];
            }
            inv[i][j] = s;
        }
    }
    Ok(inv)
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre_unit(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order.max(1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for k in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * k + 1) as f64 * z * p2 - k as f64 * p3) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}
