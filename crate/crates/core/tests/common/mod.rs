//! Oracles shared by the integration tests. Everything here is written from
//! the closed-form survival function and avoids the library's optimizers.

#![allow(dead_code)]

/// `P(X1 >= x1, X2 >= x2)` straight from the three-shock construction.
pub fn sf(theta: [f64; 4], x1: u64, x2: u64) -> f64 {
    let [a, l0, l1, l2] = theta;
    let (x1, x2) = (x1 as f64, x2 as f64);
    (-(l1 * x1.powf(a) + l2 * x2.powf(a) + l0 * x1.max(x2).powf(a))).exp()
}

/// Joint pmf by second differences of the survival function.
pub fn pmf(theta: [f64; 4], x1: u64, x2: u64) -> f64 {
    sf(theta, x1, x2) - sf(theta, x1 + 1, x2) - sf(theta, x1, x2 + 1) + sf(theta, x1 + 1, x2 + 1)
}

pub fn loglik(theta: [f64; 4], pairs: &[(u64, u64)]) -> f64 {
    pairs.iter().map(|&(a, b)| pmf(theta, a, b).ln()).sum()
}

/// Univariate discrete Weibull pmf `p^(y^a) - p^((y+1)^a)`.
pub fn dw_pmf(alpha: f64, p: f64, y: u64) -> f64 {
    p.powf((y as f64).powf(alpha)) - p.powf(((y + 1) as f64).powf(alpha))
}

/// Plain Nelder-Mead minimizer with standard coefficients.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..max_iter {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() <= tol * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n][k] - centroid[k]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let xc = if fr < values[n] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f(&xc);
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n)
                        .map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    (simplex[best].clone(), values[best])
}

/// Direct maximization of the observed-data log-likelihood over
/// `(ln alpha, ln lambda0, ln lambda1, ln lambda2)` with restarts.
pub fn direct_max(pairs: &[(u64, u64)], start: [f64; 4]) -> ([f64; 4], f64) {
    let negll = |v: &[f64]| {
        let t = [v[0].exp(), v[1].exp(), v[2].exp(), v[3].exp()];
        let ll = loglik(t, pairs);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let mut x: Vec<f64> = start.iter().map(|v| v.max(1e-6).ln()).collect();
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let (nx, fx) = nelder_mead(negll, &x, 0.3, 20_000, 1e-14);
        x = nx;
        if best - fx < 1e-10 {
            best = best.min(fx);
            break;
        }
        best = fx;
    }
    ([x[0].exp(), x[1].exp(), x[2].exp(), x[3].exp()], -best)
}

/// Pearson statistic and upper-tail p-value of observed counts against
/// expected probabilities, pooling the tail until every expected count is
/// at least 5.
pub fn pearson_p_value(observed: &[f64], probs: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: f64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (ob, p) in observed.iter().zip(probs) {
        o += ob;
        e += p * n;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        let last = cells.last_mut().expect("at least one pooled cell");
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}
