//! Maximum-likelihood estimation of BDW parameters.
//!
//! The observed-data likelihood is maximized by a nested EM: the outer loop
//! replaces each integer pair by a representation of its latent continuous
//! MOBW pair, and the inner loop fits the MOBW model to that complete data by
//! an EM over the unobserved failure causes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bdw::{from_mobw, BDWParams, Rates};
use crate::error::{Error, Result};
use crate::gof::dw_fit_min_chisq;
use crate::mobw::{cell_quadrature, complete_loglik, ml_predict, CompletePair, MOBWParams, Region};
use crate::optim::{gauss_legendre_unit, numerical_hessian, spd_inverse};
use crate::univariate::{dw_fit_ml, DWParams, LN_ALPHA_RANGE};

/// Which derived univariate sample to take from a bivariate dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    X1,
    X2,
    Min,
}

/// Paired counts with the partition into ties (`x1 = x2`), `x1 < x2` and `x1 > x2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BivariateDataset {
    pairs: Vec<(u64, u64)>,
    i0: Vec<usize>,
    i1: Vec<usize>,
    i2: Vec<usize>,
}

impl BivariateDataset {
    pub fn new(pairs: Vec<(u64, u64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyData);
        }
        let (mut i0, mut i1, mut i2) = (Vec::new(), Vec::new(), Vec::new());
        for (k, &(a, b)) in pairs.iter().enumerate() {
            match a.cmp(&b) {
                std::cmp::Ordering::Equal => i0.push(k),
                std::cmp::Ordering::Less => i1.push(k),
                std::cmp::Ordering::Greater => i2.push(k),
            }
        }
        Ok(Self { pairs, i0, i1, i2 })
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }
    pub fn len(&self) -> usize {
        self.pairs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
    /// Indices with `x1 = x2`.
    pub fn i0(&self) -> &[usize] {
        &self.i0
    }
    /// Indices with `x1 < x2`.
    pub fn i1(&self) -> &[usize] {
        &self.i1
    }
    /// Indices with `x1 > x2`.
    pub fn i2(&self) -> &[usize] {
        &self.i2
    }
    pub fn n0(&self) -> usize {
        self.i0.len()
    }
    pub fn n1(&self) -> usize {
        self.i1.len()
    }
    pub fn n2(&self) -> usize {
        self.i2.len()
    }

    pub fn column(&self, column: Column) -> Vec<u64> {
        self.pairs
            .iter()
            .map(|&(a, b)| match column {
                Column::X1 => a,
                Column::X2 => b,
                Column::Min => a.min(b),
            })
            .collect()
    }

    /// The dataset with the two coordinates exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.pairs.iter().map(|&(a, b)| (b, a)).collect()).expect("non-empty")
    }
}

pub(crate) fn loglik_rates(r: &Rates, data: &BivariateDataset) -> Result<f64> {
    let mut total = 0.0;
    for (index, &(a, b)) in data.pairs.iter().enumerate() {
        let v = r.ln_pmf(a, b);
        if v == f64::NEG_INFINITY {
            return Err(Error::ZeroProbability { index });
        }
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        total += v;
    }
    Ok(total)
}

/// Observed-data log-likelihood `sum ln P(X1 = x1i, X2 = x2i)`.
pub fn bdw_loglik(theta: &MOBWParams, data: &BivariateDataset) -> Result<f64> {
    loglik_rates(&theta.rates(), data)
}

/// Estimator used for the three univariate fits behind the starting values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalEstimator {
    #[default]
    MaxLikelihood,
    /// Minimum Pearson chi-square, the estimator behind the classic published
    /// fits of the example datasets.
    MinChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Initialization {
    pub params: MOBWParams,
    /// Fits of the `x1`, `x2` and `min` columns.
    pub marginals: [DWParams; 3],
    pub warnings: Vec<String>,
}

/// Starting values from univariate fits of `x1`, `x2` and `min(x1, x2)`.
pub fn init_estimates(data: &BivariateDataset) -> Result<MOBWParams> {
    Ok(init_estimates_with(data, MarginalEstimator::MaxLikelihood)?.params)
}

/// Starting values from univariate fits of the three columns.
///
/// With `q1 = p0 p1`, `q2 = p0 p2` and `q = p0 p1 p2` taken from the fits,
/// `p0 = q1 q2 / q`, `p1 = q / q2`, `p2 = q / q1` and `alpha` is the mean of
/// the three shapes. Solutions outside the parameter space are clamped to
/// the boundary with a warning.
pub fn init_estimates_with(
    data: &BivariateDataset,
    estimator: MarginalEstimator,
) -> Result<Initialization> {
    let fit = |c: Column| -> Result<DWParams> {
        let col = data.column(c);
        match estimator {
            MarginalEstimator::MaxLikelihood => Ok(dw_fit_ml(&col)?.params),
            MarginalEstimator::MinChiSquare => Ok(dw_fit_min_chisq(&col)?.params),
        }
    };
    init_from_marginals([fit(Column::X1)?, fit(Column::X2)?, fit(Column::Min)?])
}

/// Starting values from given fits of the `x1`, `x2` and `min` columns.
pub fn init_from_marginals(m: [DWParams; 3]) -> Result<Initialization> {
    let alpha = (m[0].alpha() + m[1].alpha() + m[2].alpha()) / 3.0;
    let (r1, r2, r) = (m[0].rate(), m[1].rate(), m[2].rate());
    let mut warnings = Vec::new();
    let mut lambda0 = r1 + r2 - r;
    let mut lambda1 = r - r2;
    let mut lambda2 = r - r1;
    if lambda0 < 0.0 {
        warnings.push(format!(
            "initial p0 = {:.6} exceeds 1; clamped to 1",
            (-lambda0).exp()
        ));
        lambda0 = 0.0;
    }
    const FLOOR: f64 = 1e-8;
    for (name, l) in [("p1", &mut lambda1), ("p2", &mut lambda2)] {
        if *l < FLOOR {
            warnings.push(format!(
                "initial {name} = {:.6} is not below 1; clamped to exp(-{FLOOR})",
                (-*l).exp()
            ));
            *l = FLOOR;
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Initialization {
        params: MOBWParams::new(alpha, lambda0, lambda1, lambda2)?,
        marginals: m,
        warnings,
    })
}

/// Result of the inner EM on complete MOBW data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerFit {
    pub params: MOBWParams,
    /// Weighted complete-data log-likelihood at `params`.
    pub pseudo_loglik: f64,
    pub iterations: usize,
    /// Pseudo log-likelihood after every M-step.
    pub trace: Vec<f64>,
}

/// Sufficient statistics of weighted complete data given cause
/// probabilities.
struct Prepared {
    ln_y1: Vec<f64>,
    ln_y2: Vec<f64>,
    ln_max: Vec<f64>,
    weight: Vec<f64>,
    region: Vec<Region>,
    events: f64,
    sum_ln: f64,
}

impl Prepared {
    fn new(sample: &[CompletePair]) -> Result<Self> {
        let n = sample.len();
        let mut p = Prepared {
            ln_y1: Vec::with_capacity(n),
            ln_y2: Vec::with_capacity(n),
            ln_max: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
            region: Vec::with_capacity(n),
            events: 0.0,
            sum_ln: 0.0,
        };
        for (index, c) in sample.iter().enumerate() {
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "weight at index {index} must be finite and >= 0"
                )));
            }
            if c.weight == 0.0 {
                continue;
            }
            if !(c.y1 > 0.0 && c.y2 > 0.0 && c.y1.is_finite() && c.y2.is_finite()) {
                return Err(Error::DegenerateData(format!(
                    "latent pair {index} = ({}, {}) needs positive finite coordinates",
                    c.y1, c.y2
                )));
            }
            let (l1, l2) = (c.y1.ln(), c.y2.ln());
            p.ln_y1.push(l1);
            p.ln_y2.push(l2);
            p.ln_max.push(l1.max(l2));
            p.weight.push(c.weight);
            p.region.push(c.region);
            if c.region == Region::Tie {
                p.events += c.weight;
                p.sum_ln += c.weight * l1;
            } else {
                p.events += 2.0 * c.weight;
                p.sum_ln += c.weight * (l1 + l2);
            }
        }
        if p.weight.is_empty() {
            return Err(Error::EmptyData);
        }
        Ok(p)
    }

    /// Exposures `(T0, T1, T2)` at shape `alpha`.
    fn exposures(&self, alpha: f64) -> [f64; 3] {
        let mut t = [0.0; 3];
        for k in 0..self.weight.len() {
            let w = self.weight[k];
            t[0] += w * (alpha * self.ln_max[k]).exp();
            t[1] += w * (alpha * self.ln_y1[k]).exp();
            t[2] += w * (alpha * self.ln_y2[k]).exp();
        }
        t
    }

    /// Exposures and their derivatives in `alpha`, `sum w y^alpha ln y`.
    fn exposures_and_slopes(&self, alpha: f64) -> ([f64; 3], [f64; 3]) {
        let mut t = [0.0; 3];
        let mut s = [0.0; 3];
        for k in 0..self.weight.len() {
            let w = self.weight[k];
            for (j, l) in [self.ln_max[k], self.ln_y1[k], self.ln_y2[k]]
                .into_iter()
                .enumerate()
            {
                let v = w * (alpha * l).exp();
                t[j] += v;
                s[j] += v * l;
            }
        }
        (t, s)
    }

    /// Expected cause counts `(N0, N1, N2)` under `theta`.
    fn cause_counts(&self, theta: &MOBWParams) -> [f64; 3] {
        let (l0, l1, l2) = (theta.lambda0(), theta.lambda1(), theta.lambda2());
        let w0a = l0 / (l0 + l2);
        let w0b = l0 / (l0 + l1);
        let mut n = [0.0; 3];
        for k in 0..self.weight.len() {
            let w = self.weight[k];
            match self.region[k] {
                Region::Tie => n[0] += w,
                Region::Above => {
                    n[1] += w;
                    n[0] += w * w0a;
                    n[2] += w * (1.0 - w0a);
                }
                Region::Below => {
                    n[2] += w;
                    n[0] += w * w0b;
                    n[1] += w * (1.0 - w0b);
                }
            }
        }
        n
    }
}

/// Inner EM: maximizes the weighted complete-data MOBW log-likelihood.
///
/// E-step: for `y1 < y2` the failure of `Y1` is due to `U1`, and that of
/// `Y2` to `U0` with probability `lambda0 / (lambda0 + lambda2)`; ties are
/// failures due to `U0`. M-step: with expected counts `Nj` and exposures
/// `Tj(alpha)`, `lambda_j = Nj / Tj(alpha)` and `alpha` maximizes the profiled
/// objective, which is concave in `alpha`.
pub fn inner_em_mobw(sample: &[CompletePair], start: &MOBWParams) -> Result<InnerFit> {
    inner_em_with(sample, start, 1e-10, 10_000)
}

/// Root of a decreasing function on `[lo, hi]`, or the endpoint it is
/// pushed against.
fn bisect_decreasing<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    if g(lo) <= 0.0 {
        return lo;
    }
    if g(hi) >= 0.0 {
        return hi;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

pub(crate) fn inner_em_with(
    sample: &[CompletePair],
    start: &MOBWParams,
    tol: f64,
    max_iter: usize,
) -> Result<InnerFit> {
    let prep = Prepared::new(sample)?;
    if prep.region.iter().all(|r| *r == Region::Tie) {
        return Err(Error::Unidentifiable(
            "all pairs are ties; lambda1 and lambda2 cannot be estimated".into(),
        ));
    }
    let mut theta = *start;
    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for it in 1..=max_iter {
        let n = prep.cause_counts(&theta);
        theta = m_step(&prep, n)?;
        let ll = complete_loglik(&theta, sample)?;
        trace.push(ll);
        let done = (ll - prev).abs() <= tol * ll.abs().max(1.0);
        prev = ll;
        if done {
            return Ok(InnerFit {
                params: theta,
                pseudo_loglik: ll,
                iterations: it,
                trace,
            });
        }
    }
    Ok(InnerFit {
        params: theta,
        pseudo_loglik: prev,
        iterations: max_iter,
        trace,
    })
}

fn m_step(prep: &Prepared, n: [f64; 3]) -> Result<MOBWParams> {
    if n[1] <= 0.0 || n[2] <= 0.0 {
        return Err(Error::Unidentifiable(format!(
            "no failures attributable to component {}",
            if n[1] <= 0.0 { 1 } else { 2 }
        )));
    }
    // The profile in ln(alpha) is concave, so its score is decreasing and
    // bisection on the score pins the root to full precision.
    let score = |la: f64| -> f64 {
        let alpha = la.exp();
        let (t, s) = prep.exposures_and_slopes(alpha);
        let mut g = prep.sum_ln;
        for j in 0..3 {
            if n[j] > 0.0 {
                g -= n[j] * s[j] / t[j];
            }
        }
        prep.events + alpha * g
    };
    let la = bisect_decreasing(score, LN_ALPHA_RANGE.0, LN_ALPHA_RANGE.1);
    let alpha = la.exp();
    let t = prep.exposures(alpha);
    let l0 = if n[0] > 0.0 { n[0] / t[0] } else { 0.0 };
    MOBWParams::new(alpha, l0, n[1] / t[1], n[2] / t[2])
}

/// How the outer loop represents the latent pair behind each observed cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Imputation {
    /// The full conditional law of the latent pair given its cell, by a
    /// Gauss-Legendre rule of the given order per coordinate. Each outer
    /// step is then an EM step for the observed-data likelihood.
    ConditionalExpectation { order: usize },
    /// The single most likely latent pair per cell.
    Predictor,
}

impl Default for Imputation {
    fn default() -> Self {
        Imputation::ConditionalExpectation { order: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedEmOptions {
    /// Stop when consecutive pseudo log-likelihoods differ by less than this.
    pub tol: f64,
    pub max_outer: usize,
    pub imputation: Imputation,
    /// Confidence level of the reported Wald intervals.
    pub level: f64,
}

impl Default for NestedEmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_outer: 500,
            imputation: Imputation::default(),
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    /// `[alpha, lambda0, lambda1, lambda2]`.
    pub theta: [f64; 4],
    pub loglik: f64,
    /// Inner-EM objective reached at this iterate; absent for the start.
    pub pseudo_loglik: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceIntervals {
    pub level: f64,
    /// Order: alpha, lambda0, lambda1, lambda2.
    pub estimates: [f64; 4],
    pub std_errors: [f64; 4],
    pub half_widths: [f64; 4],
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLFitReport {
    pub theta_hat: MOBWParams,
    pub bdw: BDWParams,
    pub loglik: f64,
    pub ci95: Option<ConfidenceIntervals>,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<TrajectoryPoint>,
    pub warnings: Vec<String>,
}

fn impute(
    data: &BivariateDataset,
    theta: &MOBWParams,
    imputation: Imputation,
    rule: &(Vec<f64>, Vec<f64>),
) -> Result<Vec<CompletePair>> {
    let mut cells = std::collections::BTreeMap::new();
    for &cell in data.pairs() {
        *cells.entry(cell).or_insert(0.0) += 1.0;
    }
    let mut out = Vec::new();
    for ((i, j), count) in cells {
        match imputation {
            Imputation::ConditionalExpectation { .. } => out.extend(
                cell_quadrature(theta, i, j, &rule.0, &rule.1)
                    .into_iter()
                    .map(|mut c| {
                        c.weight *= count;
                        c
                    }),
            ),
            Imputation::Predictor => {
                let p = ml_predict(theta, i, j)?;
                out.push(CompletePair {
                    y1: p.y1hat,
                    y2: p.y2hat,
                    region: p.region(),
                    weight: count,
                });
            }
        }
    }
    Ok(out)
}

/// Nested EM for the BDW maximum-likelihood estimate.
///
/// Reports the iterate with the largest observed-data log-likelihood seen
/// along the trajectory, which includes the starting point. Hitting
/// `max_outer` is reported through `converged = false` and a warning.
pub fn nested_em(
    data: &BivariateDataset,
    start: &MOBWParams,
    options: &NestedEmOptions,
) -> Result<MLFitReport> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be > 0, got {}",
            options.tol
        )));
    }
    let rule = match options.imputation {
        Imputation::ConditionalExpectation { order } if order >= 1 => gauss_legendre_unit(order),
        Imputation::ConditionalExpectation { order } => {
            return Err(Error::InvalidArgument(format!(
                "quadrature order must be >= 1, got {order}"
            )))
        }
        Imputation::Predictor => (Vec::new(), Vec::new()),
    };
    let mut theta = *start;
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        theta: theta.to_array(),
        loglik: bdw_loglik(&theta, data)?,
        pseudo_loglik: None,
    }];
    let mut best = (theta, trajectory[0].loglik);
    let mut prev_pseudo: Option<f64> = None;
    let mut converged = false;
    let mut warnings = Vec::new();
    let mut iterations = 0;
    for k in 1..=options.max_outer {
        iterations = k;
        let sample = impute(data, &theta, options.imputation, &rule)?;
        let inner = inner_em_mobw(&sample, &theta)?;
        theta = inner.params;
        let ll = bdw_loglik(&theta, data)?;
        log::debug!(
            "outer {k}: theta = {:?}, loglik = {ll:.6}, pseudo = {:.6}",
            theta.to_array(),
            inner.pseudo_loglik
        );
        trajectory.push(TrajectoryPoint {
            iteration: k,
            theta: theta.to_array(),
            loglik: ll,
            pseudo_loglik: Some(inner.pseudo_loglik),
        });
        if ll > best.1 {
            best = (theta, ll);
        }
        if let Some(p) = prev_pseudo {
            if (inner.pseudo_loglik - p).abs() < options.tol {
                converged = true;
                break;
            }
        }
        prev_pseudo = Some(inner.pseudo_loglik);
    }
    if !converged {
        warnings.push(format!(
            "nested EM stopped at max_outer = {} without meeting tol = {}",
            options.max_outer, options.tol
        ));
    }
    let (theta_hat, loglik) = best;
    let ci95 = match observed_info_ci(&theta_hat, data, options.level) {
        Ok(ci) => Some(ci),
        Err(e) => {
            warnings.push(format!("no Wald intervals: {e}"));
            None
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(MLFitReport {
        theta_hat,
        bdw: from_mobw(&theta_hat),
        loglik,
        ci95,
        iterations,
        converged,
        trajectory,
        warnings,
    })
}

/// Wald intervals from the observed information, obtained by a
/// central-difference Hessian of the observed-data log-likelihood in
/// `(alpha, lambda0, lambda1, lambda2)`.
pub fn observed_info_ci(
    theta_hat: &MOBWParams,
    data: &BivariateDataset,
    level: f64,
) -> Result<ConfidenceIntervals> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let x = theta_hat.to_array();
    if x[1] == 0.0 {
        return Err(Error::Unidentifiable(
            "lambda0 = 0 lies on the boundary; Wald intervals do not apply".into(),
        ));
    }
    let f = |v: &[f64]| {
        let r = Rates {
            alpha: v[0],
            l0: v[1],
            l1: v[2],
            l2: v[3],
        };
        loglik_rates(&r, data).unwrap_or(f64::NEG_INFINITY)
    };
    let steps: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs()).collect();
    let h = numerical_hessian(f, &x, &steps);
    if h.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let neg: Vec<Vec<f64>> = h
        .iter()
        .map(|row| row.iter().map(|v| -v).collect())
        .collect();
    let cov = spd_inverse(&neg)?;
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    let mut out = ConfidenceIntervals {
        level,
        estimates: x,
        std_errors: [0.0; 4],
        half_widths: [0.0; 4],
        lower: [0.0; 4],
        upper: [0.0; 4],
    };
    for k in 0..4 {
        let se = cov[k][k].sqrt();
        out.std_errors[k] = se;
        out.half_widths[k] = z * se;
        out.lower[k] = x[k] - z * se;
        out.upper[k] = x[k] + z * se;
    }
    Ok(out)
}

/// Wald test of `alpha = 1`, i.e. of the bivariate discrete exponential submodel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaOneTest {
    pub alpha_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub reject: bool,
    pub verdict: String,
}

pub fn test_alpha_equals_one(fit: &MLFitReport) -> Result<AlphaOneTest> {
    let ci = fit.ci95.as_ref().ok_or_else(|| {
        Error::InvalidArgument("the fit carries no confidence interval for alpha".into())
    })?;
    let (lower, upper) = (ci.lower[0], ci.upper[0]);
    let reject = !(lower <= 1.0 && 1.0 <= upper);
    let pct = (1.0 - ci.level) * 100.0;
    let verdict = if reject {
        format!("H0: alpha = 1 rejected at the {pct:.0}% level; the bivariate discrete exponential model is not adequate")
    } else {
        format!("H0: alpha = 1 not rejected at the {pct:.0}% level; the bivariate discrete exponential model cannot be ruled out")
    };
    Ok(AlphaOneTest {
        alpha_hat: ci.estimates[0],
        lower,
        upper,
        level: ci.level,
        reject,
        verdict,
    })
}
