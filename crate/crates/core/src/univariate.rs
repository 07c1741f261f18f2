//! Continuous Weibull and discrete Weibull (DW) laws.
//!
//! The DW law with shape `alpha` and survival base `p` has
//! `P(Y >= y) = p^(y^alpha)` for `y = 0, 1, 2, ...`, and arises as the floor of
//! a Weibull variable with rate `-ln p`. Powers are evaluated as
//! `exp(y^alpha * ln p)` so large exponents underflow gracefully.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::grid_then_brent;

/// Weibull parameters: shape `alpha` and rate-like scale `lambda`, with
/// `F(x) = 1 - exp(-lambda x^alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    alpha: f64,
    lambda: f64,
}

impl WeibullParams {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and > 0, got {lambda}"
            )));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Discrete Weibull parameters. `p = 1` is representable so that the common
/// shock of a bivariate model can switch off; every standalone DW operation
/// rejects it with [`Error::DegenerateDw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DWParams {
    alpha: f64,
    p: f64,
}

impl DWParams {
    pub fn new(alpha: f64, p: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in (0, 1], got {p}"
            )));
        }
        Ok(Self { alpha, p })
    }

    /// Builds the law of `floor(W)` for `W ~ WE(alpha, rate)`.
    pub fn from_rate(alpha: f64, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rate must be finite and >= 0, got {rate}"
            )));
        }
        Self::new(alpha, (-rate).exp())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `-ln p`, the rate of the underlying Weibull.
    pub fn rate(&self) -> f64 {
        -self.p.ln()
    }

    pub fn is_degenerate(&self) -> bool {
        self.p >= 1.0
    }

    fn proper(&self) -> Result<&Self> {
        if self.is_degenerate() {
            Err(Error::DegenerateDw)
        } else {
            Ok(self)
        }
    }
}

/// `y^alpha` with the convention `0^alpha = 0`.
#[inline]
pub(crate) fn pow_alpha(y: f64, alpha: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        y.powf(alpha)
    }
}

/// DW probability at `y` expressed through the Weibull rate, i.e. with
/// `p = exp(-rate)`. Computed as `S(y) * (1 - exp(-rate * ((y+1)^a - y^a)))`
/// to keep relative accuracy when `p` is close to one.
#[inline]
pub(crate) fn dw_pmf_rate(rate: f64, alpha: f64, y: u64) -> f64 {
    let a = pow_alpha(y as f64, alpha);
    let b = pow_alpha(y as f64 + 1.0, alpha);
    (-rate * a).exp() * -(-rate * (b - a)).exp_m1()
}

#[inline]
pub(crate) fn ln_dw_pmf_rate(rate: f64, alpha: f64, y: u64) -> f64 {
    let a = pow_alpha(y as f64, alpha);
    let b = pow_alpha(y as f64 + 1.0, alpha);
    -rate * a + (-(-rate * (b - a)).exp_m1()).ln()
}

/// Weibull density `alpha lambda x^(alpha-1) exp(-lambda x^alpha)`.
///
/// At the origin the density is 0 for `alpha > 1`, `lambda` for `alpha = 1`
/// and unbounded for `alpha < 1`, which is reported as
/// [`Error::InfiniteDensity`].
pub fn we_pdf(params: &WeibullParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("x must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return if params.alpha > 1.0 {
            Ok(0.0)
        } else if params.alpha == 1.0 {
            Ok(params.lambda)
        } else {
            Err(Error::InfiniteDensity {
                alpha: params.alpha,
            })
        };
    }
    Ok(weibull_density(params.alpha, params.lambda, x))
}

/// Unchecked Weibull density; infinite at 0 when `alpha < 1`.
#[inline]
pub(crate) fn weibull_density(alpha: f64, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if alpha > 1.0 {
            0.0
        } else if alpha == 1.0 {
            lambda
        } else {
            f64::INFINITY
        };
    }
    alpha * lambda * x.powf(alpha - 1.0) * (-lambda * x.powf(alpha)).exp()
}

#[inline]
pub(crate) fn ln_weibull_density(alpha: f64, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return weibull_density(alpha, lambda, x).ln();
    }
    alpha.ln() + lambda.ln() + (alpha - 1.0) * x.ln() - lambda * x.powf(alpha)
}

pub fn we_cdf(params: &WeibullParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("x must be >= 0, got {x}")));
    }
    Ok(-(-params.lambda * pow_alpha(x, params.alpha)).exp_m1())
}

/// Inverse of [`we_cdf`] for `u` in the open unit interval.
#[inline]
pub(crate) fn weibull_quantile(alpha: f64, lambda: f64, u: f64) -> f64 {
    (-(-u).ln_1p() / lambda).powf(1.0 / alpha)
}

pub fn dw_pmf(params: &DWParams, y: u64) -> Result<f64> {
    let p = params.proper()?;
    Ok(dw_pmf_rate(p.rate(), p.alpha, y))
}

/// `P(Y >= y) = p^(floor(y)^alpha)`; note the weak inequality, so the value
/// at 0 is 1.
pub fn dw_sf(params: &DWParams, y: f64) -> Result<f64> {
    let p = params.proper()?;
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!("y must be >= 0, got {y}")));
    }
    Ok((-p.rate() * pow_alpha(y.floor(), p.alpha)).exp())
}

/// Draws `floor(W)` with `W ~ WE(alpha, -ln p)` by inverse transform on an
/// open-interval uniform.
pub fn dw_sample<R: Rng + ?Sized>(params: &DWParams, rng: &mut R) -> Result<u64> {
    let p = params.proper()?;
    Ok(sample_floor_weibull(p.alpha, p.rate(), rng))
}

#[inline]
pub(crate) fn sample_floor_weibull<R: Rng + ?Sized>(alpha: f64, rate: f64, rng: &mut R) -> u64 {
    let u: f64 = Open01.sample(rng);
    let w = weibull_quantile(alpha, rate, u);
    // saturating float-to-int cast
    w.floor() as u64
}

/// Law of the minimum of `n` independent DW(alpha, p) draws: DW(alpha, p^n).
pub fn dw_min_of_n(params: &DWParams, n: u32) -> Result<DWParams> {
    let p = params.proper()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    DWParams::from_rate(p.alpha, p.rate() * n as f64)
}

/// Mode of the Weibull density, defined for `alpha > 1` only.
pub fn we_mode(alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mode requires alpha > 1, got {alpha}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and > 0, got {lambda}"
        )));
    }
    Ok(((alpha - 1.0) / (alpha * lambda)).powf(1.0 / alpha))
}

/// A fitted univariate DW law and its attained log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwFit {
    pub params: DWParams,
    pub loglik: f64,
}

pub fn dw_loglik(data: &[u64], params: &DWParams) -> Result<f64> {
    let p = params.proper()?;
    let rate = p.rate();
    Ok(data.iter().map(|&y| ln_dw_pmf_rate(rate, p.alpha, y)).sum())
}

pub(crate) const LN_ALPHA_RANGE: (f64, f64) = (-4.605_170_185_988_091, 4.605_170_185_988_091);
const LOGIT_P_RANGE: (f64, f64) = (-30.0, 30.0);

/// Rate `-ln p` for `p = 1 / (1 + exp(-t))`.
#[inline]
pub(crate) fn rate_from_logit(t: f64) -> f64 {
    (-t).exp().ln_1p()
}

pub(crate) fn validate_sample(data: &[u64]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.iter().all(|&y| y == data[0]) {
        return Err(Error::DegenerateData(format!(
            "all {} observations equal {}; the DW fit sits on the parameter boundary",
            data.len(),
            data[0]
        )));
    }
    Ok(())
}

/// Profile minimization of `objective(alpha, rate)` over `alpha in [0.01, 100]`
/// and `p in (0, 1)`: outer search on `ln alpha`, inner search on `logit p`.
pub(crate) fn profile_fit<F>(objective: F) -> (f64, f64, f64)
where
    F: Fn(f64, f64) -> f64,
{
    let inner = |alpha: f64| {
        grid_then_brent(
            |t| objective(alpha, rate_from_logit(t)),
            LOGIT_P_RANGE.0,
            LOGIT_P_RANGE.1,
            31,
            1e-10,
        )
    };
    let outer = grid_then_brent(
        |la| inner(la.exp()).value,
        LN_ALPHA_RANGE.0,
        LN_ALPHA_RANGE.1,
        41,
        1e-10,
    );
    let alpha = outer.x.exp();
    let best = inner(alpha);
    (alpha, rate_from_logit(best.x), best.value)
}

/// Maximum-likelihood DW fit.
pub fn dw_fit_ml(data: &[u64]) -> Result<DwFit> {
    dw_fit_ml_from(data, None)
}

/// Maximum-likelihood DW fit that is guaranteed to do at least as well as a
/// caller-supplied starting point.
pub fn dw_fit_ml_from(data: &[u64], start: Option<DWParams>) -> Result<DwFit> {
    validate_sample(data)?;
    let nll = |alpha: f64, rate: f64| -> f64 {
        let v: f64 = data.iter().map(|&y| ln_dw_pmf_rate(rate, alpha, y)).sum();
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let (alpha, rate, value) = profile_fit(nll);
    let mut fit = DwFit {
        params: DWParams::from_rate(alpha, rate)?,
        loglik: -value,
    };
    if let Some(s) = start {
        let ll = dw_loglik(data, &s)?;
        if ll > fit.loglik {
            fit = DwFit {
                params: s,
                loglik: ll,
            };
        }
    }
    if fit.params.is_degenerate() {
        return Err(Error::DegenerateData("fit converged to p = 1".into()));
    }
    Ok(fit)
}
