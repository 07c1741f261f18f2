//! The bivariate discrete Weibull law BDW(alpha, p0, p1, p2).
//!
//! `(X1, X2) = (min(U1, U0), min(U2, U0))` with independent
//! `Ui ~ DW(alpha, pi)`. The joint survival function is
//! `P(X1 >= x1, X2 >= x2) = p1^(x1^a) p2^(x2^a) p0^(max(x1, x2)^a)`.
//! `p0 = 1` switches off the common shock and makes the margins independent.
//!
//! Internally everything is evaluated through the Weibull rates
//! `lambda_i = -ln p_i`, which is also the parametrization of the latent
//! continuous model in [`crate::mobw`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobw::MOBWParams;
use crate::univariate::{dw_pmf_rate, ln_dw_pmf_rate, pow_alpha, sample_floor_weibull, DWParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BDWParams {
    alpha: f64,
    p0: f64,
    p1: f64,
    p2: f64,
}

impl BDWParams {
    pub fn new(alpha: f64, p0: f64, p1: f64, p2: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        if !(p0 > 0.0 && p0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p0 must lie in (0, 1], got {p0}"
            )));
        }
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {p}"
                )));
            }
        }
        Ok(Self { alpha, p0, p1, p2 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p0(&self) -> f64 {
        self.p0
    }
    pub fn p1(&self) -> f64 {
        self.p1
    }
    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub(crate) fn rates(&self) -> Rates {
        Rates {
            alpha: self.alpha,
            l0: rate_of(self.p0),
            l1: rate_of(self.p1),
            l2: rate_of(self.p2),
        }
    }
}

/// The three-parameter bivariate geometric law: BDW with `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateGeomParams(BDWParams);

impl BivariateGeomParams {
    pub fn new(p0: f64, p1: f64, p2: f64) -> Result<Self> {
        Ok(Self(BDWParams::new(1.0, p0, p1, p2)?))
    }

    pub fn as_bdw(&self) -> &BDWParams {
        &self.0
    }

    /// `p1^x1 p2^x2 p0^max(x1, x2)`.
    pub fn joint_sf(&self, x1: u64, x2: u64) -> f64 {
        let b = &self.0;
        b.p1.powf(x1 as f64) * b.p2.powf(x2 as f64) * b.p0.powf(x1.max(x2) as f64)
    }
}

#[inline]
fn rate_of(p: f64) -> f64 {
    // -ln(1) is -0.0
    (-p.ln()).max(0.0)
}

/// Shape plus the three Weibull rates; shared by the discrete and the latent
/// continuous model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Rates {
    pub alpha: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Rates {
    #[inline]
    pub fn ln_sf(&self, x1: f64, x2: f64) -> f64 {
        let a = self.alpha;
        -(self.l1 * pow_alpha(x1, a)
            + self.l2 * pow_alpha(x2, a)
            + self.l0 * pow_alpha(x1.max(x2), a))
    }

    #[inline]
    pub fn sf(&self, x1: f64, x2: f64) -> f64 {
        self.ln_sf(x1, x2).exp()
    }

    /// Diagonal cell probability `P(X1 = X2 = x)` written as a sum of
    /// non-negative terms (the rectangle difference, factored).
    #[inline]
    fn diag_stable(&self, x: u64) -> f64 {
        self.ln_diag_stable(x).exp()
    }

    #[inline]
    fn ln_diag_stable(&self, x: u64) -> f64 {
        let a = pow_alpha(x as f64, self.alpha);
        let b = pow_alpha(x as f64 + 1.0, self.alpha);
        let d = b - a;
        let total = self.l0 + self.l1 + self.l2;
        let q02 = -(-(self.l0 + self.l2) * d).exp_m1();
        let q01 = -(-(self.l0 + self.l1) * d).exp_m1();
        let q0 = -(-self.l0 * d).exp_m1();
        let bracket = q02 * q01 + (-total * d).exp() * q0;
        -total * a + bracket.ln()
    }

    pub fn pmf(&self, x1: u64, x2: u64) -> f64 {
        let a = self.alpha;
        if x1 < x2 {
            dw_pmf_rate(self.l1, a, x1) * dw_pmf_rate(self.l0 + self.l2, a, x2)
        } else if x1 > x2 {
            dw_pmf_rate(self.l0 + self.l1, a, x1) * dw_pmf_rate(self.l2, a, x2)
        } else {
            let x = x1;
            if self.l0 == 0.0 {
                return dw_pmf_rate(self.l1, a, x) * dw_pmf_rate(self.l2, a, x);
            }
            let xa = pow_alpha(x as f64, a);
            let x1a = pow_alpha(x as f64 + 1.0, a);
            let u1 = (-self.l1 * xa).exp();
            let u2 = (-(self.l0 + self.l1) * x1a).exp();
            let t1 = u1 * dw_pmf_rate(self.l0 + self.l2, a, x);
            let t2 = u2 * dw_pmf_rate(self.l2, a, x);
            let diff = t1 - t2;
            if t1 > 0.0 && diff > 1e-8 * t1 {
                diff
            } else {
                self.diag_stable(x)
            }
        }
    }

    /// Log of the cell probability; finite whenever the probability does not
    /// underflow.
    pub fn ln_pmf(&self, x1: u64, x2: u64) -> f64 {
        let a = self.alpha;
        if x1 < x2 {
            ln_dw_pmf_rate(self.l1, a, x1) + ln_dw_pmf_rate(self.l0 + self.l2, a, x2)
        } else if x1 > x2 {
            ln_dw_pmf_rate(self.l0 + self.l1, a, x1) + ln_dw_pmf_rate(self.l2, a, x2)
        } else {
            self.ln_diag_stable(x1)
        }
    }
}

pub fn joint_sf(params: &BDWParams, x1: u64, x2: u64) -> f64 {
    params.rates().sf(x1 as f64, x2 as f64)
}

pub fn joint_pmf(params: &BDWParams, x1: u64, x2: u64) -> f64 {
    params.rates().pmf(x1, x2)
}

/// `P(X1 <= x1, X2 <= x2) = F1(x1) + F2(x2) - 1 + P(X1 > x1, X2 > x2)`.
pub fn joint_cdf(params: &BDWParams, x1: u64, x2: u64) -> f64 {
    let r = params.rates();
    let a = r.alpha;
    let s1 = (-(r.l0 + r.l1) * pow_alpha(x1 as f64 + 1.0, a)).exp();
    let s2 = (-(r.l0 + r.l2) * pow_alpha(x2 as f64 + 1.0, a)).exp();
    let s12 = r.sf(x1 as f64 + 1.0, x2 as f64 + 1.0);
    // (1 - s1) + (1 - s2) - 1 + s12, grouped to limit cancellation
    ((1.0 - s1) - s2 + s12).clamp(0.0, 1.0)
}

/// Margins `(DW(alpha, p0 p1), DW(alpha, p0 p2))`.
pub fn marginals(params: &BDWParams) -> (DWParams, DWParams) {
    let r = params.rates();
    (
        DWParams::from_rate(r.alpha, r.l0 + r.l1).expect("valid margin"),
        DWParams::from_rate(r.alpha, r.l0 + r.l2).expect("valid margin"),
    )
}

/// Law of `min(X1, X2)`: DW(alpha, p0 p1 p2).
pub fn min_distribution(params: &BDWParams) -> DWParams {
    let r = params.rates();
    DWParams::from_rate(r.alpha, r.l0 + r.l1 + r.l2).expect("valid minimum law")
}

/// Componentwise minima of independent BDW vectors sharing `alpha`.
pub fn closure_min(list: &[BDWParams]) -> Result<BDWParams> {
    let first = list.first().ok_or(Error::EmptyData)?;
    let (mut l0, mut l1, mut l2) = (0.0, 0.0, 0.0);
    for p in list {
        if p.alpha != first.alpha {
            return Err(Error::MismatchedShape(first.alpha, p.alpha));
        }
        let r = p.rates();
        l0 += r.l0;
        l1 += r.l1;
        l2 += r.l2;
    }
    BDWParams::new(first.alpha, (-l0).exp(), (-l1).exp(), (-l2).exp())
}

fn marginal2_pmf(r: &Rates, x2: u64) -> f64 {
    dw_pmf_rate(r.l0 + r.l2, r.alpha, x2)
}

/// `P(X1 = x1 | X2 = x2)`.
pub fn cond_pmf(params: &BDWParams, x1: u64, x2: u64) -> Result<f64> {
    let r = params.rates();
    let denom = marginal2_pmf(&r, x2);
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument(format!("P(X2 = {x2}) is zero")));
    }
    let a = r.alpha;
    if x1 == x2 {
        let x = x1;
        let u1 = (-r.l1 * pow_alpha(x as f64, a)).exp();
        let u2 = (-(r.l0 + r.l1) * pow_alpha(x as f64 + 1.0, a)).exp();
        let v = u1 - u2 * dw_pmf_rate(r.l2, a, x) / denom;
        if v > 1e-8 * u1 {
            return Ok(v);
        }
    }
    Ok(r.pmf(x1, x2) / denom)
}

/// `P(X1 >= x1 | X2 >= x2)`.
pub fn cond_sf_given_ge(params: &BDWParams, x1: u64, x2: u64) -> Result<f64> {
    let r = params.rates();
    let a = r.alpha;
    let ln_denom = -(r.l0 + r.l2) * pow_alpha(x2 as f64, a);
    if ln_denom == f64::NEG_INFINITY || ln_denom.exp() == 0.0 {
        return Err(Error::InvalidArgument(format!("P(X2 >= {x2}) is zero")));
    }
    let xa1 = pow_alpha(x1 as f64, a);
    let v = if x1 <= x2 {
        (-r.l1 * xa1).exp()
    } else {
        // (p0 p1)^(x1^a) / p0^(x2^a)
        (-(r.l0 + r.l1) * xa1 + r.l0 * pow_alpha(x2 as f64, a)).exp()
    };
    Ok(v)
}

/// `P(X1 >= x1 | X2 = x2)`.
pub fn cond_sf_given_eq(params: &BDWParams, x1: u64, x2: u64) -> Result<f64> {
    let r = params.rates();
    let a = r.alpha;
    let denom = marginal2_pmf(&r, x2);
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument(format!("P(X2 = {x2}) is zero")));
    }
    let xa1 = pow_alpha(x1 as f64, a);
    if x1 <= x2 {
        Ok((-r.l1 * xa1).exp())
    } else {
        Ok((-(r.l0 + r.l1) * xa1).exp() * dw_pmf_rate(r.l2, a, x2) / denom)
    }
}

/// One draw through the latent-minimum construction.
pub fn sample<R: Rng + ?Sized>(params: &BDWParams, rng: &mut R) -> (u64, u64) {
    let r = params.rates();
    sample_rates(&r, rng)
}

pub(crate) fn sample_rates<R: Rng + ?Sized>(r: &Rates, rng: &mut R) -> (u64, u64) {
    let u1 = sample_floor_weibull(r.alpha, r.l1, rng);
    let u2 = sample_floor_weibull(r.alpha, r.l2, rng);
    let u0 = if r.l0 > 0.0 {
        sample_floor_weibull(r.alpha, r.l0, rng)
    } else {
        u64::MAX
    };
    (u1.min(u0), u2.min(u0))
}

/// Means, variances and dependence of a BDW law, plus the truncation point used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub covariance: f64,
    pub correlation: f64,
    pub truncation: u64,
}

const MAX_TRUNCATION: u64 = 50_000_000;

/// Smallest `k` with `exp(-rate k^alpha) < epsilon`.
pub(crate) fn tail_bound(alpha: f64, rate: f64, epsilon: f64) -> u64 {
    let target = -epsilon.ln() / rate;
    let mut k = target.powf(1.0 / alpha).floor().max(0.0) as u64;
    while (-rate * pow_alpha(k as f64, alpha)).exp() >= epsilon {
        k += 1;
    }
    while k > 0 && (-rate * pow_alpha((k - 1) as f64, alpha)).exp() < epsilon {
        k -= 1;
    }
    k
}

/// Moments by truncated summation over `[0, K]^2`, where `K` is the first
/// point at which the heavier marginal tail drops below `epsilon`.
///
/// Uses the tail-sum identities `E[X] = sum_{x>=1} P(X >= x)` and
/// `E[X1 X2] = sum_{x1,x2>=1} P(X1 >= x1, X2 >= x2)`, with the latter split
/// along the diagonal so the cost is linear in `K`.
pub fn moments(params: &BDWParams, epsilon: f64) -> Result<Moments> {
    if !(epsilon > 0.0 && epsilon <= 1e-4) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1e-4], got {epsilon}"
        )));
    }
    let r = params.rates();
    let a = r.alpha;
    let heavy = r.l0 + r.l1.min(r.l2);
    let k = tail_bound(a, heavy, epsilon);
    if k > MAX_TRUNCATION {
        return Err(Error::InvalidArgument(format!(
            "truncation point {k} exceeds {MAX_TRUNCATION}; tail too heavy for direct summation"
        )));
    }
    let (r01, r02, total) = (r.l0 + r.l1, r.l0 + r.l2, r.l0 + r.l1 + r.l2);
    let (mut m1, mut m2, mut q1, mut q2, mut cross) = (0.0, 0.0, 0.0, 0.0, 0.0);
    // running sums of exp(-l1 t^a) and exp(-l2 t^a) for 1 <= t < x
    let (mut c1, mut c2) = (0.0, 0.0);
    for x in 1..=k {
        let xa = pow_alpha(x as f64, a);
        let s1 = (-r01 * xa).exp();
        let s2 = (-r02 * xa).exp();
        let w = (2 * x - 1) as f64;
        m1 += s1;
        m2 += s2;
        q1 += w * s1;
        q2 += w * s2;
        cross += (-total * xa).exp() + s2 * c1 + s1 * c2;
        c1 += (-r.l1 * xa).exp();
        c2 += (-r.l2 * xa).exp();
    }
    let var1 = q1 - m1 * m1;
    let var2 = q2 - m2 * m2;
    let covariance = cross - m1 * m2;
    let correlation = if var1 > 0.0 && var2 > 0.0 {
        covariance / (var1 * var2).sqrt()
    } else {
        0.0
    };
    Ok(Moments {
        mean1: m1,
        mean2: m2,
        var1,
        var2,
        covariance,
        correlation,
        truncation: k,
    })
}

pub fn to_mobw(params: &BDWParams) -> MOBWParams {
    let r = params.rates();
    MOBWParams::new(r.alpha, r.l0, r.l1, r.l2).expect("rates of a valid BDW law")
}

pub fn from_mobw(params: &MOBWParams) -> BDWParams {
    BDWParams::new(
        params.alpha(),
        (-params.lambda0()).exp(),
        (-params.lambda1()).exp(),
        (-params.lambda2()).exp(),
    )
    .expect("valid MOBW rates map to valid BDW parameters")
}

/// Outcome of a grid check of a dependence inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub holds: bool,
    /// Smallest observed ratio `lhs / rhs` (1 means equality).
    pub worst_ratio: f64,
    pub violations: usize,
    /// Grid points or quadruples at which equality held exactly.
    pub equalities: usize,
    pub checked: usize,
    /// First violating `(x11, x21, x12, x22)` (TP2) or `(x1, x2, 0, 0)` (PQD).
    pub witness: Option<[u64; 4]>,
}

const INEQUALITY_SLACK: f64 = 1e-12;

/// Rounding error to tolerate in a log-ratio assembled from terms of total
/// magnitude `scale`.
fn rounding_noise(scale: f64) -> f64 {
    16.0 * f64::EPSILON * scale
}

/// Checks `S(x11,x21) S(x12,x22) >= S(x12,x21) S(x11,x22)` for every
/// `x11 <= x12`, `x21 <= x22` in `[0, K]`.
///
/// The marginal factors of the joint survival function cancel identically in
/// the ratio, so it is evaluated as `exp(-lambda0 * D)` with
/// `D = m(x11,x21) + m(x12,x22) - m(x12,x21) - m(x11,x22)` and
/// `m(u, v) = max(u, v)^alpha`.
pub fn is_tp2_on_grid(params: &BDWParams, k: u64) -> Result<DependenceReport> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid bound must be >= 2, got {k}"
        )));
    }
    let r = params.rates();
    let m = |u: u64, v: u64| pow_alpha(u.max(v) as f64, r.alpha);
    let mut rep = DependenceReport {
        holds: true,
        worst_ratio: f64::INFINITY,
        violations: 0,
        equalities: 0,
        checked: 0,
        witness: None,
    };
    for x11 in 0..=k {
        for x12 in x11..=k {
            for x21 in 0..=k {
                for x22 in x21..=k {
                    let terms = [m(x11, x21), m(x12, x22), m(x12, x21), m(x11, x22)];
                    let d = terms[0] + terms[1] - terms[2] - terms[3];
                    let noise = rounding_noise(r.l0 * terms.iter().sum::<f64>());
                    let ratio = (-r.l0 * d).exp();
                    rep.checked += 1;
                    if ratio == 1.0 {
                        rep.equalities += 1;
                    }
                    if ratio < rep.worst_ratio {
                        rep.worst_ratio = ratio;
                    }
                    if ratio < 1.0 - INEQUALITY_SLACK - noise {
                        rep.violations += 1;
                        rep.holds = false;
                        rep.witness.get_or_insert([x11, x21, x12, x22]);
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Checks `P(X1 >= x1, X2 >= x2) >= P(X1 >= x1) P(X2 >= x2)` on `[0, K]^2`.
pub fn pqd_check_on_grid(params: &BDWParams, k: u64) -> DependenceReport {
    let r = params.rates();
    let a = r.alpha;
    let mut rep = DependenceReport {
        holds: true,
        worst_ratio: f64::INFINITY,
        violations: 0,
        equalities: 0,
        checked: 0,
        witness: None,
    };
    for x1 in 0..=k {
        for x2 in 0..=k {
            let ln_joint = r.ln_sf(x1 as f64, x2 as f64);
            let ln_prod =
                -(r.l0 + r.l1) * pow_alpha(x1 as f64, a) - (r.l0 + r.l2) * pow_alpha(x2 as f64, a);
            let ratio = (ln_joint - ln_prod).exp();
            let noise = rounding_noise(ln_prod.abs());
            rep.checked += 1;
            if ratio == 1.0 {
                rep.equalities += 1;
            }
            rep.worst_ratio = rep.worst_ratio.min(ratio);
            if ratio < 1.0 - INEQUALITY_SLACK - noise {
                rep.violations += 1;
                rep.holds = false;
                rep.witness.get_or_insert([x1, x2, 0, 0]);
            }
        }
    }
    rep
}
