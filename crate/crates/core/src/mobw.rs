//! Marshall-Olkin bivariate Weibull MOBW(alpha, lambda0, lambda1, lambda2).
//!
//! `(Y1, Y2) = (min(U1, U0), min(U2, U0))` with independent
//! `Ui ~ WE(alpha, lambda_i)`. The law has an absolutely continuous part off
//! the diagonal and a singular part on `Y1 = Y2` carrying mass
//! `lambda0 / lambda`. Flooring both coordinates gives the BDW law.
//!
//! Besides evaluation and sampling this module describes the latent pair
//! given its integer cell: the maximum-likelihood predictor used by the
//! nested EM and the exact cell conditional used for data augmentation.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::bdw::Rates;
use crate::error::{Error, Result};
use crate::univariate::{ln_weibull_density, pow_alpha, weibull_density, weibull_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MOBWParams {
    alpha: f64,
    lambda0: f64,
    lambda1: f64,
    lambda2: f64,
}

impl MOBWParams {
    pub fn new(alpha: f64, lambda0: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        if !(lambda0.is_finite() && lambda0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda0 must be finite and >= 0, got {lambda0}"
            )));
        }
        for (name, l) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {l}"
                )));
            }
        }
        Ok(Self {
            alpha,
            lambda0,
            lambda1,
            lambda2,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    /// `lambda0 + lambda1 + lambda2`.
    pub fn lambda(&self) -> f64 {
        self.lambda0 + self.lambda1 + self.lambda2
    }

    /// `[alpha, lambda0, lambda1, lambda2]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.alpha, self.lambda0, self.lambda1, self.lambda2]
    }

    pub(crate) fn rates(&self) -> Rates {
        Rates {
            alpha: self.alpha,
            l0: self.lambda0,
            l1: self.lambda1,
            l2: self.lambda2,
        }
    }
}

pub fn mobw_sf(params: &MOBWParams, y1: f64, y2: f64) -> f64 {
    params.rates().sf(y1, y2)
}

/// Which part of the MOBW law a density value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityBranch {
    /// `y1 < y2`: density on the plane.
    Above,
    /// `y1 > y2`: density on the plane.
    Below,
    /// `y1 = y2`: density of the singular part along the diagonal.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobwDensity {
    pub value: f64,
    pub branch: DensityBranch,
}

pub fn mobw_pdf(params: &MOBWParams, y1: f64, y2: f64) -> MobwDensity {
    let MOBWParams {
        alpha: a,
        lambda0: l0,
        lambda1: l1,
        lambda2: l2,
    } = *params;
    if y1 < y2 {
        MobwDensity {
            value: weibull_density(a, l1, y1) * weibull_density(a, l0 + l2, y2),
            branch: DensityBranch::Above,
        }
    } else if y1 > y2 {
        MobwDensity {
            value: weibull_density(a, l0 + l1, y1) * weibull_density(a, l2, y2),
            branch: DensityBranch::Below,
        }
    } else {
        let total = params.lambda();
        let value = if l0 == 0.0 {
            0.0
        } else {
            l0 / total * weibull_density(a, total, y1)
        };
        MobwDensity {
            value,
            branch: DensityBranch::Diagonal,
        }
    }
}

pub fn mobw_sample<R: Rng + ?Sized>(params: &MOBWParams, rng: &mut R) -> (f64, f64) {
    let mut draw = |rate: f64| {
        let u: f64 = Open01.sample(rng);
        weibull_quantile(params.alpha, rate, u)
    };
    let u1 = draw(params.lambda1);
    let u2 = draw(params.lambda2);
    let u0 = if params.lambda0 > 0.0 {
        draw(params.lambda0)
    } else {
        f64::INFINITY
    };
    (u1.min(u0), u2.min(u0))
}

/// Position of a complete pair relative to the diagonal, which fixes the
/// density branch and the latent failure causes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `y1 < y2`.
    Above,
    /// `y1 > y2`.
    Below,
    /// `y1 = y2` produced by the common shock.
    Tie,
}

/// One continuous pair with its region marker and a frequency weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletePair {
    pub y1: f64,
    pub y2: f64,
    pub region: Region,
    pub weight: f64,
}

impl CompletePair {
    /// Unit-weight pair; equal coordinates are read as a tie.
    pub fn new(y1: f64, y2: f64) -> Self {
        let region = if y1 < y2 {
            Region::Above
        } else if y1 > y2 {
            Region::Below
        } else {
            Region::Tie
        };
        Self {
            y1,
            y2,
            region,
            weight: 1.0,
        }
    }

    pub fn tie(y: f64) -> Self {
        Self {
            y1: y,
            y2: y,
            region: Region::Tie,
            weight: 1.0,
        }
    }
}

/// Log-density of one complete pair under the branch its region selects.
pub(crate) fn ln_complete_density(params: &MOBWParams, pair: &CompletePair) -> f64 {
    let MOBWParams {
        alpha: a,
        lambda0: l0,
        lambda1: l1,
        lambda2: l2,
    } = *params;
    match pair.region {
        Region::Above => {
            ln_weibull_density(a, l1, pair.y1) + ln_weibull_density(a, l0 + l2, pair.y2)
        }
        Region::Below => {
            ln_weibull_density(a, l0 + l1, pair.y1) + ln_weibull_density(a, l2, pair.y2)
        }
        Region::Tie => {
            let total = params.lambda();
            (l0 / total).ln() + ln_weibull_density(a, total, pair.y1)
        }
    }
}

/// Weighted complete-data log-likelihood.
pub fn complete_loglik(params: &MOBWParams, sample: &[CompletePair]) -> Result<f64> {
    let mut total = 0.0;
    for (index, pair) in sample.iter().enumerate() {
        let v = ln_complete_density(params, pair);
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        total += pair.weight * v;
    }
    Ok(total)
}

/// How the maximum-likelihood predictor resolved a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    /// Cell with `i < j`.
    AboveDiagonal,
    /// Cell with `i > j`.
    BelowDiagonal,
    /// Tie cell resolved to the diagonal point `(W, W)`.
    TieW,
    /// Tie cell resolved to the region `y1 < y2`.
    TieU,
    /// Tie cell resolved to the region `y1 > y2`.
    TieV,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentPrediction {
    pub y1hat: f64,
    pub y2hat: f64,
    pub case_tag: CaseTag,
    /// Conditional density at the prediction (the winning weight in tie cells).
    pub density_value: f64,
    /// Candidate weights `(A, B, C)` in tie cells.
    pub weights: Option<[f64; 3]>,
}

impl LatentPrediction {
    pub fn region(&self) -> Region {
        match self.case_tag {
            CaseTag::AboveDiagonal | CaseTag::TieU => Region::Above,
            CaseTag::BelowDiagonal | CaseTag::TieV => Region::Below,
            CaseTag::TieW => Region::Tie,
        }
    }
}

/// Largest float strictly below `x`, keeping predictions inside the
/// half-open cell.
#[inline]
fn below(x: f64) -> f64 {
    x.next_down()
}

/// Maximizer of the Weibull density with the given rate over `[lo, lo + 1)`.
///
/// For `alpha <= 1` the density is non-increasing, so the left endpoint wins.
fn clamped_mode(alpha: f64, rate: f64, lo: f64) -> f64 {
    if alpha <= 1.0 {
        return lo;
    }
    let g = ((alpha - 1.0) / (alpha * rate)).powf(1.0 / alpha);
    g.clamp(lo, below(lo + 1.0))
}

fn mode(alpha: f64, rate: f64) -> f64 {
    ((alpha - 1.0) / (alpha * rate)).powf(1.0 / alpha)
}

/// Probability of the cell `[i, i+1) x [j, j+1)`.
pub fn cell_probability(params: &MOBWParams, i: u64, j: u64) -> f64 {
    params.rates().pmf(i, j)
}

/// Conditional density of the latent pair at `(y1, y2)` given its cell.
///
/// In a tie cell the diagonal part is a density along the diagonal and is
/// returned when `y1 == y2`; it carries the factor `lambda0 / lambda` and is
/// normalized by `P(i <= min(Y1, Y2) < i+1)`.
pub fn cell_conditional_density(params: &MOBWParams, i: u64, j: u64, y1: f64, y2: f64) -> f64 {
    let inside = |y: f64, k: u64| y >= k as f64 && y < (k + 1) as f64;
    if !inside(y1, i) || !inside(y2, j) {
        return 0.0;
    }
    let p = cell_probability(params, i, j);
    if i == j && y1 == y2 {
        return mobw_pdf(params, y1, y2).value / min_cell_probability(params, i);
    }
    mobw_pdf(params, y1, y2).value / p
}

fn min_cell_probability(params: &MOBWParams, i: u64) -> f64 {
    let a = params.alpha;
    let total = params.lambda();
    let lo = pow_alpha(i as f64, a);
    let hi = pow_alpha(i as f64 + 1.0, a);
    (-total * lo).exp() * -(-total * (hi - lo)).exp_m1()
}

/// Maximum-likelihood predictor of the latent `(Y1, Y2)` given the cell `(i, j)`.
///
/// Off-diagonal cells factor into two independent truncated Weibull laws
/// whose clamped modes are returned. In a tie cell three candidates compete:
/// the diagonal mode `W` with weight `A`, the best point of the region
/// `y1 < y2` with weight `B`, and of `y1 > y2` with weight `C`. A region
/// whose unconstrained mode is not ordered like the region has its supremum
/// on the diagonal; its weight is then set to zero. Ties between weights go
/// to `A` first, then `B`.
///
/// With `alpha < 1` the density is unbounded at the origin, so predictions
/// in cells touching zero carry an infinite density value.
pub fn ml_predict(params: &MOBWParams, i: u64, j: u64) -> Result<LatentPrediction> {
    let p = cell_probability(params, i, j);
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cell ({i}, {j}) has zero probability under {params:?}"
        )));
    }
    let MOBWParams {
        alpha: a,
        lambda0: l0,
        lambda1: l1,
        lambda2: l2,
    } = *params;
    let (fi, fj) = (i as f64, j as f64);
    if i != j {
        let (r1, r2, tag) = if i < j {
            (l1, l0 + l2, CaseTag::AboveDiagonal)
        } else {
            (l0 + l1, l2, CaseTag::BelowDiagonal)
        };
        let y1 = clamped_mode(a, r1, fi);
        let y2 = clamped_mode(a, r2, fj);
        let density = weibull_density(a, r1, y1) * weibull_density(a, r2, y2) / p;
        return Ok(LatentPrediction {
            y1hat: y1,
            y2hat: y2,
            case_tag: tag,
            density_value: density,
            weights: None,
        });
    }

    let total = params.lambda();
    let w = clamped_mode(a, total, fi);
    let weight_a = if l0 == 0.0 {
        0.0
    } else {
        l0 / total * weibull_density(a, total, w) / min_cell_probability(params, i)
    };

    let region = |ra: f64, rb: f64| -> Option<(f64, f64, f64)> {
        if a <= 1.0 {
            let v = weibull_density(a, ra, fi) * weibull_density(a, rb, fi) / p;
            return Some((fi, fi, v));
        }
        if mode(a, ra) < mode(a, rb) {
            let ua = clamped_mode(a, ra, fi);
            let ub = clamped_mode(a, rb, fi);
            let v = weibull_density(a, ra, ua) * weibull_density(a, rb, ub) / p;
            Some((ua, ub, v))
        } else {
            None
        }
    };
    let u = region(l1, l0 + l2);
    // for y1 > y2 the larger coordinate is y1 with rate l0 + l1
    let v = region(l2, l0 + l1).map(|(small, large, d)| (large, small, d));
    let weight_b = u.map_or(0.0, |t| t.2);
    let weight_c = v.map_or(0.0, |t| t.2);
    let weights = Some([weight_a, weight_b, weight_c]);

    let pred = if weight_a >= weight_b && weight_a >= weight_c {
        LatentPrediction {
            y1hat: w,
            y2hat: w,
            case_tag: CaseTag::TieW,
            density_value: weight_a,
            weights,
        }
    } else if weight_b >= weight_c {
        let (y1, y2, d) = u.expect("positive weight implies a candidate");
        LatentPrediction {
            y1hat: y1,
            y2hat: y2,
            case_tag: CaseTag::TieU,
            density_value: d,
            weights,
        }
    } else {
        let (y1, y2, d) = v.expect("positive weight implies a candidate");
        LatentPrediction {
            y1hat: y1,
            y2hat: y2,
            case_tag: CaseTag::TieV,
            density_value: d,
            weights,
        }
    };
    Ok(pred)
}

/// Quantile `t` of the Weibull law with the given rate truncated to
/// `[lo, hi)`, computed through cumulative hazards to stay accurate far in
/// the tail.
pub(crate) fn truncated_quantile(alpha: f64, rate: f64, lo: f64, hi: f64, t: f64) -> f64 {
    let h_lo = rate * pow_alpha(lo, alpha);
    let h_hi = rate * pow_alpha(hi, alpha);
    let span = -(-(h_hi - h_lo)).exp_m1();
    let h = h_lo - (-t * span).ln_1p();
    (h / rate).powf(1.0 / alpha).clamp(lo, hi)
}

/// Masses of the three parts of a tie cell `[i, i+1)^2`, each divided by
/// the common factor `exp(-lambda i^alpha)`: diagonal, `y1 < y2`, `y1 > y2`.
fn tie_cell_masses(params: &MOBWParams, i: u64) -> [f64; 3] {
    let MOBWParams {
        alpha: a,
        lambda0: l0,
        lambda1: l1,
        lambda2: l2,
    } = *params;
    let total = params.lambda();
    let d = pow_alpha(i as f64 + 1.0, a) - pow_alpha(i as f64, a);
    let q_total = -(-total * d).exp_m1();
    let diag = l0 / total * q_total;
    let tri =
        |rs: f64, rl: f64| (rs / total * q_total - (-rl * d).exp() * -(-rs * d).exp_m1()).max(0.0);
    [diag, tri(l1, l0 + l2), tri(l2, l0 + l1)]
}

/// Deterministic quadrature representation of the latent pair's
/// conditional law given its cell: weighted nodes whose weights sum to one.
///
/// Off-diagonal cells use a tensor Gauss-Legendre rule in the truncated
/// quantile scale of each coordinate. In tie cells the diagonal atom and the
/// two triangles each get their own rule, with exact closed-form masses.
pub(crate) fn cell_quadrature(
    params: &MOBWParams,
    i: u64,
    j: u64,
    nodes: &[f64],
    weights: &[f64],
) -> Vec<CompletePair> {
    let MOBWParams {
        alpha: a,
        lambda0: l0,
        lambda1: l1,
        lambda2: l2,
    } = *params;
    let (lo1, lo2) = (i as f64, j as f64);
    let mut out = Vec::new();
    if i != j {
        let (r1, r2, region) = if i < j {
            (l1, l0 + l2, Region::Above)
        } else {
            (l0 + l1, l2, Region::Below)
        };
        for (t1, w1) in nodes.iter().zip(weights) {
            let y1 = truncated_quantile(a, r1, lo1, lo1 + 1.0, *t1);
            for (t2, w2) in nodes.iter().zip(weights) {
                let y2 = truncated_quantile(a, r2, lo2, lo2 + 1.0, *t2);
                out.push(CompletePair {
                    y1,
                    y2,
                    region,
                    weight: w1 * w2,
                });
            }
        }
        return out;
    }
    let masses = tie_cell_masses(params, i);
    let norm: f64 = masses.iter().sum();
    let total = params.lambda();
    let hi = lo1 + 1.0;
    if masses[0] > 0.0 {
        for (t, w) in nodes.iter().zip(weights) {
            let y = truncated_quantile(a, total, lo1, hi, *t);
            out.push(CompletePair {
                y1: y,
                y2: y,
                region: Region::Tie,
                weight: masses[0] / norm * w,
            });
        }
    }
    // triangle: the smaller coordinate has rate rs, the larger rate rl
    let mut triangle = |rs: f64, rl: f64, mass: f64, region: Region| {
        if !(mass > 0.0) {
            return;
        }
        let s_hi = (-rl * pow_alpha(hi, a)).exp();
        let mut part = Vec::with_capacity(nodes.len() * nodes.len());
        let mut sum = 0.0;
        for (t1, w1) in nodes.iter().zip(weights) {
            let small = truncated_quantile(a, rs, lo1, hi, *t1);
            // probability that the larger coordinate lands in [small, hi)
            let reach = (-rl * pow_alpha(small, a)).exp() - s_hi;
            for (t2, w2) in nodes.iter().zip(weights) {
                let large = truncated_quantile(a, rl, small, hi, *t2);
                let wt = w1 * reach * w2;
                sum += wt;
                part.push((small, large, wt));
            }
        }
        if sum > 0.0 {
            for (small, large, wt) in part {
                let (y1, y2) = if region == Region::Above {
                    (small, large)
                } else {
                    (large, small)
                };
                out.push(CompletePair {
                    y1,
                    y2,
                    region,
                    weight: mass / norm * wt / sum,
                });
            }
        }
    };
    triangle(l1, l0 + l2, masses[1], Region::Above);
    triangle(l2, l0 + l1, masses[2], Region::Below);
    out
}

/// Exact draw of the latent pair from its conditional law given the cell.
pub(crate) fn draw_in_cell<R: Rng + ?Sized>(
    params: &MOBWParams,
    i: u64,
    j: u64,
    rng: &mut R,
) -> CompletePair {
    let MOBWParams {
        alpha: a,
        lambda0: l0,
        lambda1: l1,
        lambda2: l2,
    } = *params;
    let mut unif = || -> f64 { Open01.sample(rng) };
    let (lo1, lo2) = (i as f64, j as f64);
    if i != j {
        let (r1, r2) = if i < j { (l1, l0 + l2) } else { (l0 + l1, l2) };
        let y1 = truncated_quantile(a, r1, lo1, lo1 + 1.0, unif());
        let y2 = truncated_quantile(a, r2, lo2, lo2 + 1.0, unif());
        return CompletePair::new(y1, y2).with_region(if i < j {
            Region::Above
        } else {
            Region::Below
        });
    }
    let masses = tie_cell_masses(params, i);
    let norm: f64 = masses.iter().sum();
    let hi = lo1 + 1.0;
    let pick = unif() * norm;
    if pick < masses[0] {
        return CompletePair::tie(truncated_quantile(a, params.lambda(), lo1, hi, unif()));
    }
    let (rs, rl, region) = if pick < masses[0] + masses[1] {
        (l1, l0 + l2, Region::Above)
    } else {
        (l2, l0 + l1, Region::Below)
    };
    // the smaller coordinate has density proportional to
    // f(s; rs) * (S(s; rl) - S(hi; rl)) on [lo, hi); rejection from f(s; rs)
    let s_lo = (-rl * pow_alpha(lo1, a)).exp();
    let s_hi = (-rl * pow_alpha(hi, a)).exp();
    let mut small = lo1;
    for _ in 0..10_000 {
        small = truncated_quantile(a, rs, lo1, hi, unif());
        let accept = ((-rl * pow_alpha(small, a)).exp() - s_hi) / (s_lo - s_hi);
        if unif() < accept {
            break;
        }
    }
    let large = truncated_quantile(a, rl, small, hi, unif());
    let (y1, y2) = if region == Region::Above {
        (small, large)
    } else {
        (large, small)
    };
    CompletePair {
        y1,
        y2,
        region,
        weight: 1.0,
    }
}

impl CompletePair {
    fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdw::{from_mobw, joint_pmf};
    use crate::optim::gauss_legendre_unit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mobw(a: f64, l0: f64, l1: f64, l2: f64) -> MOBWParams {
        MOBWParams::new(a, l0, l1, l2).unwrap()
    }

    #[test]
    fn validation() {
        assert!(MOBWParams::new(1.0, -0.1, 1.0, 1.0).is_err());
        assert!(MOBWParams::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(MOBWParams::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(MOBWParams::new(1.0, 0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn survival_examples() {
        let p = mobw(1.0, 1.0, 1.0, 1.0);
        assert_eq!(mobw_sf(&p, 0.0, 0.0), 1.0);
        assert!((mobw_sf(&p, 1.0, 2.0) - (-5.0f64).exp()).abs() < 1e-15);
        let ind = mobw(1.7, 0.0, 0.4, 0.9);
        for &(y1, y2) in &[(0.3, 2.0), (1.5, 1.5), (4.0, 0.1)] {
            let want = (-0.4 * f64::powf(y1, 1.7)).exp() * (-0.9 * f64::powf(y2, 1.7)).exp();
            assert!((mobw_sf(&ind, y1, y2) - want).abs() < 1e-15);
        }
        let q = mobw(2.2, 0.3, 0.5, 0.7);
        for &y in &[0.0, 0.5, 1.0, 3.0] {
            assert_eq!(
                mobw_sf(&q, y, 0.0),
                (-(0.3 + 0.5) * pow_alpha(y, 2.2)).exp()
            );
        }
    }

    #[test]
    fn density_branches() {
        let p = mobw(1.0, 1.0, 1.0, 1.0);
        let d = mobw_pdf(&p, 1.0, 2.0);
        assert_eq!(d.branch, DensityBranch::Above);
        assert!((d.value - (-1.0f64).exp() * 2.0 * (-4.0f64).exp()).abs() < 1e-15);
        assert_eq!(mobw_pdf(&p, 2.0, 1.0).branch, DensityBranch::Below);
        let z = mobw_pdf(&mobw(1.5, 0.0, 1.0, 1.0), 0.7, 0.7);
        assert_eq!((z.value, z.branch), (0.0, DensityBranch::Diagonal));
    }

    #[test]
    fn density_integrates_to_one() {
        // alpha = 1, unit rates; the density decays like exp(-3y) on the diagonal
        let p = mobw(1.0, 1.0, 1.0, 1.0);
        let (x, w) = gauss_legendre_unit(40);
        let upper = 40.0;
        let sub = 80;
        let h = upper / sub as f64;
        let mut diag = 0.0;
        let mut off = 0.0;
        for s in 0..sub {
            for (xi, wi) in x.iter().zip(&w) {
                let y = (s as f64 + xi) * h;
                diag += wi * h * mobw_pdf(&p, y, y).value;
                // inner integral over y2 > y analytically: f1(y) * S02(y)
                off += 2.0 * wi * h * weibull_density(1.0, 1.0, y) * (-2.0 * y).exp();
            }
        }
        assert!((diag + off - 1.0).abs() < 1e-6, "{diag} + {off}");
        assert!((diag - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn sampler_matches_survival() {
        let p = mobw(1.3, 0.4, 0.7, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let (t, s) = (0.6, 0.9);
        let hits = (0..n)
            .filter(|_| {
                let (y1, y2) = mobw_sample(&p, &mut rng);
                y1 > t && y2 > s
            })
            .count();
        let want = mobw_sf(&p, t, s);
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - want).abs() < 3.0 * se);
    }

    #[test]
    fn huge_common_shock_makes_ties() {
        let p = mobw(1.0, 500.0, 0.01, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ties = (0..2000)
            .filter(|_| {
                let (a, b) = mobw_sample(&p, &mut rng);
                a.floor() == b.floor()
            })
            .count();
        assert!(ties >= 1990);
    }

    #[test]
    fn complete_loglik_examples() {
        let p = mobw(1.5, 0.3, 0.6, 0.9);
        let y = 0.8;
        let one = complete_loglik(&p, &[CompletePair::tie(y)]).unwrap();
        let want = (0.3f64 / 1.8).ln() + weibull_density(1.5, 1.8, y).ln();
        assert!((one - want).abs() < 1e-12);

        let two = complete_loglik(
            &p,
            &[CompletePair::new(0.5, 1.2), CompletePair::new(2.0, 0.4)],
        )
        .unwrap();
        let hand = weibull_density(1.5, 0.6, 0.5).ln()
            + weibull_density(1.5, 1.2, 1.2).ln()
            + weibull_density(1.5, 0.9, 2.0).ln()
            + weibull_density(1.5, 0.9, 0.4).ln();
        assert!((two - hand).abs() < 1e-12);

        let no_shock = mobw(1.5, 0.0, 0.6, 0.9);
        assert_eq!(
            complete_loglik(
                &no_shock,
                &[CompletePair::new(0.5, 1.0), CompletePair::tie(y)]
            ),
            Err(Error::NonFinite { index: 1 })
        );
    }

    #[test]
    fn predictor_examples() {
        let p = mobw(0.8, 0.2, 0.5, 0.4);
        let r = ml_predict(&p, 1, 3).unwrap();
        assert_eq!(
            (r.y1hat, r.y2hat, r.case_tag),
            (1.0, 3.0, CaseTag::AboveDiagonal)
        );

        let q = mobw(2.0, 0.5, 1.0, 0.5);
        let r = ml_predict(&q, 3, 5).unwrap();
        assert_eq!((r.y1hat, r.y2hat), (3.0, 5.0));

        let s = mobw(2.0, 0.05, 0.1, 0.05);
        let r = ml_predict(&s, 2, 4).unwrap();
        assert!((r.y1hat - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn predictor_stays_in_cell() {
        let grid = [
            mobw(0.7, 0.3, 0.2, 0.5),
            mobw(1.0, 0.1, 0.3, 0.3),
            mobw(2.5, 0.05, 0.2, 0.04),
            mobw(4.0, 0.001, 0.25, 0.05),
        ];
        for p in grid {
            for i in 0..6u64 {
                for j in 0..6u64 {
                    let r = ml_predict(&p, i, j).unwrap();
                    assert_eq!(r.y1hat.floor() as u64, i, "{p:?} {i} {j} {r:?}");
                    assert_eq!(r.y2hat.floor() as u64, j, "{p:?} {i} {j} {r:?}");
                    // alpha < 1 makes the density unbounded at the origin
                    if let (Some(w), false) = (r.weights, p.alpha() < 1.0 && i == 0) {
                        assert!(w.iter().all(|v| v.is_finite() && *v >= 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn no_shock_never_picks_diagonal() {
        for p in [
            mobw(2.0, 0.0, 0.3, 0.1),
            mobw(0.9, 0.0, 0.5, 0.5),
            mobw(3.0, 0.0, 0.05, 0.4),
        ] {
            for i in 0..4 {
                let r = ml_predict(&p, i, i).unwrap();
                let w = r.weights.unwrap();
                assert_eq!(w[0], 0.0);
                if w[1] > 0.0 || w[2] > 0.0 {
                    assert_ne!(r.case_tag, CaseTag::TieW);
                }
            }
        }
    }

    #[test]
    fn prediction_dominates_cell_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = [
            mobw(2.0, 0.05, 0.3, 0.1),
            mobw(3.5, 0.01, 0.02, 0.2),
            mobw(0.8, 0.3, 0.4, 0.2),
            mobw(1.8, 0.2, 0.05, 0.05),
        ];
        for p in grid {
            for i in 0..4u64 {
                for j in 0..4u64 {
                    if i == j {
                        continue;
                    }
                    if p.alpha() < 1.0 && (i == 0 || j == 0) {
                        continue;
                    }
                    let r = ml_predict(&p, i, j).unwrap();
                    let at = cell_conditional_density(&p, i, j, r.y1hat, r.y2hat);
                    assert!(
                        (at - r.density_value).abs() <= 1e-12 * at.max(1.0),
                        "{p:?} {i} {j} {r:?} {at}"
                    );
                    for _ in 0..1000 {
                        let y1 = i as f64 + rng.random::<f64>();
                        let y2 = j as f64 + rng.random::<f64>();
                        assert!(cell_conditional_density(&p, i, j, y1, y2) <= at * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn quadrature_weights_sum_to_one_and_match_cell_means() {
        let (t, w) = gauss_legendre_unit(12);
        let p = mobw(2.1, 0.07, 0.19, 0.14);
        for (i, j) in [(0, 0), (1, 1), (3, 3), (0, 2), (4, 1)] {
            let q = cell_quadrature(&p, i, j, &t, &w);
            let s: f64 = q.iter().map(|c| c.weight).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for c in &q {
                assert_eq!(c.y1.floor() as u64, i);
                assert_eq!(c.y2.floor() as u64, j);
            }
            // compare E[Y1] with exact draws
            let mut rng = ChaCha8Rng::seed_from_u64(5 + i * 10 + j);
            let n = 40_000;
            let draws: Vec<CompletePair> =
                (0..n).map(|_| draw_in_cell(&p, i, j, &mut rng)).collect();
            let mean_q: f64 = q.iter().map(|c| c.weight * c.y1).sum();
            let mean_d: f64 = draws.iter().map(|c| c.y1).sum::<f64>() / n as f64;
            let sd = (draws.iter().map(|c| (c.y1 - mean_d).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!(
                (mean_q - mean_d).abs() < 4.0 * sd / (n as f64).sqrt() + 1e-9,
                "{i}{j}: {mean_q} {mean_d}"
            );
            if i == j {
                let tie_q: f64 = q
                    .iter()
                    .filter(|c| c.region == Region::Tie)
                    .map(|c| c.weight)
                    .sum();
                let tie_d =
                    draws.iter().filter(|c| c.region == Region::Tie).count() as f64 / n as f64;
                assert!((tie_q - tie_d).abs() < 4.0 * (tie_q * (1.0 - tie_q) / n as f64).sqrt());
            }
        }
    }

    #[test]
    fn tie_cell_masses_match_cell_probability() {
        let p = mobw(1.7, 0.2, 0.3, 0.6);
        for i in 0..5u64 {
            let m = tie_cell_masses(&p, i);
            let scale = (-p.lambda() * pow_alpha(i as f64, 1.7)).exp();
            let total: f64 = m.iter().sum::<f64>() * scale;
            let cell = joint_pmf(&from_mobw(&p), i, i);
            assert!((total - cell).abs() < 1e-14, "{i}: {total} vs {cell}");
        }
    }
}
