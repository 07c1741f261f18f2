//! Bayesian estimation under a Dirichlet-Gamma prior on the rates and a
//! gamma prior on the shape, by an augmented Gibbs sampler.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fit_ml::BivariateDataset;
use crate::mobw::{draw_in_cell, ml_predict, CompletePair, MOBWParams, Region};

/// Dirichlet-Gamma prior on `(lambda0, lambda1, lambda2)`: the total
/// `lambda` is Gamma(a, b) and the proportions are Dirichlet(a0, a1, a2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DGPrior {
    pub a: f64,
    pub b: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl DGPrior {
    pub fn new(a: f64, b: f64, a0: f64, a1: f64, a2: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("a0", a0), ("a1", a1), ("a2", a2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self { a, b, a0, a1, a2 })
    }

    fn shapes(&self) -> [f64; 3] {
        [self.a0, self.a1, self.a2]
    }
}

impl Default for DGPrior {
    /// The vague choice `a = b = a0 = a1 = a2 = 1e-4`.
    fn default() -> Self {
        Self {
            a: 1e-4,
            b: 1e-4,
            a0: 1e-4,
            a1: 1e-4,
            a2: 1e-4,
        }
    }
}

/// Gamma prior on `alpha` with shape `c` and rate `d` (mean `c / d`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrior {
    pub c: f64,
    pub d: f64,
}

impl AlphaPrior {
    pub fn new(c: f64, d: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("d", d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self { c, d })
    }

    fn ln_density(&self, alpha: f64) -> f64 {
        (self.c - 1.0) * alpha.ln() - self.d * alpha
    }
}

impl Default for AlphaPrior {
    fn default() -> Self {
        Self { c: 1e-4, d: 1e-4 }
    }
}

/// Log density of the Dirichlet-Gamma prior.
pub fn dg_logpdf(prior: &DGPrior, lambda0: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    let l = [lambda0, lambda1, lambda2];
    if l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "rates must be finite and > 0, got {l:?}"
        )));
    }
    let sa = prior.a0 + prior.a1 + prior.a2;
    let total: f64 = l.iter().sum();
    let mut v = ln_gamma(sa) - ln_gamma(prior.a) + (prior.a - sa) * (prior.b * total).ln();
    for (ai, li) in prior.shapes().iter().zip(l) {
        v += ai * prior.b.ln() - ln_gamma(*ai) + (ai - 1.0) * li.ln() - prior.b * li;
    }
    Ok(v)
}

/// Failure-cause counts and exposures of complete data at a fixed shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    /// `(N0, N1, N2)`.
    pub counts: [f64; 3],
    /// `(T0, T1, T2)` with `T0 = sum max(y1, y2)^alpha`, `T1 = sum y1^alpha`, `T2 = sum y2^alpha`.
    pub exposures: [f64; 3],
}

/// One draw from the full conditional of the rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaDraw {
    pub lambdas: [f64; 3],
    /// Whether the Metropolis step accepted the gamma proposal (always true
    /// when `a = a0 + a1 + a2`).
    pub accepted: bool,
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    g.sample(rng).max(f64::MIN_POSITIVE)
}

/// Draws `(lambda0, lambda1, lambda2)` given cause counts and exposures.
///
/// The full conditional is proportional to
/// `lambda^(a - a0 - a1 - a2) * prod Gamma(lambda_j; a_j + N_j, b + T_j)`.
/// The product of gammas is drawn exactly and, unless the exponent
/// vanishes, used as an independence proposal in a Metropolis step from
/// `current`.
pub fn sample_lambdas_conditional<R: Rng + ?Sized>(
    prior: &DGPrior,
    stats: &SufficientStats,
    current: [f64; 3],
    rng: &mut R,
) -> LambdaDraw {
    let shapes = prior.shapes();
    let mut prop = [0.0; 3];
    for j in 0..3 {
        prop[j] = gamma_draw(
            shapes[j] + stats.counts[j],
            prior.b + stats.exposures[j],
            rng,
        );
    }
    let excess = prior.a - shapes.iter().sum::<f64>();
    if excess == 0.0 {
        return LambdaDraw {
            lambdas: prop,
            accepted: true,
        };
    }
    let ln_ratio = excess * (prop.iter().sum::<f64>().ln() - current.iter().sum::<f64>().ln());
    let u: f64 = Open01.sample(rng);
    if u.ln() < ln_ratio {
        LambdaDraw {
            lambdas: prop,
            accepted: true,
        }
    } else {
        LambdaDraw {
            lambdas: current,
            accepted: false,
        }
    }
}

/// Complete data prepared for the shape update.
struct ShapeData {
    ln_y1: Vec<f64>,
    ln_y2: Vec<f64>,
    ln_max: Vec<f64>,
    events: f64,
    sum_ln: f64,
}

impl ShapeData {
    fn new(sample: &[CompletePair]) -> Result<Self> {
        let mut s = ShapeData {
            ln_y1: vec![],
            ln_y2: vec![],
            ln_max: vec![],
            events: 0.0,
            sum_ln: 0.0,
        };
        for (index, c) in sample.iter().enumerate() {
            if !(c.y1 > 0.0 && c.y2 > 0.0) {
                return Err(Error::DegenerateData(format!(
                    "latent pair {index} has a zero coordinate"
                )));
            }
            let (a, b) = (c.y1.ln(), c.y2.ln());
            s.ln_y1.push(a);
            s.ln_y2.push(b);
            s.ln_max.push(a.max(b));
            if c.region == Region::Tie {
                s.events += 1.0;
                s.sum_ln += a;
            } else {
                s.events += 2.0;
                s.sum_ln += a + b;
            }
        }
        Ok(s)
    }

    fn exposures(&self, alpha: f64) -> [f64; 3] {
        let mut t = [0.0; 3];
        for k in 0..self.ln_y1.len() {
            t[0] += (alpha * self.ln_max[k]).exp();
            t[1] += (alpha * self.ln_y1[k]).exp();
            t[2] += (alpha * self.ln_y2[k]).exp();
        }
        t
    }
}

const LN_ALPHA_BOUNDS: (f64, f64) = (-6.907_755_278_982_137, 6.907_755_278_982_137);

/// Draws the shape from its full conditional given rates and complete data.
///
/// Slice sampling with stepping out and shrinkage on `ln alpha` within
/// `[1e-3, 1e3]`; the target includes the Jacobian of the log transform.
pub fn sample_alpha_conditional<R: Rng + ?Sized>(
    alpha_prior: &AlphaPrior,
    lambdas: [f64; 3],
    sample: &[CompletePair],
    current: f64,
    rng: &mut R,
) -> Result<f64> {
    let data = ShapeData::new(sample)?;
    Ok(slice_alpha(alpha_prior, lambdas, &data, current, rng))
}

fn slice_alpha<R: Rng + ?Sized>(
    prior: &AlphaPrior,
    lambdas: [f64; 3],
    data: &ShapeData,
    current: f64,
    rng: &mut R,
) -> f64 {
    let target = |u: f64| -> f64 {
        let alpha = u.exp();
        let t = data.exposures(alpha);
        let hazard: f64 = (0..3).map(|j| lambdas[j] * t[j]).sum();
        prior.ln_density(alpha) + u + data.events * u + (alpha - 1.0) * data.sum_ln - hazard
    };
    let mut unif = || -> f64 { Open01.sample(rng) };
    let x0 = current.ln().clamp(LN_ALPHA_BOUNDS.0, LN_ALPHA_BOUNDS.1);
    let level = target(x0) + unif().ln();
    let width = 0.5;
    let mut lo = x0 - width * unif();
    let mut hi = lo + width;
    let mut steps = 64;
    while steps > 0 && lo > LN_ALPHA_BOUNDS.0 && target(lo) > level {
        lo -= width;
        steps -= 1;
    }
    steps = 64;
    while steps > 0 && hi < LN_ALPHA_BOUNDS.1 && target(hi) > level {
        hi += width;
        steps -= 1;
    }
    lo = lo.max(LN_ALPHA_BOUNDS.0);
    hi = hi.min(LN_ALPHA_BOUNDS.1);
    loop {
        let x = lo + (hi - lo) * unif();
        if target(x) > level {
            return x.exp();
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo < 1e-12 {
            return x0.exp();
        }
    }
}

/// How the latent continuous pairs are supplied to the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Augmentation {
    /// Redraw every latent pair from its exact conditional law given the
    /// cell and the current parameters at each Gibbs iteration.
    #[default]
    Draw,
    /// Fix the latent pairs at the maximum-likelihood predictor evaluated at
    /// the parameters that start each outer step.
    Predictor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsOptions {
    /// Draws per outer step.
    pub m: usize,
    /// Outer steps.
    pub n: usize,
    /// Fraction of each step's draws discarded before averaging.
    pub burn_in: f64,
    pub augmentation: Augmentation,
    /// Level of the reported credible intervals.
    pub level: f64,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            m: 10_000,
            n: 20,
            burn_in: 0.1,
            augmentation: Augmentation::Draw,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Order: alpha, lambda0, lambda1, lambda2.
    pub mean: [f64; 4],
    pub sd: [f64; 4],
    pub level: f64,
    pub hpd: [(f64, f64); 4],
    pub equal_tailed: [(f64, f64); 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    /// Retained draws of the final outer step, `[alpha, lambda0, lambda1, lambda2]`.
    pub draws: Vec<[f64; 4]>,
    pub m: usize,
    pub n: usize,
    pub burn_in: usize,
    pub summary: PosteriorSummary,
    /// Metropolis acceptance rate of the rate update over the whole run.
    pub acceptance_rate: f64,
    /// Per-step averages that seeded the following step.
    pub step_means: Vec<[f64; 4]>,
}

fn draw_causes<R: Rng + ?Sized>(
    sample: &[CompletePair],
    lambdas: [f64; 3],
    rng: &mut R,
) -> [f64; 3] {
    let [l0, l1, l2] = lambdas;
    let w0a = l0 / (l0 + l2);
    let w0b = l0 / (l0 + l1);
    let mut n = [0.0; 3];
    for c in sample {
        match c.region {
            Region::Tie => n[0] += 1.0,
            Region::Above => {
                n[1] += 1.0;
                let u: f64 = Open01.sample(rng);
                if u < w0a {
                    n[0] += 1.0
                } else {
                    n[2] += 1.0
                }
            }
            Region::Below => {
                n[2] += 1.0;
                let u: f64 = Open01.sample(rng);
                if u < w0b {
                    n[0] += 1.0
                } else {
                    n[1] += 1.0
                }
            }
        }
    }
    n
}

fn impute_predictor(data: &BivariateDataset, theta: &MOBWParams) -> Result<Vec<CompletePair>> {
    data.pairs()
        .iter()
        .map(|&(i, j)| {
            let p = ml_predict(theta, i, j)?;
            Ok(CompletePair {
                y1: p.y1hat,
                y2: p.y2hat,
                region: p.region(),
                weight: 1.0,
            })
        })
        .collect()
}

/// Augmented Gibbs sampler.
///
/// Each of `n` outer steps runs `m` Gibbs sweeps over latent pairs, failure
/// causes, rates and shape, starting from the average of the previous
/// step's retained draws. The draws of the last step are returned.
pub fn augmented_gibbs<R: Rng + ?Sized>(
    data: &BivariateDataset,
    prior: &DGPrior,
    alpha_prior: &AlphaPrior,
    options: &GibbsOptions,
    start: &MOBWParams,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    if options.m < 100 {
        return Err(Error::InvalidArgument(format!(
            "m must be >= 100, got {}",
            options.m
        )));
    }
    if options.n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&options.burn_in) {
        return Err(Error::InvalidArgument(format!(
            "burn-in fraction must lie in [0, 1), got {}",
            options.burn_in
        )));
    }
    let burn = (options.burn_in * options.m as f64).floor() as usize;
    let mut theta = *start;
    if theta.lambda0() == 0.0 {
        theta = MOBWParams::new(theta.alpha(), 1e-6, theta.lambda1(), theta.lambda2())?;
    }
    let mut step_means = Vec::with_capacity(options.n);
    let mut accepted = 0usize;
    let mut proposals = 0usize;
    let mut kept: Vec<[f64; 4]> = Vec::new();
    for step in 0..options.n {
        let fixed = match options.augmentation {
            Augmentation::Predictor => Some(impute_predictor(data, &theta)?),
            Augmentation::Draw => None,
        };
        let mut alpha = theta.alpha();
        let mut lambdas = [theta.lambda0(), theta.lambda1(), theta.lambda2()];
        kept.clear();
        for it in 0..options.m {
            let current = MOBWParams::new(alpha, lambdas[0], lambdas[1], lambdas[2])?;
            let drawn;
            let sample: &[CompletePair] = match &fixed {
                Some(s) => s,
                None => {
                    drawn = data
                        .pairs()
                        .iter()
                        .map(|&(i, j)| draw_in_cell(&current, i, j, rng))
                        .collect::<Vec<_>>();
                    &drawn
                }
            };
            let shape = ShapeData::new(sample)?;
            let counts = draw_causes(sample, lambdas, rng);
            let stats = SufficientStats {
                counts,
                exposures: shape.exposures(alpha),
            };
            let d = sample_lambdas_conditional(prior, &stats, lambdas, rng);
            proposals += 1;
            accepted += d.accepted as usize;
            lambdas = d.lambdas;
            alpha = slice_alpha(alpha_prior, lambdas, &shape, alpha, rng);
            if it >= burn {
                kept.push([alpha, lambdas[0], lambdas[1], lambdas[2]]);
            }
        }
        let mean = column_means(&kept);
        log::debug!("gibbs step {}: mean = {mean:?}", step + 1);
        step_means.push(mean);
        theta = MOBWParams::new(mean[0], mean[1], mean[2], mean[3])?;
    }
    let summary = summarize(&kept, options.level)?;
    Ok(PosteriorDraws {
        draws: kept,
        m: options.m,
        n: options.n,
        burn_in: burn,
        summary,
        acceptance_rate: accepted as f64 / proposals as f64,
        step_means,
    })
}

fn column_means(draws: &[[f64; 4]]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for d in draws {
        for k in 0..4 {
            m[k] += d[k];
        }
    }
    m.map(|v| v / draws.len() as f64)
}

fn summarize(draws: &[[f64; 4]], level: f64) -> Result<PosteriorSummary> {
    let mean = column_means(draws);
    let mut sd = [0.0; 4];
    let mut hpd = [(0.0, 0.0); 4];
    let mut equal_tailed = [(0.0, 0.0); 4];
    let beta = 1.0 - level;
    for k in 0..4 {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let var =
            col.iter().map(|v| (v - mean[k]).powi(2)).sum::<f64>() / (col.len().max(2) - 1) as f64;
        sd[k] = var.sqrt();
        hpd[k] = hpd_interval(&col, beta)?;
        equal_tailed[k] = equal_tailed_interval(&col, beta)?;
    }
    Ok(PosteriorSummary {
        mean,
        sd,
        level,
        hpd,
        equal_tailed,
    })
}

fn sorted(draws: &[f64]) -> Vec<f64> {
    let mut g = draws.to_vec();
    g.sort_by(f64::total_cmp);
    g
}

fn window(m: usize, beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    let cover = (1.0 - beta) * m as f64;
    if cover < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "{m} draws are too few for a {:.0}% interval",
            cover / m as f64 * 100.0
        )));
    }
    Ok(((cover - 1e-9).ceil() as usize).min(m - 1))
}

/// Shortest interval `[g(i), g(i+k)]` over the order statistics with
/// `k = ceil((1 - beta) M)`; equal lengths resolve to the leftmost window.
pub fn hpd_interval(draws: &[f64], beta: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::EmptyData);
    }
    let k = window(draws.len(), beta)?;
    let g = sorted(draws);
    let mut best = 0;
    for i in 1..g.len() - k {
        if g[i + k] - g[i] < g[best + k] - g[best] {
            best = i;
        }
    }
    Ok((g[best], g[best + k]))
}

/// Equal-tailed interval from the same order statistics.
pub fn equal_tailed_interval(draws: &[f64], beta: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::EmptyData);
    }
    let k = window(draws.len(), beta)?;
    let g = sorted(draws);
    let start = (g.len() - 1 - k) / 2;
    Ok((g[start], g[start + k]))
}
