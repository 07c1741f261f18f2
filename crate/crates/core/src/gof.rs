//! Pearson chi-square goodness of fit for DW margins and the BDW joint law.
//!
//! Cells are the observed support values, optionally with the last cell
//! absorbing the upper tail, and adjacent cells are pooled left to right
//! until each group has expected count at least `min_expected`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::bdw::{BDWParams, Rates};
use crate::error::{Error, Result};
use crate::fit_ml::BivariateDataset;
use crate::univariate::{dw_pmf_rate, pow_alpha, profile_fit, validate_sample, DWParams};

/// `P(chi2_df > x)`.
pub fn chisq_upper_tail(x: f64, df: usize) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    if df == 0 {
        return 0.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// What happens to the probability beyond the largest observed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailCell {
    /// The last cell holds the whole upper tail, so expected counts sum to `n`.
    #[default]
    Absorb,
    /// Cells hold point probabilities only; the upper tail is dropped.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofOptions {
    pub tail: TailCell,
    /// Pooling threshold on expected counts.
    pub min_expected: f64,
    /// Degrees of freedom subtracted for fitted parameters.
    pub df_penalty: usize,
}

impl Default for GofOptions {
    fn default() -> Self {
        Self {
            tail: TailCell::Absorb,
            min_expected: 1.0,
            df_penalty: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub observed: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub cells: Vec<Cell>,
}

/// Merges adjacent cells left to right until each group reaches
/// `min_expected`; a short final group joins its predecessor.
fn pool(cells: Vec<Cell>, min_expected: f64) -> Vec<Cell> {
    let mut out: Vec<Cell> = Vec::new();
    let mut acc: Option<(Vec<String>, f64, f64)> = None;
    for c in cells {
        let (labels, o, e) = acc.get_or_insert_with(|| (Vec::new(), 0.0, 0.0));
        labels.push(c.label);
        *o += c.observed;
        *e += c.expected;
        if *e >= min_expected {
            let (labels, o, e) = acc.take().expect("accumulator present");
            out.push(Cell {
                label: join_labels(&labels),
                observed: o,
                expected: e,
            });
        }
    }
    if let Some((labels, o, e)) = acc {
        match out.last_mut() {
            Some(last) => {
                let mut all = vec![last.label.clone()];
                all.extend(labels);
                last.label = join_labels(&all);
                last.observed += o;
                last.expected += e;
            }
            None => out.push(Cell {
                label: join_labels(&labels),
                observed: o,
                expected: e,
            }),
        }
    }
    out
}

fn join_labels(labels: &[String]) -> String {
    match labels {
        [] => String::new(),
        [one] => one.clone(),
        [first, .., last] => {
            let last = last.split('|').next_back().unwrap_or(last);
            let first = first.split('|').next().unwrap_or(first);
            format!("{first}|{last}")
        }
    }
}

fn finish(cells: Vec<Cell>, options: &GofOptions) -> Result<ChiSquareReport> {
    let cells = pool(cells, options.min_expected);
    if cells.len() < 2 {
        return Err(Error::TooFewCells(cells.len()));
    }
    let statistic: f64 = cells
        .iter()
        .map(|c| (c.observed - c.expected).powi(2) / c.expected)
        .sum();
    let df = (cells.len() - 1)
        .checked_sub(options.df_penalty)
        .filter(|d| *d > 0)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{} cells leave no degrees of freedom after the penalty",
                cells.len()
            ))
        })?;
    Ok(ChiSquareReport {
        statistic,
        df,
        p_value: chisq_upper_tail(statistic, df),
        cells,
    })
}

fn counts(data: &[u64]) -> Vec<f64> {
    let max = *data.iter().max().expect("non-empty") as usize;
    let mut c = vec![0.0; max + 1];
    for &y in data {
        c[y as usize] += 1.0;
    }
    c
}

fn dw_cells(data: &[u64], alpha: f64, rate: f64, tail: TailCell) -> Vec<Cell> {
    let obs = counts(data);
    let n = data.len() as f64;
    let last = obs.len() - 1;
    obs.iter()
        .enumerate()
        .map(|(y, &o)| {
            let (label, prob) = if y == last && tail == TailCell::Absorb {
                (format!("{y}+"), (-rate * pow_alpha(y as f64, alpha)).exp())
            } else {
                (y.to_string(), dw_pmf_rate(rate, alpha, y as u64))
            };
            Cell {
                label,
                observed: o,
                expected: n * prob,
            }
        })
        .collect()
}

pub fn chisq_dw(data: &[u64], params: &DWParams) -> Result<ChiSquareReport> {
    chisq_dw_with(data, params, &GofOptions::default())
}

pub fn chisq_dw_with(
    data: &[u64],
    params: &DWParams,
    options: &GofOptions,
) -> Result<ChiSquareReport> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if params.is_degenerate() {
        return Err(Error::DegenerateDw);
    }
    finish(
        dw_cells(data, params.alpha(), params.rate(), options.tail),
        options,
    )
}

/// A DW law fitted by minimizing the Pearson statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinChiSquareFit {
    pub params: DWParams,
    pub statistic: f64,
}

/// Minimum chi-square DW fit.
///
/// The statistic uses one cell per value `0..=max` with point probabilities
/// and no pooling or tail cell, which is the layout behind the classic
/// published fits of the football and nasal-drainage margins.
pub fn dw_fit_min_chisq(data: &[u64]) -> Result<MinChiSquareFit> {
    validate_sample(data)?;
    let obs = counts(data);
    let n = data.len() as f64;
    let stat = |alpha: f64, rate: f64| -> f64 {
        let mut s = 0.0;
        for (y, &o) in obs.iter().enumerate() {
            let e = n * dw_pmf_rate(rate, alpha, y as u64);
            if !(e > 0.0) {
                return f64::INFINITY;
            }
            s += (o - e).powi(2) / e;
        }
        s
    };
    let (alpha, rate, value) = profile_fit(stat);
    Ok(MinChiSquareFit {
        params: DWParams::from_rate(alpha, rate)?,
        statistic: value,
    })
}

/// Probability of the rectangle `[a1, b1) x [a2, b2)`; `None` bounds are infinite.
fn rect(r: &Rates, a1: u64, b1: Option<u64>, a2: u64, b2: Option<u64>) -> f64 {
    let s = |x1: Option<u64>, x2: Option<u64>| match (x1, x2) {
        (Some(u), Some(v)) => r.sf(u as f64, v as f64),
        _ => 0.0,
    };
    (s(Some(a1), Some(a2)) - s(b1, Some(a2)) - s(Some(a1), b2) + s(b1, b2)).max(0.0)
}

pub fn chisq_bdw(data: &BivariateDataset, params: &BDWParams) -> Result<ChiSquareReport> {
    chisq_bdw_with(data, params, &GofOptions::default())
}

/// Chi-square test on the product grid of observed supports, flattened row
/// by row (`x1` outer) before pooling.
pub fn chisq_bdw_with(
    data: &BivariateDataset,
    params: &BDWParams,
    options: &GofOptions,
) -> Result<ChiSquareReport> {
    let pairs = data.pairs();
    if pairs.is_empty() {
        return Err(Error::EmptyData);
    }
    let m1 = pairs.iter().map(|p| p.0).max().expect("non-empty");
    let m2 = pairs.iter().map(|p| p.1).max().expect("non-empty");
    let mut obs = vec![vec![0.0; m2 as usize + 1]; m1 as usize + 1];
    for &(a, b) in pairs {
        obs[a as usize][b as usize] += 1.0;
    }
    let n = pairs.len() as f64;
    let r = params.rates();
    let absorb = options.tail == TailCell::Absorb;
    let mut cells = Vec::with_capacity(obs.len() * obs[0].len());
    for i in 0..=m1 {
        for j in 0..=m2 {
            let (hi1, s1) = if absorb && i == m1 {
                (None, "+")
            } else {
                (Some(i + 1), "")
            };
            let (hi2, s2) = if absorb && j == m2 {
                (None, "+")
            } else {
                (Some(j + 1), "")
            };
            let prob = rect(&r, i, hi1, j, hi2);
            cells.push(Cell {
                label: format!("({i}{s1},{j}{s2})"),
                observed: obs[i as usize][j as usize],
                expected: n * prob,
            });
        }
    }
    finish(cells, options)
}
