//! Bundled example datasets and CSV ingestion.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit_ml::BivariateDataset;

const FOOTBALL_CSV: &str = include_str!("../data/football.csv");
const NASAL_CSV: &str = include_str!("../data/nasal.csv");

/// Datasets shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinDataset {
    /// Serie A scores, Fiorentina (`x1`) against Juventus (`x2`), 1996 to 2011: 26 matches.
    Football,
    /// Nasal drainage severity (0 to 3) on days one and two for 30 patients.
    Nasal,
}

impl BuiltinDataset {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinDataset::Football => "football",
            BuiltinDataset::Nasal => "nasal",
        }
    }

    /// The CSV text exactly as shipped in `data/`.
    pub fn csv(&self) -> &'static str {
        match self {
            BuiltinDataset::Football => FOOTBALL_CSV,
            BuiltinDataset::Nasal => NASAL_CSV,
        }
    }

    pub fn load(&self) -> BivariateDataset {
        parse_csv(self.csv()).expect("bundled dataset parses")
    }
}

impl FromStr for BuiltinDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "football" => Ok(BuiltinDataset::Football),
            "nasal" => Ok(BuiltinDataset::Nasal),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset '{other}' (expected football or nasal)"
            ))),
        }
    }
}

pub fn football() -> BivariateDataset {
    BuiltinDataset::Football.load()
}

pub fn nasal() -> BivariateDataset {
    BuiltinDataset::Nasal.load()
}

/// Parses two comma-separated non-negative integer columns. A first line
/// that does not parse as numbers is taken as a header; blank lines are
/// skipped.
pub fn parse_csv(text: &str) -> Result<BivariateDataset> {
    let mut pairs = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let parsed: Vec<std::result::Result<u64, _>> =
            fields.iter().map(|f| f.parse::<u64>()).collect();
        if k == 0 && pairs.is_empty() && fields.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        match (&parsed[0], &parsed[1]) {
            (Ok(a), Ok(b)) => pairs.push((*a, *b)),
            _ => {
                let bad = if parsed[0].is_err() {
                    fields[0]
                } else {
                    fields[1]
                };
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("'{bad}' is not a non-negative integer"),
                });
            }
        }
    }
    BivariateDataset::new(pairs)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<BivariateDataset> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_csv(&text)
}

/// Writes pairs as CSV with an `x1,x2` header.
pub fn to_csv(data: &BivariateDataset) -> String {
    let mut s = String::from("x1,x2\n");
    for (a, b) in data.pairs() {
        s.push_str(&format!("{a},{b}\n"));
    }
    s
}
