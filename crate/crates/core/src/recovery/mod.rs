//! Parameter recovery: greedy sparse coding, MUSIC, the TPD pipeline stages
//! and off-grid refinement.

pub mod angles;
pub mod distance;
pub mod methods;
pub mod music;
pub mod omp;
pub mod pairing;
pub mod refine;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

pub use methods::{Estimators, MethodConfig};

/// Registered estimator identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodTag {
    AdOmp,
    PdOmp,
    AdMusic,
    PdMusic,
    TpdOmp,
    TpdMusic,
}

impl MethodTag {
    pub const ALL: [MethodTag; 6] = [
        MethodTag::AdOmp,
        MethodTag::PdOmp,
        MethodTag::AdMusic,
        MethodTag::PdMusic,
        MethodTag::TpdOmp,
        MethodTag::TpdMusic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::AdOmp => "AD-OMP",
            MethodTag::PdOmp => "PD-OMP",
            MethodTag::AdMusic => "AD-MUSIC",
            MethodTag::PdMusic => "PD-MUSIC",
            MethodTag::TpdOmp => "TPD-OMP",
            MethodTag::TpdMusic => "TPD-MUSIC",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        MethodTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl TryFrom<String> for MethodTag {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<MethodTag> for String {
    fn from(t: MethodTag) -> String {
        t.as_str().to_string()
    }
}

/// One recovered scatterer. `r` is infinite for far-field estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub power: f64,
}

impl Estimate {
    pub fn inv_r(&self) -> f64 {
        if self.r.is_infinite() {
            0.0
        } else {
            1.0 / self.r
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    /// Sorted by descending power.
    pub entries: Vec<Estimate>,
    pub method: MethodTag,
    /// Candidate grid points examined by the search.
    pub search_space_size: usize,
    /// Non-fatal events (dropped atoms, incomplete pairings, ...).
    pub flags: Vec<String>,
}

impl EstimateSet {
    pub fn new(method: MethodTag, mut entries: Vec<Estimate>, search_space_size: usize) -> Self {
        sort_by_power(&mut entries);
        Self { entries, method, search_space_size, flags: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn sort_by_power(entries: &mut [Estimate]) {
    entries.sort_by(|a, b| b.power.total_cmp(&a.power));
}
