//! Score domain types shared by every evaluation stage.
//!
//! All quality judgments live on a 4-point scale along three decoupled
//! dimensions: Instruction Following (IF), Rendering Quality (RQ), and
//! Edit Exclusivity (EE). Human labels are integers in {1..4}
//! ([`OrdinalScore`]); model predictions are continuous values on [1, 4]
//! ([`SoftScore`]).

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::records::DataError;

/// The three decoupled quality dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Dimension {
    If,
    Rq,
    Ee,
}

impl Dimension {
    /// All three dimensions, in canonical reporting order.
    pub const ALL: [Dimension; 3] = [Dimension::If, Dimension::Rq, Dimension::Ee];

    /// Index into a three-slot per-dimension array.
    pub fn index(self) -> usize {
        match self {
            Dimension::If => 0,
            Dimension::Rq => 1,
            Dimension::Ee => 2,
        }
    }

    /// Short uppercase name, matching the on-disk JSON keys.
    pub fn key(self) -> &'static str {
        match self {
            Dimension::If => "IF",
            Dimension::Rq => "RQ",
            Dimension::Ee => "EE",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A discrete human label in {1, 2, 3, 4}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct OrdinalScore(u8);

impl OrdinalScore {
    pub fn new(value: u8) -> Result<Self, DataError> {
        if (1..=4).contains(&value) {
            Ok(OrdinalScore(value))
        } else {
            Err(DataError::ScoreOutOfRange {
                value: value as f64,
            })
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<u8> for OrdinalScore {
    type Error = DataError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        OrdinalScore::new(value)
    }
}

impl From<OrdinalScore> for u8 {
    fn from(score: OrdinalScore) -> u8 {
        score.0
    }
}

/// A continuous score on [1.0, 4.0].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SoftScore(f64);

impl SoftScore {
    pub fn new(value: f64) -> Result<Self, DataError> {
        if value.is_finite() && (1.0..=4.0).contains(&value) {
            Ok(SoftScore(value))
        } else {
            Err(DataError::ScoreOutOfRange { value })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SoftScore {
    type Error = DataError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        SoftScore::new(value)
    }
}

impl From<SoftScore> for f64 {
    fn from(score: SoftScore) -> f64 {
        score.0
    }
}

impl From<OrdinalScore> for SoftScore {
    fn from(score: OrdinalScore) -> SoftScore {
        SoftScore(score.as_f64())
    }
}

/// One score per dimension; homogeneous in the score type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet<S> {
    values: [S; 3],
}

/// Full human label triplet.
pub type LabelTriplet = Triplet<OrdinalScore>;
/// Full soft-score triplet.
pub type SoftTriplet = Triplet<SoftScore>;

impl<S: Copy> Triplet<S> {
    pub fn new(if_score: S, rq_score: S, ee_score: S) -> Self {
        Triplet {
            values: [if_score, rq_score, ee_score],
        }
    }

    pub fn get(&self, dim: Dimension) -> S {
        self.values[dim.index()]
    }

    pub fn if_score(&self) -> S {
        self.values[0]
    }

    pub fn rq_score(&self) -> S {
        self.values[1]
    }

    pub fn ee_score(&self) -> S {
        self.values[2]
    }

    pub fn map<T: Copy>(&self, f: impl Fn(S) -> T) -> Triplet<T> {
        Triplet {
            values: [f(self.values[0]), f(self.values[1]), f(self.values[2])],
        }
    }
}

impl LabelTriplet {
    /// Sum of the three labels, an integer in 3..=12. Used where ties on
    /// the overall score must be decided exactly (the mean is this sum
    /// over 3, so equal sums are exactly the ties).
    pub fn label_sum(&self) -> u32 {
        self.values.iter().map(|s| s.value() as u32).sum()
    }

    pub fn to_soft(&self) -> SoftTriplet {
        self.map(SoftScore::from)
    }
}

/// Overall human score for one sample: the arithmetic mean of IF, RQ, EE.
pub fn overall_human(labels: &LabelTriplet) -> SoftScore {
    let mean = labels.label_sum() as f64 / 3.0;
    SoftScore::new(mean).expect("mean of in-range labels stays in range")
}
