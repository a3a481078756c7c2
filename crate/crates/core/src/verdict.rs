//! Three-valued verdicts with witnesses.

use alloc::string::String;
use alloc::vec::Vec;

use crate::Point3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Status {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Satisfied => "satisfied",
            Status::Violated => "violated",
            Status::Inconclusive => "inconclusive",
        }
    }

    /// Combines two verdicts on sub-conditions of one condition: any
    /// violation wins, then any inconclusive.
    pub fn and(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Satisfied,
        }
    }
}

/// Evidence supporting a verdict: a note, supporting points (an orbit, a
/// record location) and the numbers the decision was made on.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Witness {
    pub note: String,
    pub points: Vec<[f64; 3]>,
    pub values: Vec<f64>,
}

impl Witness {
    pub fn note(note: impl Into<String>) -> Self {
        Witness {
            note: note.into(),
            ..Witness::default()
        }
    }

    pub fn at(mut self, p: &Point3) -> Self {
        self.points.push([p[0], p[1], p[2]]);
        self
    }

    pub fn with_values(mut self, values: &[f64]) -> Self {
        self.values.extend_from_slice(values);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.note.is_empty() && self.points.is_empty() && self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub status: Status,
    pub witness: Witness,
}

impl Verdict {
    pub fn satisfied(witness: Witness) -> Self {
        Verdict {
            status: Status::Satisfied,
            witness,
        }
    }

    pub fn violated(witness: Witness) -> Self {
        Verdict {
            status: Status::Violated,
            witness,
        }
    }

    pub fn inconclusive(witness: Witness) -> Self {
        Verdict {
            status: Status::Inconclusive,
            witness,
        }
    }

    /// Keeps the more severe of two verdicts (first one on ties).
    pub fn worst(self, other: Verdict) -> Verdict {
        let rank = |s: Status| match s {
            Status::Violated => 2,
            Status::Inconclusive => 1,
            Status::Satisfied => 0,
        };
        if rank(other.status) > rank(self.status) {
            other
        } else {
            self
        }
    }
}
