use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcomes and settings of both parties at one time step (binary indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepRecord {
    pub a: u8,
    pub b: u8,
    pub x: u8,
    pub y: u8,
}

impl StepRecord {
    pub fn new(a: u8, b: u8, x: u8, y: u8) -> Result<Self> {
        let r = Self { a, b, x, y };
        if [a, b, x, y].iter().any(|&v| v > 1) {
            return Err(Error::HistoryOutOfRange(r.to_string()));
        }
        Ok(r)
    }

    /// All 16 records, ordered by `a + 2b + 4x + 8y`.
    pub fn all() -> impl Iterator<Item = StepRecord> {
        (0u8..16).map(|i| StepRecord {
            a: i & 1,
            b: (i >> 1) & 1,
            x: (i >> 2) & 1,
            y: (i >> 3) & 1,
        })
    }

    /// Position of this record's outcome pair inside a step (`a + 2b`).
    #[inline]
    pub fn outcome_digit(&self) -> usize {
        self.a as usize + 2 * self.b as usize
    }

    /// Position of this record's setting pair inside a step (`x + 2y`).
    #[inline]
    pub fn setting_digit(&self) -> usize {
        self.x as usize + 2 * self.y as usize
    }
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.a, self.b, self.x, self.y)
    }
}

impl FromStr for StepRecord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<u8> = s
            .split(',')
            .map(|t| t.trim().parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("bad history record `{s}`")))?;
        match bits.as_slice() {
            &[a, b, x, y] => StepRecord::new(a, b, x, y),
            _ => Err(Error::Parse(format!("history record `{s}` needs four bits"))),
        }
    }
}

/// Conditioning record of all earlier steps, `X = (a₁,b₁,x₁,y₁)` for two
/// steps and its step-by-step extension for longer sequences.
///
/// The textual key is the comma-joined bits of each step, with steps
/// separated by `;` (e.g. `"0,1,1,0"` or `"0,1,1,0;1,1,0,0"`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct History(Vec<StepRecord>);

impl History {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(steps: Vec<StepRecord>) -> Self {
        Self(steps)
    }

    pub fn single(a: u8, b: u8, x: u8, y: u8) -> Result<Self> {
        Ok(Self(vec![StepRecord::new(a, b, x, y)?]))
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extended(&self, next: StepRecord) -> Self {
        let mut v = self.0.clone();
        v.push(next);
        Self(v)
    }

    /// Every history of exactly `len` steps, in key order.
    pub fn all_of_length(len: usize) -> Vec<History> {
        let mut out = vec![History::empty()];
        for _ in 0..len {
            out = out
                .iter()
                .flat_map(|h| StepRecord::all().map(move |r| h.extended(r)))
                .collect();
        }
        out.sort();
        out
    }

    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for History {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Ok(History::empty());
        }
        s.split(';').map(str::parse).collect::<Result<Vec<_>>>().map(History)
    }
}

impl Serialize for History {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for History {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_round_trip() {
        let h: History = "0,1,1,0;1,1,0,0".parse().unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.key(), "0,1,1,0;1,1,0,0");
        assert_eq!("".parse::<History>().unwrap(), History::empty());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!("0,2,0,0".parse::<History>().is_err());
        assert!("0,1,0".parse::<History>().is_err());
        assert!(StepRecord::new(0, 0, 3, 0).is_err());
    }

    #[test]
    fn enumerates_histories() {
        assert_eq!(History::all_of_length(0).len(), 1);
        assert_eq!(History::all_of_length(1).len(), 16);
        assert_eq!(History::all_of_length(2).len(), 256);
    }
}
