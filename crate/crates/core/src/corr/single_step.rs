use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-time-step behavior `p(ab|xy)` for two parties with binary settings
/// and outcomes.
///
/// Entries are stored at `a + 2b + 4x + 8y`. Outcome index `0` stands for the
/// value `+1`, index `1` for `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SingleStepBox {
    p: [f64; 16],
}

impl SingleStepBox {
    pub const LEN: usize = 16;

    #[inline]
    pub const fn index(a: usize, b: usize, x: usize, y: usize) -> usize {
        a + 2 * b + 4 * x + 8 * y
    }

    pub fn new(p: [f64; 16]) -> Self {
        Self { p }
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        let p: [f64; 16] = p.try_into().map_err(|_| Error::LengthMismatch {
            expected: Self::LEN,
            actual: p.len(),
        })?;
        Ok(Self { p })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut p = [0.0; 16];
        for (i, slot) in p.iter_mut().enumerate() {
            *slot = f(i & 1, (i >> 1) & 1, (i >> 2) & 1, (i >> 3) & 1);
        }
        Self { p }
    }

    pub fn uniform() -> Self {
        Self { p: [0.25; 16] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[Self::index(a, b, x, y)]
    }

    pub fn as_array(&self) -> &[f64; 16] {
        &self.p
    }

    /// Correlator `E_xy = Σ_ab (-1)^(a+b) p(ab|xy)`.
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        self.get(0, 0, x, y) - self.get(1, 0, x, y) - self.get(0, 1, x, y) + self.get(1, 1, x, y)
    }

    /// Alice's marginal `p(a|x, y)`.
    pub fn alice_marginal(&self, a: usize, x: usize, y: usize) -> f64 {
        self.get(a, 0, x, y) + self.get(a, 1, x, y)
    }

    /// Bob's marginal `p(b|x, y)`.
    pub fn bob_marginal(&self, b: usize, x: usize, y: usize) -> f64 {
        self.get(0, b, x, y) + self.get(1, b, x, y)
    }

    /// Largest deviation of a setting block's sum from one.
    pub fn normalization_residual(&self) -> f64 {
        (0..4)
            .map(|s| (self.p[4 * s..4 * s + 4].iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest violation of the two no-signaling conditions.
    pub fn signaling_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for v in 0..2 {
            for s in 0..2 {
                r = r.max((self.alice_marginal(v, s, 0) - self.alice_marginal(v, s, 1)).abs());
                r = r.max((self.bob_marginal(v, 0, s) - self.bob_marginal(v, 1, s)).abs());
            }
        }
        r
    }

    /// Convex combination `weight·self + (1 - weight)·other`.
    pub fn mix(&self, other: &Self, weight: f64) -> Self {
        Self::from_fn(|a, b, x, y| weight * self.get(a, b, x, y) + (1.0 - weight) * other.get(a, b, x, y))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for SingleStepBox {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_slice(&v)
    }
}

impl From<SingleStepBox> for Vec<f64> {
    fn from(b: SingleStepBox) -> Self {
        b.p.to_vec()
    }
}

impl std::ops::Index<usize> for SingleStepBox {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.p[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout() {
        let b = SingleStepBox::from_fn(|a, b, x, y| (a + 2 * b + 4 * x + 8 * y) as f64);
        for i in 0..16 {
            assert_eq!(b[i], i as f64);
        }
    }

    #[test]
    fn uniform_box_is_normalized_and_uncorrelated() {
        let u = SingleStepBox::uniform();
        assert_eq!(u.normalization_residual(), 0.0);
        assert_eq!(u.signaling_residual(), 0.0);
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(u.correlator(x, y), 0.0);
            }
        }
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(
            SingleStepBox::from_slice(&[0.0; 15]),
            Err(Error::LengthMismatch {
                expected: 16,
                actual: 15
            })
        ));
        assert!(serde_json::from_str::<SingleStepBox>("[1,2,3]").is_err());
    }
}
