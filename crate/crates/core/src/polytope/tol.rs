use serde::{Deserialize, Serialize};

use super::ExtremePointSpec;
use crate::corr::{Scenario, SequentialCorrelation};
use crate::error::{Error, Result};
use crate::rng::{dirichlet_uniform, seeded};
use rand::Rng;

pub const TOL_VERTEX_COUNT: usize = 4096;

/// Deterministic time-ordered local strategy for two steps.
///
/// Each party's code packs a step-1 response `r₁(s₁)` (2 bits) and a step-2
/// response `r₂(s₁, s₂)` (4 bits) as `r₁ + 4·r₂`, with bit `s₁` of `r₁` and
/// bit `s₁ + 2·s₂` of `r₂` holding the outcome. Responses depend on the
/// party's own settings only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TolVertex {
    pub alice: u8,
    pub bob: u8,
}

impl TolVertex {
    pub fn from_index(i: usize) -> Self {
        assert!(i < TOL_VERTEX_COUNT);
        Self {
            alice: (i / 64) as u8,
            bob: (i % 64) as u8,
        }
    }

    pub fn index(&self) -> usize {
        64 * self.alice as usize + self.bob as usize
    }

    fn respond(code: u8, s1: usize, s2: usize) -> (usize, usize) {
        let first = (code & 0b11) as usize;
        let second = (code >> 2) as usize;
        ((first >> s1) & 1, (second >> (s1 + 2 * s2)) & 1)
    }

    /// Flat tensor index of the unit entry in each of the 16 setting blocks.
    pub fn support(&self) -> [usize; 16] {
        let mut out = [0; 16];
        for (s, slot) in out.iter_mut().enumerate() {
            let (x1, y1, x2, y2) = (s & 1, (s >> 1) & 1, (s >> 2) & 1, (s >> 3) & 1);
            let (a1, a2) = Self::respond(self.alice, x1, x2);
            let (b1, b2) = Self::respond(self.bob, y1, y2);
            *slot = a1 + 2 * b1 + 4 * a2 + 8 * b2 + 16 * s;
        }
        out
    }

    pub fn to_correlation(&self) -> SequentialCorrelation {
        let mut p = vec![0.0; 256];
        for i in self.support() {
            p[i] = 1.0;
        }
        SequentialCorrelation::new(Scenario::default(), p).expect("256 entries")
    }
}

/// All 4096 deterministic time-ordered local tensors, by [`TolVertex::index`].
pub fn tol_vertices() -> Vec<SequentialCorrelation> {
    (0..TOL_VERTEX_COUNT)
        .map(|i| TolVertex::from_index(i).to_correlation())
        .collect()
}

fn mixture(parts: Vec<SequentialCorrelation>, weights: &[f64]) -> Result<SequentialCorrelation> {
    let refs: Vec<(f64, &SequentialCorrelation)> = weights.iter().copied().zip(parts.iter()).collect();
    SequentialCorrelation::mixture(&refs)
}

/// Dirichlet-uniform mixture of `n` random all-deterministic extreme points.
pub fn sample_q(seed: u64, n: usize) -> Result<SequentialCorrelation> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let parts = (0..n)
        .map(|_| super::compose_extreme_point(&ExtremePointSpec::random(&mut rng, true)))
        .collect::<Result<Vec<_>>>()?;
    let w = dirichlet_uniform(&mut rng, n);
    mixture(parts, &w)
}

/// Dirichlet-uniform mixture of `n` random time-ordered local vertices.
pub fn sample_tol(seed: u64, n: usize) -> Result<SequentialCorrelation> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let parts: Vec<_> = (0..n)
        .map(|_| TolVertex::from_index(rng.random_range(0..TOL_VERTEX_COUNT)).to_correlation())
        .collect();
    let w = dirichlet_uniform(&mut rng, n);
    mixture(parts, &w)
}
