use rand::Rng;
use serde::{Deserialize, Serialize};

use super::seesaw::{seesaw_chsh, SEESAW_MAX_ITERS, SEESAW_TOL};
use crate::corr::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::quantum::linalg::{bloch_observable, C64};
use crate::quantum::{
    maximally_entangled_state, observable_projectors, projective_qubit_instrument, simulate, ComplexMatrix,
    DensityMatrix, KrausInstrument, PartyProgram, Povm, SequentialStrategy,
};
use crate::rng::{gaussian, substream, unit_vector3, SeededRng};
use crate::witness::concatenated_chsh;

/// Largest witness value seen over a batch of random two-qubit strategies.
///
/// An empirical ceiling for the given `seed` and `n`, not a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub n: usize,
    pub seed: u64,
    pub max_value: f64,
    pub argmax: usize,
    pub strategy: SequentialStrategy,
}

/// Random pure two-qubit state, rank-1 projective step-1 instruments, and
/// independent random rank-1 projective step-2 effects for every history.
/// Strategy `i` is drawn from substream `i` of `seed`.
pub fn random_qubit_projective_strategy(seed: u64, i: u64) -> Result<SequentialStrategy> {
    let mut rng = substream(seed, i);
    let psi: Vec<C64> = (0..4)
        .map(|_| C64::new(gaussian(&mut rng), gaussian(&mut rng)))
        .collect();
    let state = DensityMatrix::pure(&psi)?;
    let alice = random_program(&mut rng)?;
    let bob = random_program(&mut rng)?;
    SequentialStrategy::new(state, alice, bob)
}

fn random_instrument(rng: &mut SeededRng) -> Result<KrausInstrument> {
    projective_qubit_instrument(&[unit_vector3(rng), unit_vector3(rng)])
}

fn random_program(rng: &mut SeededRng) -> Result<PartyProgram> {
    let first = random_instrument(rng)?;
    PartyProgram::from_fn(2, |_, _| Ok(first.clone()), |_| Ok(random_instrument(rng)?.to_povm()))
}

pub fn sample_qubit_projective_strategies(n: usize, seed: u64) -> Result<SamplingReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut best: Option<(usize, f64, SequentialStrategy)> = None;
    for i in 0..n {
        let s = random_qubit_projective_strategy(seed, i as u64)?;
        let v = concatenated_chsh(&simulate(&s)?, DEFAULT_TOL)?;
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((i, v, s));
        }
    }
    let (argmax, max_value, strategy) = best.expect("n >= 1");
    Ok(SamplingReport {
        n,
        seed,
        max_value,
        argmax,
        strategy,
    })
}

/// Two-qubit strategy on `|Φ⁺⟩` whose first step uses seesaw-optimized
/// projective observables. At step two each party measures the projector it
/// obtained at step one, so the conditional box is deterministic with
/// standard CHSH 2.
pub fn seesaw_tuned_qubit_strategy(seed: u64) -> Result<SequentialStrategy> {
    let rho = maximally_entangled_state(2)?;
    let opt = seesaw_chsh(&rho, [2, 2], seed, SEESAW_MAX_ITERS, SEESAW_TOL)?;
    let program = |obs: &[ComplexMatrix; 2], own: fn(&crate::corr::StepRecord) -> (u8, u8)| {
        let first = KrausInstrument::new(obs.iter().map(observable_projectors).collect())?;
        PartyProgram::from_fn(
            2,
            |_, _| Ok(first.clone()),
            |h| {
                let (outcome, setting) = own(&h.steps()[0]);
                let p = first.kraus(setting as usize, outcome as usize).clone();
                let rest = &ComplexMatrix::identity(2) - &p;
                Povm::new(vec![vec![p.clone(), rest.clone()], vec![p, rest]])
            },
        )
    };
    let alice = program(&opt.alice, |r| (r.a, r.x))?;
    let bob = program(&opt.bob, |r| (r.b, r.y))?;
    SequentialStrategy::new(rho, alice, bob)
}

/// Generic random strategy: mixed state of random rank, and for every step
/// and history independent random two-outcome instruments (or effects at the
/// last step) cut from random isometries. Drawn from substream `i` of `seed`.
pub fn random_strategy(seed: u64, i: u64, local_dims: [usize; 2], steps: usize) -> Result<SequentialStrategy> {
    if steps == 0 || local_dims.contains(&0) {
        return Err(Error::InvalidArgument(
            "steps and local dimensions must be positive".into(),
        ));
    }
    let mut rng = substream(seed, i);
    let n = local_dims[0] * local_dims[1];
    let rank = 1 + (rng.random_range(0..n));
    let g = ComplexMatrix::from_fn(n, rank, |_, _| C64::new(gaussian(&mut rng), gaussian(&mut rng)));
    let state = DensityMatrix::from_unnormalized(&(&g * &g.adjoint()))?;
    let alice = random_general_program(&mut rng, local_dims[0], steps)?;
    let bob = random_general_program(&mut rng, local_dims[1], steps)?;
    SequentialStrategy::new(state, alice, bob)
}

/// Two Kraus operators cut from a random isometry `V: C^d -> C^(2d)`, so
/// `K₀†K₀ + K₁†K₁ = V†V = I` holds to rounding.
fn random_kraus_pair(rng: &mut SeededRng, d: usize) -> Result<Vec<ComplexMatrix>> {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<C64> = (0..2 * d).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect();
        // Gram-Schmidt, applied twice for stability.
        for _ in 0..2 {
            for c in &cols {
                let overlap: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= overlap * ci;
                }
            }
        }
        let n = v.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.into_iter().map(|z| z / n).collect());
        }
    }
    Ok((0..2)
        .map(|a| ComplexMatrix::from_fn(d, d, |r, c| cols[c][a * d + r]))
        .collect())
}

fn random_general_program(rng: &mut SeededRng, d: usize, steps: usize) -> Result<PartyProgram> {
    let instrument = |rng: &mut SeededRng| -> Result<KrausInstrument> {
        KrausInstrument::new(vec![random_kraus_pair(rng, d)?, random_kraus_pair(rng, d)?])
    };
    let mut instruments = Vec::new();
    for l in 0..steps - 1 {
        let mut m = std::collections::BTreeMap::new();
        for h in crate::corr::History::all_of_length(l) {
            m.insert(h, instrument(rng)?);
        }
        instruments.push(m);
    }
    let mut effects = std::collections::BTreeMap::new();
    for h in crate::corr::History::all_of_length(steps - 1) {
        effects.insert(h, instrument(rng)?.to_povm());
    }
    PartyProgram::new(instruments, effects)
}

/// Projective qubit strategy with fixed Bloch vectors for both steps.
pub fn bloch_strategy(state: DensityMatrix, alice: [[f64; 3]; 4], bob: [[f64; 3]; 4]) -> Result<SequentialStrategy> {
    let program = |v: [[f64; 3]; 4]| -> Result<PartyProgram> {
        let first = projective_qubit_instrument(&v[..2])?;
        let second = Povm::new(vec![
            observable_projectors(&bloch_observable(v[2])),
            observable_projectors(&bloch_observable(v[3])),
        ])?;
        PartyProgram::history_independent(vec![first], second)
    };
    SequentialStrategy::new(state, program(alice)?, program(bob)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::bounds;

    #[test]
    fn sampling_is_reproducible_and_bounded() {
        let a = sample_qubit_projective_strategies(50, 11).unwrap();
        let b = sample_qubit_projective_strategies(50, 11).unwrap();
        assert_eq!(a.max_value, b.max_value);
        assert_eq!(a.argmax, b.argmax);
        assert!(a.max_value <= bounds(2).unwrap().qubit_projective + 1e-9);
        let single = sample_qubit_projective_strategies(1, 11).unwrap();
        assert_eq!(single.argmax, 0);
        assert!(sample_qubit_projective_strategies(0, 1).is_err());
    }

    #[test]
    fn tuned_strategy_saturates_qubit_bound() {
        let s = seesaw_tuned_qubit_strategy(3).unwrap();
        let v = concatenated_chsh(&simulate(&s).unwrap(), DEFAULT_TOL).unwrap();
        let q = bounds(2).unwrap().qubit_projective;
        assert!((v - q).abs() < 1e-6, "{v} vs {q}");
    }

    #[test]
    fn random_strategies_are_valid() {
        for i in 0..5 {
            let s = random_strategy(1, i, [2, 3], 2).unwrap();
            let c = simulate(&s).unwrap();
            assert!(c.validate(1e-12).ok);
            assert!(c.check_same_step_no_signaling(1e-12).ok);
            assert!(c.check_arrow_of_time(1e-12).ok);
        }
        assert_eq!(
            random_strategy(4, 2, [2, 2], 2).unwrap(),
            random_strategy(4, 2, [2, 2], 2).unwrap()
        );
    }

    #[test]
    fn fixed_bloch_strategy() {
        let z = [0.0, 0.0, 1.0];
        let s = bloch_strategy(maximally_entangled_state(2).unwrap(), [z; 4], [z; 4]).unwrap();
        let c = simulate(&s).unwrap();
        // Perfectly correlated Z outcomes: rescaled weight 3, conditional CHSH 2.
        assert!((concatenated_chsh(&c, DEFAULT_TOL).unwrap() - 6.0).abs() < 1e-12);
    }
}
