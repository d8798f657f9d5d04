use serde::{Deserialize, Serialize};

use super::seesaw::{seesaw_chsh, SEESAW_MAX_ITERS, SEESAW_TOL};
use crate::corr::{Conditional, History, SingleStepBox, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::polytope::{chsh_values, is_local_box, membership_q, MembershipVerdict};
use crate::quantum::{
    conditional_post_state, local_filter_instrument, observable_projectors, simulate, werner_state, ComplexMatrix,
    DensityMatrix, PartyProgram, Povm, SequentialStrategy,
};
use crate::witness::standard_chsh;

/// Filter-then-test run on a Werner state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenNonlocalityReport {
    pub d: usize,
    pub mixing: f64,
    pub seed: u64,
    /// Largest of the eight CHSH values of the first-step box.
    pub first_step_max_chsh: f64,
    pub first_step_local: MembershipVerdict,
    /// Probability that both filters pass.
    pub pass_probability: f64,
    /// Standard CHSH of the step-2 box after both filters passed.
    pub post_filter_chsh: f64,
    pub post_filter_local: MembershipVerdict,
    /// Verdict for the whole two-step tensor.
    pub sequential_local: MembershipVerdict,
    pub seesaw_iterations: usize,
}

/// Werner mixing at which the cited local model still covers projective
/// measurements, `(d - 1)/d`.
pub fn default_mixing(d: usize) -> f64 {
    (d as f64 - 1.0) / d as f64
}

/// Two-step sequence on `werner_state(d, mixing)`.
///
/// Step one is a local filter `{P, I - P}` with `P` the projector onto the
/// first two basis states, applied for both settings (so the first-step box
/// carries no setting dependence). After both filters pass, step two
/// measures seesaw-optimized ±1 observables on the filtered two-qubit block,
/// extended by `+1` on the complement. Other histories measure trivially.
pub fn hidden_nonlocality_strategy(d: usize, mixing: f64, seed: u64) -> Result<(SequentialStrategy, usize)> {
    if !(2..=8).contains(&d) {
        return Err(Error::Unsupported(format!("demo supports 2 <= d <= 8, got {d}")));
    }
    let rho = werner_state(d, mixing)?;
    let mut diag = vec![0.0; d];
    diag[0] = 1.0;
    diag[1] = 1.0;
    let p = ComplexMatrix::diagonal(&diag);
    let filter = local_filter_instrument(&p, d, 2)?;
    let post = conditional_post_state(&rho, filter.kraus(0, 0), filter.kraus(0, 0))?
        .ok_or_else(|| Error::InvalidArgument("filters never pass on this state".into()))?;
    let block = DensityMatrix::new(ComplexMatrix::from_fn(4, 4, |r, c| {
        post.matrix()[((r >> 1) * d + (r & 1), (c >> 1) * d + (c & 1))]
    }))?;
    let opt = seesaw_chsh(&block, [2, 2], seed, SEESAW_MAX_ITERS, SEESAW_TOL)?;
    let lift = |a: &ComplexMatrix| {
        ComplexMatrix::from_fn(d, d, |r, c| {
            if r < 2 && c < 2 {
                a[(r, c)]
            } else if r == c {
                crate::quantum::linalg::ONE
            } else {
                crate::quantum::linalg::ZERO
            }
        })
    };
    let trivial = Povm::new(vec![vec![ComplexMatrix::identity(d), ComplexMatrix::zeros(d, d)]; 2])?;
    let program = |obs: &[ComplexMatrix; 2], passed: fn(&History) -> bool| -> Result<PartyProgram> {
        let tuned = Povm::new(obs.iter().map(|o| observable_projectors(&lift(o))).collect())?;
        PartyProgram::from_fn(
            2,
            |_, _| Ok(filter.clone()),
            |h| Ok(if passed(h) { tuned.clone() } else { trivial.clone() }),
        )
    };
    let both_passed = |h: &History| {
        let r = h.steps()[0];
        r.a == 0 && r.b == 0
    };
    let strategy = SequentialStrategy::new(rho, program(&opt.alice, both_passed)?, program(&opt.bob, both_passed)?)?;
    Ok((strategy, opt.iterations))
}

pub fn hidden_nonlocality_demo(d: usize, mixing: f64, seed: u64) -> Result<HiddenNonlocalityReport> {
    let (strategy, seesaw_iterations) = hidden_nonlocality_strategy(d, mixing, seed)?;
    let corr = simulate(&strategy)?;
    let first: SingleStepBox = corr.first_step_marginal(DEFAULT_TOL)?;
    let passed = History::single(0, 0, 0, 0)?;
    let cond = match corr.conditional_box(&passed, DEFAULT_TOL)? {
        Conditional::Box(b) => b,
        Conditional::ZeroHistory(()) => {
            return Err(Error::InvalidArgument("filters pass with zero probability".into()));
        }
    };
    Ok(HiddenNonlocalityReport {
        d,
        mixing,
        seed,
        first_step_max_chsh: chsh_values(&first).into_iter().fold(f64::NEG_INFINITY, f64::max),
        first_step_local: is_local_box(&first, DEFAULT_TOL)?,
        pass_probability: first.get(0, 0, 0, 0),
        post_filter_chsh: standard_chsh(&cond),
        post_filter_local: is_local_box(&cond, DEFAULT_TOL)?,
        sequential_local: membership_q(&corr, DEFAULT_TOL),
        seesaw_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn werner_five_activates() {
        let r = hidden_nonlocality_demo(5, default_mixing(5), 1).unwrap();
        assert!(r.first_step_local.member);
        assert!(r.first_step_max_chsh <= 2.0 + 1e-12);
        // Filtered state is a singlet with visibility 5/7.
        assert!(
            (r.post_filter_chsh - 2.0 * SQRT_2 * 5.0 / 7.0).abs() < 1e-6,
            "{}",
            r.post_filter_chsh
        );
        assert!(!r.post_filter_local.member);
        assert!(!r.sequential_local.member);
        assert!(r.sequential_local.violated.as_deref().unwrap().contains("0,0,"));
    }

    #[test]
    fn pure_antisymmetric_state_filters_to_singlet() {
        let r = hidden_nonlocality_demo(5, 1.0, 2).unwrap();
        assert!((r.post_filter_chsh - 2.0 * SQRT_2).abs() < 1e-6);
        // P ⊗ P keeps 1 of the 10 antisymmetric dimensions.
        assert!((r.pass_probability - 0.1).abs() < 1e-12);
    }

    #[test]
    fn four_dimensional_filter_gives_no_violation_at_default_mixing() {
        let r = hidden_nonlocality_demo(4, default_mixing(4), 3).unwrap();
        assert!(r.post_filter_chsh <= 2.0);
        assert!(hidden_nonlocality_demo(9, 0.5, 0).is_err());
    }
}
