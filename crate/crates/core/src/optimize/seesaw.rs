use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::linalg::{hermitian_eig, hermitian_sign, C64};
use crate::quantum::{partial_trace, tensor_product, ComplexMatrix, DensityMatrix, Subsystem};
use crate::rng::{gaussian, seeded, SeededRng};

pub const SEESAW_MAX_ITERS: usize = 200;
pub const SEESAW_TOL: f64 = 1e-10;
/// Largest local dimension accepted by [`seesaw_chsh`].
pub const SEESAW_MAX_LOCAL_DIM: usize = 8;

/// Eigenvalues this close to zero are treated as zero when taking signs.
const SIGN_ZERO: f64 = 1e-12;

/// Result of a seesaw run: best CHSH value and the ±1 observables reaching
/// it, plus the objective after every half-step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeesawResult {
    pub value: f64,
    pub alice: [ComplexMatrix; 2],
    pub bob: [ComplexMatrix; 2],
    pub iterations: usize,
    pub seed: u64,
    pub trace: Vec<f64>,
}

/// `Σ_xy (-1)^(xy) Tr[ρ (A_x ⊗ B_y)]`.
pub fn chsh_expectation(state: &DensityMatrix, alice: &[ComplexMatrix; 2], bob: &[ComplexMatrix; 2]) -> f64 {
    let mut v = 0.0;
    for (x, a) in alice.iter().enumerate() {
        for (y, b) in bob.iter().enumerate() {
            let s = if x & y == 1 { -1.0 } else { 1.0 };
            v += s * tensor_product(a, b).trace_product(state.matrix()).re;
        }
    }
    v
}

/// Alternating maximization of the CHSH expression over ±1 observables.
///
/// Bob's observables start random (balanced spectrum). With Bob fixed,
/// Alice's best observable for setting `x` is the sign of
/// `M_x = Σ_y (-1)^(xy) Tr_B[ρ (I ⊗ B_y)]`; then the roles swap. Zero
/// eigenvalues map to `+1`. Stops once a full round gains less than `tol`.
pub fn seesaw_chsh(
    state: &DensityMatrix,
    dims: [usize; 2],
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<SeesawResult> {
    if dims[0] * dims[1] != state.dim() {
        return Err(Error::Dimension(format!(
            "state has dimension {}, local dimensions {dims:?}",
            state.dim()
        )));
    }
    if dims.iter().any(|&d| d == 0 || d > SEESAW_MAX_LOCAL_DIM) {
        return Err(Error::Unsupported(format!(
            "local dimensions must lie in 1..={SEESAW_MAX_LOCAL_DIM}, got {dims:?}"
        )));
    }
    let mut rng = seeded(seed);
    let mut bob = [
        random_observable(&mut rng, dims[1])?,
        random_observable(&mut rng, dims[1])?,
    ];
    let mut alice = best_response(state, dims, &bob, Subsystem::A)?;
    let mut trace = vec![chsh_expectation(state, &alice, &bob)];
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let before = *trace.last().expect("nonempty");
        bob = best_response(state, dims, &alice, Subsystem::B)?;
        trace.push(chsh_expectation(state, &alice, &bob));
        alice = best_response(state, dims, &bob, Subsystem::A)?;
        let after = chsh_expectation(state, &alice, &bob);
        trace.push(after);
        if after - before < tol {
            break;
        }
    }
    let value = *trace.last().expect("nonempty");
    Ok(SeesawResult {
        value,
        alice,
        bob,
        iterations,
        seed,
        trace,
    })
}

/// Optimal observables of `party` against the other party's `fixed` pair.
fn best_response(
    state: &DensityMatrix,
    dims: [usize; 2],
    fixed: &[ComplexMatrix; 2],
    party: Subsystem,
) -> Result<[ComplexMatrix; 2]> {
    let effective = |x: usize| -> Result<ComplexMatrix> {
        let mut m: Option<ComplexMatrix> = None;
        for (y, f) in fixed.iter().enumerate() {
            let s = if x & y == 1 { -1.0 } else { 1.0 };
            let (lift, traced) = match party {
                Subsystem::A => (tensor_product(&ComplexMatrix::identity(dims[0]), f), Subsystem::B),
                Subsystem::B => (tensor_product(f, &ComplexMatrix::identity(dims[1])), Subsystem::A),
            };
            let reduced = partial_trace(&(state.matrix() * &lift), dims, traced)?.scale_real(s);
            m = Some(match m {
                Some(acc) => &acc + &reduced,
                None => reduced,
            });
        }
        Ok(m.expect("two settings").hermitian_part())
    };
    Ok([
        hermitian_sign(&effective(0)?, SIGN_ZERO)?,
        hermitian_sign(&effective(1)?, SIGN_ZERO)?,
    ])
}

/// Random ±1 observable whose spectrum has `⌈d/2⌉` eigenvalues `+1`.
pub fn random_observable(rng: &mut SeededRng, d: usize) -> Result<ComplexMatrix> {
    let g = ComplexMatrix::from_fn(d, d, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let h = (&g + &g.adjoint()).scale_real(0.5);
    let eig = hermitian_eig(&h)?;
    let plus = d.div_ceil(2);
    let signs: Vec<f64> = (0..d).map(|i| if i < plus { 1.0 } else { -1.0 }).collect();
    let u = &eig.vectors;
    Ok(&(u * &ComplexMatrix::diagonal(&signs)) * &u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{maximally_entangled_state, werner_state};
    use std::f64::consts::SQRT_2;

    #[test]
    fn bell_state_reaches_tsirelson() {
        let rho = maximally_entangled_state(2).unwrap();
        for seed in 0..5 {
            let r = seesaw_chsh(&rho, [2, 2], seed, SEESAW_MAX_ITERS, SEESAW_TOL).unwrap();
            assert!((r.value - 2.0 * SQRT_2).abs() < 1e-6, "seed {seed}: {}", r.value);
            assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            let check = chsh_expectation(&rho, &r.alice, &r.bob);
            assert!((check - r.value).abs() < 1e-12);
        }
    }

    #[test]
    fn product_and_mixed_states() {
        // Balanced observables see nothing in white noise; the zero-eigenvalue
        // rule then moves to trivial observables, which score the local value.
        let mixed = DensityMatrix::maximally_mixed(4);
        let r = seesaw_chsh(&mixed, [2, 2], 1, SEESAW_MAX_ITERS, SEESAW_TOL).unwrap();
        assert!(r.trace[0].abs() < 1e-12);
        assert!((r.value - 2.0).abs() < 1e-12);
        let zero = DensityMatrix::maximally_mixed(1);
        let qubit = DensityMatrix::pure(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let product = qubit.tensor(&qubit).tensor(&zero);
        let r = seesaw_chsh(&product, [2, 2], 2, SEESAW_MAX_ITERS, SEESAW_TOL).unwrap();
        assert!(r.value <= 2.0 + 1e-9);
    }

    #[test]
    fn observables_square_to_identity() {
        let mut rng = seeded(4);
        for d in 1..=5 {
            let a = random_observable(&mut rng, d).unwrap();
            assert!((&a * &a).max_abs_diff(&ComplexMatrix::identity(d)) < 1e-10);
        }
    }

    #[test]
    fn higher_dimensional_states() {
        let rho = werner_state(3, 1.0).unwrap();
        let r = seesaw_chsh(&rho, [3, 3], 7, SEESAW_MAX_ITERS, SEESAW_TOL).unwrap();
        assert!(r.value <= 2.0 * SQRT_2 + 1e-9);
        assert!(seesaw_chsh(&rho, [3, 2], 7, 10, SEESAW_TOL).is_err());
    }
}
