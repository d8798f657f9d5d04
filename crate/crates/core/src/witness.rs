//! The concatenated CHSH Schmidt-number witness and its bound ladder.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corr::{Conditional, History, SequentialCorrelation, SingleStepBox, StepRecord};
use crate::error::{Error, Result};
use crate::quantum::{maximally_entangled_state, projective_qubit_instrument, PartyProgram, SequentialStrategy};

/// Slack used when bucketing a value against the bounds.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// Largest `L` for which [`canonical_strategy`] is built.
pub const CANONICAL_MAX_STEPS: usize = 3;

/// `Σ_xy (-1)^(xy) E_xy`.
pub fn standard_chsh(b: &SingleStepBox) -> f64 {
    b.correlator(0, 0) + b.correlator(0, 1) + b.correlator(1, 0) - b.correlator(1, 1)
}

/// `Σ_xy Σ_a p(a, b = a ⊕ xy | xy)`, i.e. the probability mass on outcomes
/// with `b = (-1)^(xy) a` in ±1 notation.
pub fn rescaled_chsh(b: &SingleStepBox) -> f64 {
    let mut v = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                v += b.get(a, a ^ (x & y), x, y);
            }
        }
    }
    v
}

/// `(1 + (-1)^(a+b+xy)/√2)/4`, the box of the CHSH-optimal qubit strategy.
pub fn tsirelson_box() -> SingleStepBox {
    SingleStepBox::from_fn(|a, b, x, y| {
        let sign = if (a ^ b ^ (x & y)) == 0 { 1.0 } else { -1.0 };
        (1.0 + sign / SQRT_2) / 4.0
    })
}

/// Two-step witness: rescaled CHSH weights at step one times standard CHSH
/// of the selected conditionals.
pub fn concatenated_chsh(corr: &SequentialCorrelation, tol: f64) -> Result<f64> {
    concatenated_chsh_l(corr, 2, tol)
}

/// `L`-step witness evaluated on the factorization of `corr`.
///
/// Steps `1..L-1` keep only outcomes with `b = a ⊕ xy`; the last step scores
/// the standard CHSH of the conditional box. Zero-probability histories add
/// nothing.
pub fn concatenated_chsh_l(corr: &SequentialCorrelation, l: usize, tol: f64) -> Result<f64> {
    require_steps(corr, l)?;
    let f = corr.factorize(tol)?;
    Ok(selected_sum(&f.first, &History::empty(), l, &f.conditionals))
}

fn selected_sum(b: &SingleStepBox, history: &History, l: usize, conditionals: &BTreeMap<History, Conditional>) -> f64 {
    if history.len() + 1 == l {
        return standard_chsh(b);
    }
    let mut v = 0.0;
    for x in 0..2u8 {
        for y in 0..2u8 {
            for a in 0..2u8 {
                let bb = a ^ (x & y);
                let w = b.get(a as usize, bb as usize, x as usize, y as usize);
                let next = history.extended(StepRecord { a, b: bb, x, y });
                if let Some(Conditional::Box(c)) = conditionals.get(&next) {
                    v += w * selected_sum(c, &next, l, conditionals);
                }
            }
        }
    }
    v
}

fn require_steps(corr: &SequentialCorrelation, l: usize) -> Result<()> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("the witness needs L >= 2, got {l}")));
    }
    corr.scenario().require_binary()?;
    if corr.scenario().steps() != l {
        return Err(Error::InvalidArgument(format!(
            "L = {l} but the tensor has {} steps",
            corr.scenario().steps()
        )));
    }
    Ok(())
}

/// Coefficients `c(o, s)` with `witness = Σ c(o,s) p(o|s)`:
/// `Π_{ℓ<L} [b_ℓ = a_ℓ ⊕ x_ℓ y_ℓ] · (-1)^(x_L y_L + a_L + b_L)`.
pub fn witness_coefficients(l: usize) -> Result<Vec<f64>> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("the witness needs L >= 2, got {l}")));
    }
    let per_step = 4usize.pow(l as u32);
    let mut c = vec![0.0; per_step * per_step];
    for s in 0..per_step {
        for o in 0..per_step {
            let mut coef = 1.0;
            for step in 0..l {
                let od = (o >> (2 * step)) & 3;
                let sd = (s >> (2 * step)) & 3;
                let (a, b, x, y) = (od & 1, od >> 1, sd & 1, sd >> 1);
                if step + 1 < l {
                    if b != a ^ (x & y) {
                        coef = 0.0;
                        break;
                    }
                } else if (a ^ b ^ (x & y)) == 1 {
                    coef = -1.0;
                }
            }
            c[o + per_step * s] = coef;
        }
    }
    Ok(c)
}

/// Witness as a linear functional on the full tensor. Agrees with
/// [`concatenated_chsh_l`] on arrow-of-time respecting tensors.
pub fn linear_witness(corr: &SequentialCorrelation) -> Result<f64> {
    let l = corr.scenario().steps();
    require_steps(corr, l)?;
    let c = witness_coefficients(l)?;
    Ok(c.iter().zip(corr.probabilities()).map(|(c, p)| c * p).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub local: f64,
    pub qubit_projective: f64,
    pub quantum: f64,
}

/// Local `2·3^(L-1)`, qubit-projective `2·3^(L-2)(√2+2)`, quantum
/// `2√2(√2+2)^(L-1)`.
pub fn bounds(l: usize) -> Result<Bounds> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("bounds need L >= 2, got {l}")));
    }
    let l = l as i32;
    Ok(Bounds {
        local: 2.0 * 3f64.powi(l - 1),
        qubit_projective: 2.0 * 3f64.powi(l - 2) * (SQRT_2 + 2.0),
        quantum: 2.0 * SQRT_2 * (SQRT_2 + 2.0).powi(l - 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessClass {
    Local,
    BeyondLocalWithinQubit,
    BeyondQubitWithinQuantum,
    SupraQuantum,
}

impl WitnessClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            WitnessClass::Local => "local",
            WitnessClass::BeyondLocalWithinQubit => "beyond-local-within-qubit",
            WitnessClass::BeyondQubitWithinQuantum => "beyond-qubit-within-quantum",
            WitnessClass::SupraQuantum => "supra-quantum",
        }
    }
}

impl fmt::Display for WitnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify(value: f64, l: usize) -> Result<WitnessClass> {
    let b = bounds(l)?;
    Ok(if value <= b.local + CLASSIFY_TOL {
        WitnessClass::Local
    } else if value <= b.qubit_projective + CLASSIFY_TOL {
        WitnessClass::BeyondLocalWithinQubit
    } else if value <= b.quantum + CLASSIFY_TOL {
        WitnessClass::BeyondQubitWithinQuantum
    } else {
        WitnessClass::SupraQuantum
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub value: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub bounds: Bounds,
    pub class: WitnessClass,
}

impl WitnessReport {
    pub fn from_value(value: f64, l: usize) -> Result<Self> {
        Ok(Self {
            value,
            l,
            bounds: bounds(l)?,
            class: classify(value, l)?,
        })
    }

    /// Evaluates the witness on a tensor whose step count is `L`.
    pub fn evaluate(corr: &SequentialCorrelation, tol: f64) -> Result<Self> {
        let l = corr.scenario().steps();
        Self::from_value(concatenated_chsh_l(corr, l, tol)?, l)
    }
}

/// Maximally entangled state of local dimension `2^L`; step `ℓ` measures the
/// CHSH-optimal observables on qubit `ℓ` (Alice `0, π/2`, Bob `±π/4` in the
/// x–z plane). Qubit 1 is the most significant bit of the local index.
pub fn canonical_strategy(l: usize) -> Result<SequentialStrategy> {
    if !(2..=CANONICAL_MAX_STEPS).contains(&l) {
        return Err(Error::Unsupported(format!(
            "canonical strategy is built for 2 <= L <= {CANONICAL_MAX_STEPS}, got {l}"
        )));
    }
    let d = 1usize << l;
    let xz = |t: f64| [t.sin(), 0.0, t.cos()];
    let program = |angles: [f64; 2]| -> Result<PartyProgram> {
        let qubit = projective_qubit_instrument(&[xz(angles[0]), xz(angles[1])])?;
        let lifted: Vec<_> = (0..l).map(|step| qubit.embed(1 << step, 1 << (l - 1 - step))).collect();
        let last = lifted[l - 1].to_povm();
        PartyProgram::history_independent(lifted[..l - 1].to_vec(), last)
    };
    SequentialStrategy::new(
        maximally_entangled_state(d)?,
        program([0.0, FRAC_PI_2])?,
        program([FRAC_PI_4, -FRAC_PI_4])?,
    )
}
