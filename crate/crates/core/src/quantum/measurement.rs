use serde::{Deserialize, Serialize};

use super::linalg::{bloch_observable, hermitian_eig, tensor_product, ComplexMatrix};
use super::state::DensityMatrix;
use crate::error::{Error, Result};

/// Slack for completeness relations and positivity of effects.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Kraus operators `K_{a|x}` indexed `[setting][outcome]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct KrausInstrument {
    ops: Vec<Vec<ComplexMatrix>>,
}

impl KrausInstrument {
    pub fn new(ops: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let d = dimension_of(&ops)?;
        let identity = ComplexMatrix::identity(d);
        for (x, outcomes) in ops.iter().enumerate() {
            let sum = outcomes
                .iter()
                .map(|k| &k.adjoint() * k)
                .fold(ComplexMatrix::zeros(d, d), |acc, e| &acc + &e);
            let dev = sum.max_abs_diff(&identity);
            if dev > COMPLETENESS_TOL {
                return Err(Error::InvalidQuantum(format!(
                    "Kraus operators of setting {x} are incomplete (deviation {dev:e})"
                )));
            }
        }
        Ok(Self { ops })
    }

    pub fn dim(&self) -> usize {
        self.ops[0][0].rows()
    }

    pub fn settings(&self) -> usize {
        self.ops.len()
    }

    pub fn outcomes(&self) -> usize {
        self.ops[0].len()
    }

    pub fn kraus(&self, setting: usize, outcome: usize) -> &ComplexMatrix {
        &self.ops[setting][outcome]
    }

    /// Lifts every operator to `I_left ⊗ K ⊗ I_right`.
    pub fn embed(&self, left: usize, right: usize) -> Self {
        let (l, r) = (ComplexMatrix::identity(left), ComplexMatrix::identity(right));
        Self {
            ops: self
                .ops
                .iter()
                .map(|o| o.iter().map(|k| tensor_product(&tensor_product(&l, k), &r)).collect())
                .collect(),
        }
    }

    /// Effects `K†K` of the instrument.
    pub fn to_povm(&self) -> Povm {
        Povm {
            effects: self
                .ops
                .iter()
                .map(|o| o.iter().map(|k| &k.adjoint() * k).collect())
                .collect(),
        }
    }
}

impl<'de> Deserialize<'de> for KrausInstrument {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ops = Vec::<Vec<ComplexMatrix>>::deserialize(deserializer)?;
        KrausInstrument::new(ops).map_err(serde::de::Error::custom)
    }
}

/// Effects `E_{a|x}` indexed `[setting][outcome]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Povm {
    effects: Vec<Vec<ComplexMatrix>>,
}

impl Povm {
    pub fn new(effects: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let d = dimension_of(&effects)?;
        let identity = ComplexMatrix::identity(d);
        for (x, outcomes) in effects.iter().enumerate() {
            for (a, e) in outcomes.iter().enumerate() {
                let dev = e.hermiticity_deviation();
                if dev > COMPLETENESS_TOL {
                    return Err(Error::InvalidQuantum(format!(
                        "effect {a}|{x} is not Hermitian ({dev:e})"
                    )));
                }
                let min = hermitian_eig(e)?.values.last().copied().unwrap_or(0.0);
                if min < -COMPLETENESS_TOL {
                    return Err(Error::InvalidQuantum(format!("effect {a}|{x} has eigenvalue {min:e}")));
                }
            }
            let sum = outcomes.iter().fold(ComplexMatrix::zeros(d, d), |acc, e| &acc + e);
            let dev = sum.max_abs_diff(&identity);
            if dev > COMPLETENESS_TOL {
                return Err(Error::InvalidQuantum(format!(
                    "effects of setting {x} do not sum to identity (deviation {dev:e})"
                )));
            }
        }
        Ok(Self { effects })
    }

    /// Two-outcome POVM `{(I + A)/2, (I - A)/2}` per setting from ±1 observables.
    pub fn from_observables(observables: &[ComplexMatrix]) -> Result<Self> {
        let effects = observables
            .iter()
            .map(|o| {
                let id = ComplexMatrix::identity(o.rows());
                vec![(&id + o).scale_real(0.5), (&id - o).scale_real(0.5)]
            })
            .collect();
        Self::new(effects)
    }

    pub fn dim(&self) -> usize {
        self.effects[0][0].rows()
    }

    pub fn settings(&self) -> usize {
        self.effects.len()
    }

    pub fn outcomes(&self) -> usize {
        self.effects[0].len()
    }

    pub fn effect(&self, setting: usize, outcome: usize) -> &ComplexMatrix {
        &self.effects[setting][outcome]
    }

    pub fn embed(&self, left: usize, right: usize) -> Self {
        let (l, r) = (ComplexMatrix::identity(left), ComplexMatrix::identity(right));
        Self {
            effects: self
                .effects
                .iter()
                .map(|o| o.iter().map(|k| tensor_product(&tensor_product(&l, k), &r)).collect())
                .collect(),
        }
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let effects = Vec::<Vec<ComplexMatrix>>::deserialize(deserializer)?;
        Povm::new(effects).map_err(serde::de::Error::custom)
    }
}

fn dimension_of(ops: &[Vec<ComplexMatrix>]) -> Result<usize> {
    let first = ops
        .first()
        .and_then(|o| o.first())
        .ok_or_else(|| Error::InvalidQuantum("measurement needs at least one setting and one outcome".into()))?;
    let d = first.rows();
    let outcomes = ops[0].len();
    for o in ops {
        if o.len() != outcomes {
            return Err(Error::Dimension("settings have different outcome counts".into()));
        }
        if o.iter().any(|k| k.rows() != d || k.cols() != d) {
            return Err(Error::Dimension(format!("all operators must be {d}x{d}")));
        }
    }
    Ok(d)
}

/// Rank-one projectors onto the `±n̂·σ` eigenstates, one setting per Bloch
/// vector. Outcome `0` is the `+1` eigenstate.
pub fn projective_qubit_instrument(bloch: &[[f64; 3]]) -> Result<KrausInstrument> {
    let ops = bloch
        .iter()
        .map(|n| {
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!("Bloch vector {n:?} has norm {norm}")));
            }
            Ok(observable_projectors(&bloch_observable(*n)))
        })
        .collect::<Result<Vec<_>>>()?;
    KrausInstrument::new(ops)
}

/// Projectors `(I ± A)/2` of a ±1 observable.
pub fn observable_projectors(a: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let id = ComplexMatrix::identity(a.rows());
    vec![(&id + a).scale_real(0.5), (&id - a).scale_real(0.5)]
}

/// Two-outcome filter `{P, I - P}`; outcome `0` means the filter passed.
/// The same filter is used for each of `settings` settings.
pub fn local_filter_instrument(projector: &ComplexMatrix, d: usize, settings: usize) -> Result<KrausInstrument> {
    if projector.rows() != d || projector.cols() != d {
        return Err(Error::Dimension(format!(
            "filter is {}x{}, expected {d}x{d}",
            projector.rows(),
            projector.cols()
        )));
    }
    let dev = (&(projector * projector) - projector)
        .frobenius_norm()
        .max(projector.hermiticity_deviation());
    if dev > COMPLETENESS_TOL {
        return Err(Error::InvalidQuantum(format!(
            "filter is not a projector (deviation {dev:e})"
        )));
    }
    let complement = &ComplexMatrix::identity(d) - projector;
    KrausInstrument::new(vec![vec![projector.clone(), complement]; settings])
}

/// State after outcome `(K, L)`, or `None` when that outcome has
/// probability below the zero-history threshold.
pub fn conditional_post_state(
    state: &DensityMatrix,
    kraus_a: &ComplexMatrix,
    kraus_b: &ComplexMatrix,
) -> Result<Option<DensityMatrix>> {
    let k = tensor_product(kraus_a, kraus_b);
    if k.cols() != state.dim() {
        return Err(Error::Dimension(format!(
            "Kraus product acts on {} dimensions, state has {}",
            k.cols(),
            state.dim()
        )));
    }
    let post = k.sandwich(state.matrix())?;
    if post.trace().re < crate::corr::ZERO_HISTORY_THRESHOLD {
        return Ok(None);
    }
    DensityMatrix::from_unnormalized(&post).map(Some)
}
