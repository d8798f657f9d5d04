use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    binary_indices, History, Scenario, SequentialCorrelation, SingleStepBox, StepRecord, ZERO_HISTORY_THRESHOLD,
};
use crate::error::{Error, Result};

/// Normalization slack accepted for boxes handed to [`compose`].
const COMPOSE_NORM_TOL: f64 = 1e-9;

/// Box at a later step given a history, or a marker for histories that occur
/// with (numerically) zero probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conditional {
    Box(SingleStepBox),
    /// Serialized as `null`.
    ZeroHistory(()),
}

impl Conditional {
    pub const ZERO: Conditional = Conditional::ZeroHistory(());

    pub fn as_box(&self) -> Option<&SingleStepBox> {
        match self {
            Conditional::Box(b) => Some(b),
            Conditional::ZeroHistory(()) => None,
        }
    }

    pub fn is_zero_history(&self) -> bool {
        matches!(self, Conditional::ZeroHistory(()))
    }
}

/// First-step marginal plus the conditional box for every history of every
/// intermediate length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub first: SingleStepBox,
    pub conditionals: BTreeMap<History, Conditional>,
}

impl Factorization {
    pub fn compose(&self) -> Result<SequentialCorrelation> {
        compose(&self.first, &self.conditionals)
    }

    /// Number of time steps described.
    pub fn steps(&self) -> usize {
        1 + self.conditionals.keys().map(History::len).max().unwrap_or(0)
    }

    /// Largest no-signaling residual over the first box and every
    /// nonzero-history conditional.
    pub fn max_signaling_residual(&self) -> f64 {
        self.conditionals
            .values()
            .filter_map(Conditional::as_box)
            .map(SingleStepBox::signaling_residual)
            .fold(self.first.signaling_residual(), f64::max)
    }
}

impl SequentialCorrelation {
    /// `p(a₁b₁|x₁y₁)`, summing out all later steps.
    ///
    /// Errors when the arrow of time fails beyond `tol`, since the marginal
    /// would then depend on the later settings.
    pub fn first_step_marginal(&self, tol: f64) -> Result<SingleStepBox> {
        self.scenario.require_binary()?;
        self.require_arrow_of_time(tol)?;
        SingleStepBox::from_slice(&self.prefix_marginal(1))
    }

    /// Box at step `history.len() + 1` conditioned on `history`.
    pub fn conditional_box(&self, history: &History, tol: f64) -> Result<Conditional> {
        self.scenario.require_binary()?;
        let k = history.len();
        if k == 0 || k >= self.scenario.steps {
            return Err(Error::HistoryOutOfRange(format!(
                "history `{history}` has {k} step(s); a {}-step tensor conditions on 1..={} steps",
                self.scenario.steps,
                self.scenario.steps - 1
            )));
        }
        self.require_arrow_of_time(tol)?;
        let denom = self.prefix_marginal(k);
        let numer = self.prefix_marginal(k + 1);
        Ok(conditional_from_prefixes(history, &denom, &numer))
    }

    /// Splits the tensor into its first-step marginal and the conditional box
    /// of every history.
    pub fn factorize(&self, tol: f64) -> Result<Factorization> {
        self.scenario.require_binary()?;
        self.require_arrow_of_time(tol)?;
        let steps = self.scenario.steps;
        let prefixes: Vec<Vec<f64>> = (0..=steps).map(|k| self.prefix_marginal(k)).collect();
        let first = SingleStepBox::from_slice(&prefixes[1])?;
        let mut conditionals = BTreeMap::new();
        for k in 1..steps {
            for h in History::all_of_length(k) {
                let c = conditional_from_prefixes(&h, &prefixes[k], &prefixes[k + 1]);
                conditionals.insert(h, c);
            }
        }
        Ok(Factorization { first, conditionals })
    }

    fn require_arrow_of_time(&self, tol: f64) -> Result<()> {
        let aot = self.check_arrow_of_time(tol);
        if aot.ok {
            Ok(())
        } else {
            Err(Error::ArrowOfTime {
                residual: aot.max_residual,
                tol,
            })
        }
    }
}

fn conditional_from_prefixes(history: &History, denom: &[f64], numer: &[f64]) -> Conditional {
    let k = history.len();
    let (o_h, s_h) = binary_indices(history.steps());
    let weight = denom[o_h + 4usize.pow(k as u32) * s_h];
    if weight < ZERO_HISTORY_THRESHOLD {
        return Conditional::ZERO;
    }
    let stride_o = 4usize.pow(k as u32);
    let block = 4 * stride_o;
    Conditional::Box(SingleStepBox::from_fn(|a, b, x, y| {
        let o = o_h + stride_o * (a + 2 * b);
        let s = s_h + stride_o * (x + 2 * y);
        numer[o + block * s] / weight
    }))
}

/// Rebuilds `p = first(a₁b₁|x₁y₁) · Π cond_X(a_ℓ b_ℓ|x_ℓ y_ℓ)`.
///
/// The number of steps is one more than the longest history key. Histories
/// whose accumulated probability is below the zero-history threshold may be
/// missing or marked [`Conditional::ZeroHistory`]; they are filled with the
/// uniform box so every setting block stays normalized.
pub fn compose(first: &SingleStepBox, conditionals: &BTreeMap<History, Conditional>) -> Result<SequentialCorrelation> {
    let residual = first.normalization_residual();
    if residual > COMPOSE_NORM_TOL {
        return Err(Error::NotNormalized(residual));
    }
    for b in conditionals.values().filter_map(Conditional::as_box) {
        let residual = b.normalization_residual();
        if residual > COMPOSE_NORM_TOL {
            return Err(Error::NotNormalized(residual));
        }
    }
    let steps = 1 + conditionals.keys().map(History::len).max().unwrap_or(0);
    let scenario = Scenario::new(steps, 2, 2)?;
    let mut p = vec![0.0; scenario.len()];
    let uniform = SingleStepBox::uniform();
    let mut records = Vec::with_capacity(steps);
    fill(first, conditionals, &uniform, &mut records, 1.0, steps, &mut p)?;
    SequentialCorrelation::new(scenario, p)
}

fn fill(
    current: &SingleStepBox,
    conditionals: &BTreeMap<History, Conditional>,
    uniform: &SingleStepBox,
    records: &mut Vec<StepRecord>,
    weight: f64,
    steps: usize,
    p: &mut [f64],
) -> Result<()> {
    let block = 4usize.pow(steps as u32);
    for r in StepRecord::all() {
        let w = weight * current.get(r.a as usize, r.b as usize, r.x as usize, r.y as usize);
        records.push(r);
        if records.len() == steps {
            let (o, s) = binary_indices(records);
            p[o + block * s] = w;
        } else {
            let history = History::new(records.clone());
            let next = match conditionals.get(&history) {
                Some(Conditional::Box(b)) => b,
                Some(Conditional::ZeroHistory(())) | None if w < ZERO_HISTORY_THRESHOLD => uniform,
                Some(Conditional::ZeroHistory(())) => {
                    return Err(Error::ZeroHistoryOnSupport {
                        history: history.key(),
                        probability: w,
                    })
                }
                None => return Err(Error::MissingHistory(history.key())),
            };
            fill(next, conditionals, uniform, records, w, steps, p)?;
        }
        records.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::DEFAULT_TOL;

    fn deterministic(a: usize, b: usize) -> SingleStepBox {
        SingleStepBox::from_fn(|aa, bb, _, _| if aa == a && bb == b { 1.0 } else { 0.0 })
    }

    fn pr() -> SingleStepBox {
        SingleStepBox::from_fn(|a, b, x, y| if a ^ b == x & y { 0.5 } else { 0.0 })
    }

    fn all_histories(c: Conditional) -> BTreeMap<History, Conditional> {
        History::all_of_length(1).into_iter().map(|h| (h, c)).collect()
    }

    #[test]
    fn uniform_factors_compose_to_uniform_tensor() {
        let c = compose(
            &SingleStepBox::uniform(),
            &all_histories(Conditional::Box(SingleStepBox::uniform())),
        )
        .unwrap();
        assert_eq!(c, SequentialCorrelation::uniform(Scenario::default()));
    }

    #[test]
    fn product_box_marginal_and_conditionals() {
        let b1 = pr();
        let b2 = deterministic(1, 0);
        let c = compose(&b1, &all_histories(Conditional::Box(b2))).unwrap();
        assert_eq!(c.first_step_marginal(DEFAULT_TOL).unwrap(), b1);
        let h = History::single(0, 0, 0, 0).unwrap();
        assert_eq!(c.conditional_box(&h, DEFAULT_TOL).unwrap(), Conditional::Box(b2));
        // a ⊕ b = xy is violated for (1,0,0,0): zero-probability history.
        let h = History::single(1, 0, 0, 0).unwrap();
        assert!(c.conditional_box(&h, DEFAULT_TOL).unwrap().is_zero_history());
    }

    #[test]
    fn uniform_tensor_factorizes_uniformly() {
        let u = SequentialCorrelation::uniform(Scenario::default());
        let f = u.factorize(DEFAULT_TOL).unwrap();
        assert_eq!(f.first, SingleStepBox::uniform());
        assert_eq!(f.conditionals.len(), 16);
        for c in f.conditionals.values() {
            assert_eq!(*c, Conditional::Box(SingleStepBox::uniform()));
        }
        assert_eq!(f.compose().unwrap(), u);
    }

    #[test]
    fn zero_history_on_support_is_an_error() {
        let mut map = all_histories(Conditional::Box(SingleStepBox::uniform()));
        map.insert(History::single(0, 0, 0, 0).unwrap(), Conditional::ZERO);
        let err = compose(&SingleStepBox::uniform(), &map).unwrap_err();
        assert!(matches!(err, Error::ZeroHistoryOnSupport { .. }));

        // Missing history with positive weight.
        let mut map = all_histories(Conditional::Box(SingleStepBox::uniform()));
        map.remove(&History::single(0, 0, 0, 0).unwrap());
        assert!(matches!(
            compose(&SingleStepBox::uniform(), &map).unwrap_err(),
            Error::MissingHistory(_)
        ));
    }

    #[test]
    fn zero_history_off_support_is_accepted() {
        let first = deterministic(0, 0);
        let mut map = all_histories(Conditional::ZERO);
        for x in 0..2 {
            for y in 0..2 {
                map.insert(History::single(0, 0, x, y).unwrap(), Conditional::Box(pr()));
            }
        }
        let c = compose(&first, &map).unwrap();
        assert!(c.validate(DEFAULT_TOL).ok);
        let back = c.factorize(DEFAULT_TOL).unwrap();
        assert_eq!(back.first, first);
        assert_eq!(
            back.conditionals[&History::single(0, 0, 1, 1).unwrap()],
            Conditional::Box(pr())
        );
        assert!(back.conditionals[&History::single(1, 0, 1, 1).unwrap()].is_zero_history());
    }

    #[test]
    fn marginal_rejects_aot_violation() {
        let mut p = vec![0.0; 256];
        for s in 0..16 {
            p[((s >> 2) & 1) + 16 * s] = 1.0;
        }
        let c = SequentialCorrelation::new(Scenario::default(), p).unwrap();
        assert!(matches!(
            c.first_step_marginal(DEFAULT_TOL),
            Err(Error::ArrowOfTime { .. })
        ));
    }

    #[test]
    fn conditional_rejects_bad_history_length() {
        let u = SequentialCorrelation::uniform(Scenario::default());
        assert!(u.conditional_box(&History::empty(), DEFAULT_TOL).is_err());
        let h: History = "0,0,0,0;0,0,0,0".parse().unwrap();
        assert!(u.conditional_box(&h, DEFAULT_TOL).is_err());
    }

    #[test]
    fn three_step_round_trip() {
        let sc = Scenario::binary(3);
        let u = SequentialCorrelation::uniform(sc);
        let f = u.factorize(DEFAULT_TOL).unwrap();
        assert_eq!(f.conditionals.len(), 16 + 256);
        assert_eq!(f.steps(), 3);
        assert!(f.compose().unwrap().max_abs_diff(&u) < 1e-15);
    }

    #[test]
    fn conditional_json_uses_null_for_zero_history() {
        assert_eq!(serde_json::to_string(&Conditional::ZERO).unwrap(), "null");
        let c: Conditional = serde_json::from_str("null").unwrap();
        assert!(c.is_zero_history());
    }
}
