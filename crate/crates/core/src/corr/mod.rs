//! Sequential correlation tensors `p(a₁…a_L b₁…b_L | x₁…x_L y₁…y_L)` and the
//! linear constraints that carve out the spatio-temporal polytope: positivity,
//! normalization, arrow of time, and no-signaling between the parties within
//! each time step.
//!
//! Layout: the flat index is `outcome_index + (O·O)^L · setting_index`, where
//! step `ℓ` contributes `(a_ℓ + O·b_ℓ)·(O·O)^(ℓ-1)` to the outcome index and
//! `(x_ℓ + S·y_ℓ)·(S·S)^(ℓ-1)` to the setting index. For the default scenario
//! this is `a₁ + 2b₁ + 4a₂ + 8b₂ + 16·(x₁ + 2y₁ + 4x₂ + 8y₂)`.

mod factor;
mod history;
mod single_step;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use factor::{compose, Conditional, Factorization};
pub use history::{History, StepRecord};
pub use single_step::SingleStepBox;

/// Default user-facing tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Histories whose probability falls below this value carry no conditional.
pub const ZERO_HISTORY_THRESHOLD: f64 = 1e-12;

/// Number of parties. Fixed.
pub const PARTIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawScenario", into = "RawScenario")]
pub struct Scenario {
    steps: usize,
    settings: usize,
    outcomes: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    steps: usize,
    settings: usize,
    outcomes: usize,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(r: RawScenario) -> Result<Self> {
        Scenario::new(r.steps, r.settings, r.outcomes)
    }
}

impl From<Scenario> for RawScenario {
    fn from(s: Scenario) -> Self {
        RawScenario {
            steps: s.steps,
            settings: s.settings,
            outcomes: s.outcomes,
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::binary(2)
    }
}

impl Scenario {
    pub fn new(steps: usize, settings: usize, outcomes: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidScenario("at least one step required".into()));
        }
        if settings < 2 || outcomes < 2 {
            return Err(Error::InvalidScenario(format!(
                "need at least two settings and two outcomes (got S={settings}, O={outcomes})"
            )));
        }
        let s = Self {
            steps,
            settings,
            outcomes,
        };
        s.len_checked()
            .ok_or_else(|| Error::InvalidScenario("tensor size overflows".into()))?;
        Ok(s)
    }

    /// Two settings and two outcomes per step.
    pub fn binary(steps: usize) -> Self {
        assert!((1..=8).contains(&steps), "binary scenario supports 1..=8 steps");
        Self {
            steps,
            settings: 2,
            outcomes: 2,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn parties(&self) -> usize {
        PARTIES
    }

    pub fn is_binary(&self) -> bool {
        self.settings == 2 && self.outcomes == 2
    }

    /// Number of joint outcome strings, `(O·O)^L`.
    pub fn outcome_count(&self) -> usize {
        (self.outcomes * self.outcomes).pow(self.steps as u32)
    }

    /// Number of joint setting strings, `(S·S)^L`.
    pub fn setting_count(&self) -> usize {
        (self.settings * self.settings).pow(self.steps as u32)
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.outcome_count() * self.setting_count()
    }

    fn len_checked(&self) -> Option<usize> {
        let oo = (self.outcomes * self.outcomes).checked_pow(self.steps as u32)?;
        let ss = (self.settings * self.settings).checked_pow(self.steps as u32)?;
        let n = oo.checked_mul(ss)?;
        (n <= 1 << 26).then_some(n)
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "operation needs two settings and two outcomes per step (got S={}, O={})",
                self.settings, self.outcomes
            )))
        }
    }
}

/// Result of the positivity and normalization check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    /// Magnitude of the most negative entry (0 when all entries are nonnegative).
    pub max_negativity: f64,
    /// Largest deviation of a setting block's sum from one.
    pub max_normalization_residual: f64,
}

/// Result of checking a family of linear equality constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub ok: bool,
    pub max_residual: f64,
    /// The constraint family attaining `max_residual`.
    pub worst: Option<String>,
}

/// A family of marginal-independence constraints: summing the masked outcome
/// digits must give a value independent of the masked setting digits.
///
/// Digit `2ℓ` is Alice's slot at step `ℓ` (0-based), `2ℓ + 1` Bob's.
#[derive(Debug, Clone)]
pub(crate) struct ConstraintFamily {
    pub name: String,
    pub outcome_mask: u64,
    pub setting_mask: u64,
}

/// Digit masks for all slots at steps `>= from` (0-based).
fn later_mask(steps: usize, from: usize) -> u64 {
    (from..steps).fold(0, |m, l| m | (0b11 << (2 * l)))
}

impl ConstraintFamily {
    /// Same-step no-signaling families for every step and both directions.
    pub fn no_signaling(steps: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for l in 0..steps {
            let later = later_mask(steps, l + 1);
            let alice = 1u64 << (2 * l);
            let bob = 1u64 << (2 * l + 1);
            out.push(Self {
                name: format!("step {}: Bob's marginal independent of Alice's setting", l + 1),
                outcome_mask: alice | later,
                setting_mask: alice | later,
            });
            out.push(Self {
                name: format!("step {}: Alice's marginal independent of Bob's setting", l + 1),
                outcome_mask: bob | later,
                setting_mask: bob | later,
            });
            if l > 0 {
                out.push(Self {
                    name: format!("step {}: history marginal independent of step settings", l + 1),
                    outcome_mask: alice | bob | later,
                    setting_mask: alice | bob | later,
                });
            }
        }
        out
    }

    /// Arrow-of-time families: every prefix marginal independent of later settings.
    pub fn arrow_of_time(steps: usize) -> Vec<Self> {
        (1..steps)
            .map(|k| Self {
                name: format!("first {k} step(s) independent of later settings"),
                outcome_mask: later_mask(steps, k),
                setting_mask: later_mask(steps, k),
            })
            .collect()
    }
}

/// Dense sequential correlation tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCorrelation", into = "RawCorrelation")]
pub struct SequentialCorrelation {
    scenario: Scenario,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCorrelation {
    scenario: Scenario,
    p: Vec<f64>,
}

impl TryFrom<RawCorrelation> for SequentialCorrelation {
    type Error = Error;

    fn try_from(r: RawCorrelation) -> Result<Self> {
        SequentialCorrelation::new(r.scenario, r.p)
    }
}

impl From<SequentialCorrelation> for RawCorrelation {
    fn from(c: SequentialCorrelation) -> Self {
        RawCorrelation {
            scenario: c.scenario,
            p: c.p,
        }
    }
}

impl SequentialCorrelation {
    pub fn new(scenario: Scenario, p: Vec<f64>) -> Result<Self> {
        if p.len() != scenario.len() {
            return Err(Error::LengthMismatch {
                expected: scenario.len(),
                actual: p.len(),
            });
        }
        if let Some(bad) = p.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("entry {bad} is not a finite number")));
        }
        Ok(Self { scenario, p })
    }

    /// Every setting block uniform.
    pub fn uniform(scenario: Scenario) -> Self {
        let v = 1.0 / scenario.outcome_count() as f64;
        Self {
            scenario,
            p: vec![v; scenario.len()],
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("tensor serializes")
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn into_probabilities(self) -> Vec<f64> {
        self.p
    }

    /// Entry at `(outcome_index, setting_index)`.
    #[inline]
    pub fn get(&self, outcome_index: usize, setting_index: usize) -> f64 {
        self.p[outcome_index + self.scenario.outcome_count() * setting_index]
    }

    /// Entry addressed by per-step records (binary scenarios only).
    pub fn get_records(&self, records: &[StepRecord]) -> f64 {
        debug_assert_eq!(records.len(), self.scenario.steps);
        let (o, s) = binary_indices(records);
        self.get(o, s)
    }

    /// Convex combination of equally-shaped tensors.
    pub fn mixture(parts: &[(f64, &SequentialCorrelation)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?
            .1;
        let mut p = vec![0.0; first.p.len()];
        for (w, c) in parts {
            if c.scenario != first.scenario {
                return Err(Error::InvalidArgument("mixture of different scenarios".into()));
            }
            for (acc, v) in p.iter_mut().zip(&c.p) {
                *acc += w * v;
            }
        }
        Self::new(first.scenario, p)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Positivity and per-setting normalization.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let neg = self.p.iter().fold(0.0_f64, |m, &v| m.max(-v));
        let block = self.scenario.outcome_count();
        let norm = self
            .p
            .chunks(block)
            .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        ValidationReport {
            ok: neg <= tol && norm <= tol,
            max_negativity: neg,
            max_normalization_residual: norm,
        }
    }

    /// Same-step no-signaling in both directions at every step.
    pub fn check_same_step_no_signaling(&self, tol: f64) -> ConstraintReport {
        self.check_families(&ConstraintFamily::no_signaling(self.scenario.steps), tol)
    }

    /// Earlier marginals independent of later settings.
    pub fn check_arrow_of_time(&self, tol: f64) -> ConstraintReport {
        self.check_families(&ConstraintFamily::arrow_of_time(self.scenario.steps), tol)
    }

    pub(crate) fn check_families(&self, families: &[ConstraintFamily], tol: f64) -> ConstraintReport {
        let mut worst: Option<(f64, &str)> = None;
        for f in families {
            let r = self.family_residual(f);
            if worst.is_none_or(|(w, _)| r > w) {
                worst = Some((r, &f.name));
            }
        }
        match worst {
            Some((r, name)) => ConstraintReport {
                ok: r <= tol,
                max_residual: r,
                worst: (r > 0.0).then(|| name.to_string()),
            },
            None => ConstraintReport {
                ok: true,
                max_residual: 0.0,
                worst: None,
            },
        }
    }

    fn family_residual(&self, f: &ConstraintFamily) -> f64 {
        let sc = self.scenario;
        let block = sc.outcome_count();
        let m = self.reduced_marginals(f);
        let mut r: f64 = 0.0;
        for s in 0..sc.setting_count() {
            let s_ref = zero_digits(s, f.setting_mask, sc.settings, 2 * sc.steps);
            if s_ref == s {
                continue;
            }
            for o in 0..block {
                r = r.max((m[o + block * s] - m[o + block * s_ref]).abs());
            }
        }
        r
    }

    /// Marginal sums with the family's outcome digits summed out, stored at the
    /// index whose summed digits are zero.
    fn reduced_marginals(&self, f: &ConstraintFamily) -> Vec<f64> {
        let sc = self.scenario;
        let block = sc.outcome_count();
        let kept: Vec<usize> = (0..block)
            .map(|o| zero_digits(o, f.outcome_mask, sc.outcomes, 2 * sc.steps))
            .collect();
        let mut m = vec![0.0; self.p.len()];
        for s in 0..sc.setting_count() {
            for o in 0..block {
                m[kept[o] + block * s] += self.p[o + block * s];
            }
        }
        m
    }

    /// Sparse rows `Σ p(·|s) - Σ p(·|s_ref) = 0` for every constraint in the
    /// given families. Used for rank certificates.
    pub(crate) fn constraint_rows(scenario: Scenario, families: &[ConstraintFamily]) -> Vec<Vec<(usize, f64)>> {
        let block = scenario.outcome_count();
        let digits = 2 * scenario.steps;
        let mut rows = Vec::new();
        for f in families {
            let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for o in 0..block {
                groups
                    .entry(zero_digits(o, f.outcome_mask, scenario.outcomes, digits))
                    .or_default()
                    .push(o);
            }
            for s in 0..scenario.setting_count() {
                let s_ref = zero_digits(s, f.setting_mask, scenario.settings, digits);
                if s_ref == s {
                    continue;
                }
                for members in groups.values() {
                    let mut row: Vec<(usize, f64)> = members.iter().map(|&o| (o + block * s, 1.0)).collect();
                    row.extend(members.iter().map(|&o| (o + block * s_ref, -1.0)));
                    rows.push(row);
                }
            }
        }
        rows
    }

    /// Marginal of the first `k` steps, with later settings fixed to zero.
    /// Indexed like a `k`-step tensor.
    pub(crate) fn prefix_marginal(&self, k: usize) -> Vec<f64> {
        let sc = self.scenario;
        let oo = sc.outcomes * sc.outcomes;
        let ss = sc.settings * sc.settings;
        let o_prefix = oo.pow(k as u32);
        let s_prefix = ss.pow(k as u32);
        let o_rest = oo.pow((sc.steps - k) as u32);
        let block = sc.outcome_count();
        let mut out = vec![0.0; o_prefix * s_prefix];
        for s in 0..s_prefix {
            for o in 0..o_prefix {
                let mut acc = 0.0;
                for rest in 0..o_rest {
                    acc += self.p[o + o_prefix * rest + block * s];
                }
                out[o + o_prefix * s] = acc;
            }
        }
        out
    }
}

/// Outcome and setting indices of a full binary record sequence.
pub(crate) fn binary_indices(records: &[StepRecord]) -> (usize, usize) {
    records.iter().rev().fold((0, 0), |(o, s), r| {
        (4 * o + r.outcome_digit(), 4 * s + r.setting_digit())
    })
}

/// Sets the masked base-`radix` digits of `value` to zero.
fn zero_digits(value: usize, mask: u64, radix: usize, digits: usize) -> usize {
    let mut out = value;
    let mut weight = 1;
    for d in 0..digits {
        if mask & (1 << d) != 0 {
            out -= ((value / weight) % radix) * weight;
        }
        weight *= radix;
    }
    out
}
