use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::linalg::{tensor_product, ComplexMatrix};
use super::measurement::{KrausInstrument, Povm};
use super::state::DensityMatrix;
use crate::corr::{History, Scenario, SequentialCorrelation, StepRecord};
use crate::error::{Error, Result};

/// One party's measurements: instruments for steps `1..L-1` and effects for
/// step `L`, each selected by the full two-party history preceding the step.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyProgram {
    instruments: Vec<BTreeMap<History, KrausInstrument>>,
    effects: BTreeMap<History, Povm>,
}

impl PartyProgram {
    /// `instruments[ℓ]` must cover every history of length `ℓ`; `effects`
    /// every history of length `instruments.len()`.
    pub fn new(instruments: Vec<BTreeMap<History, KrausInstrument>>, effects: BTreeMap<History, Povm>) -> Result<Self> {
        let p = Self { instruments, effects };
        p.check()?;
        Ok(p)
    }

    pub fn from_fn(
        steps: usize,
        mut instrument: impl FnMut(usize, &History) -> Result<KrausInstrument>,
        mut effects: impl FnMut(&History) -> Result<Povm>,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("a program needs at least one step".into()));
        }
        let instruments = (0..steps - 1)
            .map(|l| {
                History::all_of_length(l)
                    .into_iter()
                    .map(|h| instrument(l, &h).map(|i| (h, i)))
                    .collect::<Result<BTreeMap<_, _>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let effects = History::all_of_length(steps - 1)
            .into_iter()
            .map(|h| effects(&h).map(|e| (h, e)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Self::new(instruments, effects)
    }

    /// Same instruments regardless of history.
    pub fn history_independent(instruments: Vec<KrausInstrument>, effects: Povm) -> Result<Self> {
        let steps = instruments.len() + 1;
        Self::from_fn(steps, |l, _| Ok(instruments[l].clone()), |_| Ok(effects.clone()))
    }

    pub fn steps(&self) -> usize {
        self.instruments.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.effects.values().next().map_or(0, Povm::dim)
    }

    pub fn instrument(&self, step: usize, history: &History) -> Result<&KrausInstrument> {
        self.instruments
            .get(step)
            .and_then(|m| m.get(history))
            .ok_or_else(|| Error::MissingHistory(format!("no instrument at step {} for history '{history}'", step + 1)))
    }

    pub fn final_effects(&self, history: &History) -> Result<&Povm> {
        self.effects
            .get(history)
            .ok_or_else(|| Error::MissingHistory(format!("no final effects for history '{history}'")))
    }

    fn check(&self) -> Result<()> {
        let d = self.dim();
        let binary = |s: usize, o: usize, what: &str| {
            if s != 2 || o != 2 {
                Err(Error::Unsupported(format!(
                    "{what} has {s} settings and {o} outcomes; only 2 and 2 are supported"
                )))
            } else {
                Ok(())
            }
        };
        for (l, map) in self.instruments.iter().enumerate() {
            for h in History::all_of_length(l) {
                let inst = self.instrument(l, &h)?;
                binary(inst.settings(), inst.outcomes(), "instrument")?;
                if inst.dim() != d {
                    return Err(Error::Dimension(format!(
                        "instrument at step {} history '{h}' acts on {} dimensions, expected {d}",
                        l + 1,
                        inst.dim()
                    )));
                }
            }
            if map.len() != 16usize.pow(l as u32) {
                return Err(Error::InvalidArgument(format!(
                    "step {} has entries for foreign histories",
                    l + 1
                )));
            }
        }
        let last = self.instruments.len();
        for h in History::all_of_length(last) {
            let e = self.final_effects(&h)?;
            binary(e.settings(), e.outcomes(), "final measurement")?;
            if e.dim() != d {
                return Err(Error::Dimension(format!(
                    "final effects for '{h}' act on {} dimensions, expected {d}",
                    e.dim()
                )));
            }
        }
        if self.effects.len() != 16usize.pow(last as u32) {
            return Err(Error::InvalidArgument(
                "final step has entries for foreign histories".into(),
            ));
        }
        Ok(())
    }
}

/// Shared state plus both parties' programs.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialStrategy {
    state: DensityMatrix,
    alice: PartyProgram,
    bob: PartyProgram,
}

impl SequentialStrategy {
    pub fn new(state: DensityMatrix, alice: PartyProgram, bob: PartyProgram) -> Result<Self> {
        if alice.steps() != bob.steps() {
            return Err(Error::InvalidArgument(format!(
                "alice has {} steps, bob has {}",
                alice.steps(),
                bob.steps()
            )));
        }
        if alice.dim() * bob.dim() != state.dim() {
            return Err(Error::Dimension(format!(
                "state has dimension {}, local dimensions are {} and {}",
                state.dim(),
                alice.dim(),
                bob.dim()
            )));
        }
        Ok(Self { state, alice, bob })
    }

    pub fn steps(&self) -> usize {
        self.alice.steps()
    }

    pub fn local_dims(&self) -> [usize; 2] {
        [self.alice.dim(), self.bob.dim()]
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn alice(&self) -> &PartyProgram {
        &self.alice
    }

    pub fn bob(&self) -> &PartyProgram {
        &self.bob
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawStrategy = serde_json::from_str(s)?;
        raw.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&RawStrategy::from(self)).expect("strategy serializes")
    }
}

/// Born-rule tensor of a strategy.
pub fn simulate(strategy: &SequentialStrategy) -> Result<SequentialCorrelation> {
    let steps = strategy.steps();
    let scenario = Scenario::binary(steps);
    let mut p = vec![0.0; scenario.len()];
    let outcome_count = scenario.outcome_count();
    let sim = Simulator {
        strategy,
        steps,
        outcome_count,
    };
    sim.branch(&History::empty(), strategy.state.matrix(), &mut p)?;
    SequentialCorrelation::new(scenario, p)
}

struct Simulator<'a> {
    strategy: &'a SequentialStrategy,
    steps: usize,
    outcome_count: usize,
}

impl Simulator<'_> {
    fn index(&self, history: &History, last: StepRecord) -> usize {
        let (mut o, mut s, mut scale) = (0, 0, 1);
        for r in history.steps().iter().chain(std::iter::once(&last)) {
            o += r.outcome_digit() * scale;
            s += r.setting_digit() * scale;
            scale *= 4;
        }
        o + self.outcome_count * s
    }

    /// `sigma` is the unnormalized state after `history`.
    fn branch(&self, history: &History, sigma: &ComplexMatrix, p: &mut [f64]) -> Result<()> {
        let (alice, bob) = (&self.strategy.alice, &self.strategy.bob);
        if history.len() + 1 == self.steps {
            let (ea, eb) = (alice.final_effects(history)?, bob.final_effects(history)?);
            for r in StepRecord::all() {
                let e = tensor_product(
                    ea.effect(r.x as usize, r.a as usize),
                    eb.effect(r.y as usize, r.b as usize),
                );
                p[self.index(history, r)] = e.trace_product(sigma).re;
            }
            return Ok(());
        }
        let step = history.len();
        let (ka, kb) = (alice.instrument(step, history)?, bob.instrument(step, history)?);
        for r in StepRecord::all() {
            let k = tensor_product(
                ka.kraus(r.x as usize, r.a as usize),
                kb.kraus(r.y as usize, r.b as usize),
            );
            let next = k.sandwich(sigma)?;
            self.branch(&history.extended(r), &next, p)?;
        }
        Ok(())
    }
}

type StepMap = BTreeMap<String, Vec<ComplexMatrix>>;

/// JSON layout: every step is an object keyed `"<history>|<setting>"` holding
/// one matrix per outcome (Kraus operators before the last step, effects at
/// the last step). The first step uses the empty history, e.g. `"|0"`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    local_dims: [usize; 2],
    steps: usize,
    state: DensityMatrix,
    alice: Vec<StepMap>,
    bob: Vec<StepMap>,
}

fn program_to_raw(p: &PartyProgram) -> Vec<StepMap> {
    let mut out: Vec<StepMap> = p
        .instruments
        .iter()
        .map(|m| {
            m.iter()
                .flat_map(|(h, inst)| {
                    (0..inst.settings()).map(move |x| {
                        let ops = (0..inst.outcomes()).map(|a| inst.kraus(x, a).clone()).collect();
                        (format!("{h}|{x}"), ops)
                    })
                })
                .collect()
        })
        .collect();
    out.push(
        p.effects
            .iter()
            .flat_map(|(h, povm)| {
                (0..povm.settings()).map(move |x| {
                    let ops = (0..povm.outcomes()).map(|a| povm.effect(x, a).clone()).collect();
                    (format!("{h}|{x}"), ops)
                })
            })
            .collect(),
    );
    out
}

fn split_step(map: &StepMap, step: usize) -> Result<BTreeMap<History, Vec<Vec<ComplexMatrix>>>> {
    let mut grouped: BTreeMap<History, BTreeMap<usize, Vec<ComplexMatrix>>> = BTreeMap::new();
    for (key, ops) in map {
        let (h, x) = key
            .rsplit_once('|')
            .ok_or_else(|| Error::Parse(format!("step {step} key '{key}' lacks '|<setting>'")))?;
        let history: History = h.parse()?;
        if history.len() + 1 != step {
            return Err(Error::Parse(format!(
                "step {step} key '{key}' has a history of length {}",
                history.len()
            )));
        }
        let x: usize = x
            .parse()
            .map_err(|_| Error::Parse(format!("step {step} key '{key}' has a bad setting")))?;
        grouped.entry(history).or_default().insert(x, ops.clone());
    }
    grouped
        .into_iter()
        .map(|(h, per_setting)| {
            let expected: Vec<usize> = (0..per_setting.len()).collect();
            if per_setting.keys().copied().collect::<Vec<_>>() != expected {
                return Err(Error::Parse(format!(
                    "step {step} history '{h}' has non-contiguous settings"
                )));
            }
            Ok((h, per_setting.into_values().collect()))
        })
        .collect()
}

fn program_from_raw(raw: &[StepMap], steps: usize, who: &str) -> Result<PartyProgram> {
    if raw.len() != steps {
        return Err(Error::Parse(format!(
            "{who} lists {} steps, expected {steps}",
            raw.len()
        )));
    }
    let mut instruments = Vec::with_capacity(steps - 1);
    for (l, map) in raw[..steps - 1].iter().enumerate() {
        instruments.push(
            split_step(map, l + 1)?
                .into_iter()
                .map(|(h, ops)| KrausInstrument::new(ops).map(|i| (h, i)))
                .collect::<Result<BTreeMap<_, _>>>()?,
        );
    }
    let effects = split_step(&raw[steps - 1], steps)?
        .into_iter()
        .map(|(h, ops)| Povm::new(ops).map(|e| (h, e)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    PartyProgram::new(instruments, effects).map_err(|e| Error::Parse(format!("{who}: {e}")))
}

impl TryFrom<RawStrategy> for SequentialStrategy {
    type Error = Error;

    fn try_from(raw: RawStrategy) -> Result<Self> {
        if raw.steps == 0 {
            return Err(Error::Parse("steps must be at least 1".into()));
        }
        let alice = program_from_raw(&raw.alice, raw.steps, "alice")?;
        let bob = program_from_raw(&raw.bob, raw.steps, "bob")?;
        if [alice.dim(), bob.dim()] != raw.local_dims {
            return Err(Error::Dimension(format!(
                "local_dims {:?} disagree with operator dimensions [{}, {}]",
                raw.local_dims,
                alice.dim(),
                bob.dim()
            )));
        }
        SequentialStrategy::new(raw.state, alice, bob)
    }
}

impl From<&SequentialStrategy> for RawStrategy {
    fn from(s: &SequentialStrategy) -> Self {
        Self {
            local_dims: s.local_dims(),
            steps: s.steps(),
            state: s.state.clone(),
            alice: program_to_raw(&s.alice),
            bob: program_to_raw(&s.bob),
        }
    }
}

impl Serialize for SequentialStrategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawStrategy::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SequentialStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        RawStrategy::deserialize(deserializer)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::{SingleStepBox, DEFAULT_TOL};
    use crate::polytope::membership_p;
    use crate::quantum::measurement::{observable_projectors, projective_qubit_instrument};
    use crate::quantum::state::maximally_entangled_state;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn xz(theta: f64) -> [f64; 3] {
        [theta.sin(), 0.0, theta.cos()]
    }

    fn chsh_party(angles: [f64; 2], steps: usize) -> PartyProgram {
        let inst = projective_qubit_instrument(&[xz(angles[0]), xz(angles[1])]).unwrap();
        let povm = inst.to_povm();
        PartyProgram::history_independent(vec![inst; steps - 1], povm).unwrap()
    }

    #[test]
    fn tsirelson_box_from_bell_state() {
        let strat = SequentialStrategy::new(
            maximally_entangled_state(2).unwrap(),
            chsh_party([0.0, FRAC_PI_2], 1),
            chsh_party([FRAC_PI_4, -FRAC_PI_4], 1),
        )
        .unwrap();
        let c = simulate(&strat).unwrap();
        let b = SingleStepBox::from_slice(c.probabilities()).unwrap();
        let chsh = b.correlator(0, 0) + b.correlator(0, 1) + b.correlator(1, 0) - b.correlator(1, 1);
        assert!((chsh - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn product_state_gives_product_box() {
        let zero = DensityMatrix::pure(&[super::super::linalg::ONE, super::super::linalg::ZERO]).unwrap();
        let state = zero.tensor(&zero);
        let z = projective_qubit_instrument(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let prog = PartyProgram::history_independent(vec![z.clone()], z.to_povm()).unwrap();
        let c = simulate(&SequentialStrategy::new(state, prog.clone(), prog).unwrap()).unwrap();
        assert!(membership_p(&c, 1e-12).member);
        let f = c.factorize(DEFAULT_TOL).unwrap();
        assert!(c.max_abs_diff(&f.compose().unwrap()) < 1e-12);
        // Both measure Z at step one: outcome (0,0) with certainty.
        assert!((f.first.get(0, 0, 0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn history_dependent_second_step_is_in_p() {
        let rho = maximally_entangled_state(2).unwrap();
        let alice = PartyProgram::from_fn(
            2,
            |_, _| projective_qubit_instrument(&[xz(0.0), xz(FRAC_PI_2)]),
            |h| {
                let r = h.steps()[0];
                let t = 0.3 * f64::from(r.b) + 0.7 * f64::from(r.y);
                Povm::new(vec![
                    observable_projectors(&super::super::linalg::bloch_observable(xz(t))),
                    observable_projectors(&super::super::linalg::bloch_observable(xz(t + 1.0))),
                ])
            },
        )
        .unwrap();
        let bob = chsh_party([FRAC_PI_4, -FRAC_PI_4], 2);
        let strat = SequentialStrategy::new(rho, alice, bob).unwrap();
        let c = simulate(&strat).unwrap();
        assert!(c.validate(1e-12).ok);
        assert!(c.check_same_step_no_signaling(1e-12).ok);
        assert!(c.check_arrow_of_time(1e-12).ok);

        let json = strat.to_json_string();
        let back = SequentialStrategy::from_json_str(&json).unwrap();
        assert!(simulate(&back).unwrap().max_abs_diff(&c) < 1e-15);
    }

    #[test]
    fn rejects_incomplete_programs() {
        let z = projective_qubit_instrument(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let mut effects = BTreeMap::new();
        effects.insert(History::single(0, 0, 0, 0).unwrap(), z.to_povm());
        let mut first = BTreeMap::new();
        first.insert(History::empty(), z.clone());
        assert!(matches!(
            PartyProgram::new(vec![first], effects),
            Err(Error::MissingHistory(_))
        ));
        let prog = PartyProgram::history_independent(vec![], z.to_povm()).unwrap();
        let big = maximally_entangled_state(3).unwrap();
        assert!(SequentialStrategy::new(big, prog.clone(), prog).is_err());
    }

    #[test]
    fn json_rejects_bad_documents() {
        let prog = chsh_party([0.0, FRAC_PI_2], 2);
        let strat = SequentialStrategy::new(maximally_entangled_state(2).unwrap(), prog.clone(), prog).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&strat.to_json_string()).unwrap();
        v["local_dims"] = serde_json::json!([2, 3]);
        assert!(SequentialStrategy::from_json_str(&v.to_string()).is_err());
        v["local_dims"] = serde_json::json!([2, 2]);
        v["alice"][1].as_object_mut().unwrap().remove("0,0,0,0|1");
        assert!(SequentialStrategy::from_json_str(&v.to_string()).is_err());
        v["alice"][1]["0,0,0,0|1"] = serde_json::json!([
            [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
            [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]
        ]);
        assert!(SequentialStrategy::from_json_str(&v.to_string()).is_err());
    }
}
