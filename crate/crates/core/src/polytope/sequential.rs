use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{is_local_box, rank::tight_constraint_rank, BoxVertex, MembershipVerdict};
use crate::corr::{Conditional, Factorization, History, Scenario, SequentialCorrelation, StepRecord};
use crate::error::{Error, Result};

pub const SINGLE_STEP_VERTEX_COUNT: u64 = 24;

/// Extreme points of the two-step polytope whose factors are all deterministic.
pub const DETERMINISTIC_EXTREME_POINTS: u64 = 16 * 24u64.pow(4);

/// A two-step extreme point: a vertex for the first step and a vertex for
/// every history the first vertex can produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtremePointSpec {
    pub first: usize,
    pub per_history: BTreeMap<History, usize>,
}

impl ExtremePointSpec {
    /// Histories with nonzero probability under the first vertex.
    pub fn support_of(first: usize) -> Result<Vec<History>> {
        let b = BoxVertex::from_id(first)?.to_box();
        Ok(StepRecord::all()
            .filter(|r| b.get(r.a as usize, r.b as usize, r.x as usize, r.y as usize) > 0.0)
            .map(|r| History::new(vec![r]))
            .collect())
    }

    /// Same conditional vertex after every history.
    pub fn uniform_choice(first: usize, conditional: usize) -> Result<Self> {
        BoxVertex::from_id(conditional)?;
        Ok(Self {
            first,
            per_history: Self::support_of(first)?.into_iter().map(|h| (h, conditional)).collect(),
        })
    }

    /// Uniformly random spec; ids are drawn from `0..16` when
    /// `deterministic_only`, else from `0..24`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, deterministic_only: bool) -> Self {
        let n = if deterministic_only { 16 } else { 24 };
        let first = rng.random_range(0..n);
        let per_history = Self::support_of(first)
            .expect("id in range")
            .into_iter()
            .map(|h| (h, rng.random_range(0..n)))
            .collect();
        Self { first, per_history }
    }

    pub fn validate(&self) -> Result<()> {
        let support = Self::support_of(self.first)?;
        for h in &support {
            let id = *self.per_history.get(h).ok_or_else(|| Error::MissingHistory(h.key()))?;
            BoxVertex::from_id(id)?;
        }
        if let Some(extra) = self.per_history.keys().find(|h| !support.contains(h)) {
            return Err(Error::InvalidArgument(format!(
                "history {extra} has zero probability under vertex {}",
                self.first
            )));
        }
        Ok(())
    }

    /// True when any factor is a PR variant.
    pub fn has_pr_factor(&self) -> bool {
        self.first >= 16 || self.per_history.values().any(|&id| id >= 16)
    }

    pub fn to_factorization(&self) -> Result<Factorization> {
        self.validate()?;
        let conditionals = History::all_of_length(1)
            .into_iter()
            .map(|h| {
                let c = match self.per_history.get(&h) {
                    Some(&id) => Conditional::Box(BoxVertex::from_id(id)?.to_box()),
                    None => Conditional::ZERO,
                };
                Ok((h, c))
            })
            .collect::<Result<_>>()?;
        Ok(Factorization {
            first: BoxVertex::from_id(self.first)?.to_box(),
            conditionals,
        })
    }
}

/// Tensor `p_e(a₁b₁|x₁y₁) · p_{e_X}(a₂b₂|X; x₂y₂)` of an extreme point.
pub fn compose_extreme_point(spec: &ExtremePointSpec) -> Result<SequentialCorrelation> {
    spec.to_factorization()?.compose()
}

/// Exact number of extreme points of the spatio-temporal polytope.
///
/// One step gives the 24 no-signaling vertices; two steps give
/// `16·24⁴ + 8·24⁸`.
pub fn count_extreme_points(scenario: Scenario) -> Result<u64> {
    if !scenario.is_binary() {
        return Err(Error::Unsupported(
            "vertex count is only available for two settings and two outcomes".into(),
        ));
    }
    match scenario.steps() {
        1 => Ok(SINGLE_STEP_VERTEX_COUNT),
        2 => Ok(DETERMINISTIC_EXTREME_POINTS + 8 * 24u64.pow(8)),
        l => Err(Error::Unsupported(format!("vertex count for {l} steps"))),
    }
}

/// Membership in the spatio-temporal polytope: positivity, normalization,
/// arrow of time, and same-step no-signaling.
pub fn membership_p(corr: &SequentialCorrelation, tol: f64) -> MembershipVerdict {
    let v = corr.validate(tol);
    let aot = corr.check_arrow_of_time(tol);
    let ns = corr.check_same_step_no_signaling(tol);
    let candidates = [
        (v.max_negativity, "positivity".to_string()),
        (v.max_normalization_residual, "normalization".to_string()),
        (
            aot.max_residual,
            format!("arrow of time: {}", aot.worst.clone().unwrap_or_default()),
        ),
        (
            ns.max_residual,
            format!("no-signaling: {}", ns.worst.clone().unwrap_or_default()),
        ),
    ];
    let (margin, what) =
        candidates.into_iter().fold(
            (f64::NEG_INFINITY, String::new()),
            |acc, c| if c.0 > acc.0 { c } else { acc },
        );
    MembershipVerdict::from_margin(margin, tol, || what)
}

/// Membership in the sequential local polytope: a member of `P` whose first
/// step and every nonzero-history conditional box satisfy all CHSH
/// inequalities.
pub fn membership_q(corr: &SequentialCorrelation, tol: f64) -> MembershipVerdict {
    let p = membership_p(corr, tol);
    if !p.member {
        return p;
    }
    let f = match corr.factorize(tol) {
        Ok(f) => f,
        Err(e) => {
            return MembershipVerdict {
                member: false,
                margin: f64::INFINITY,
                violated: Some(e.to_string()),
            }
        }
    };
    let mut margin = p.margin;
    let first = local_or_normalization_failure(&f.first, tol);
    if !first.member {
        return MembershipVerdict {
            violated: first.violated.map(|v| format!("first step: {v}")),
            ..first
        };
    }
    margin = margin.max(first.margin);
    for (h, c) in &f.conditionals {
        if let Conditional::Box(b) = c {
            let v = local_or_normalization_failure(b, tol);
            if !v.member {
                return MembershipVerdict {
                    violated: v.violated.map(|s| format!("history {h}: {s}")),
                    ..v
                };
            }
            margin = margin.max(v.margin);
        }
    }
    MembershipVerdict {
        member: true,
        margin,
        violated: None,
    }
}

fn local_or_normalization_failure(b: &crate::corr::SingleStepBox, tol: f64) -> MembershipVerdict {
    is_local_box(b, tol).unwrap_or_else(|e| MembershipVerdict {
        member: false,
        margin: b.normalization_residual(),
        violated: Some(e.to_string()),
    })
}

/// Outcome of the two independent extremality tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalityCertificate {
    /// Every factor (first step and each nonzero-history conditional) is one
    /// of the 24 no-signaling vertices.
    pub structural: bool,
    /// Rank of the constraints tight at the point.
    pub rank: usize,
    /// Tensor length; the point is a vertex iff `rank == ambient`.
    pub ambient: usize,
    /// Decoded spec when the point is a two-step extreme point.
    pub spec: Option<ExtremePointSpec>,
}

impl ExtremalityCertificate {
    pub fn rank_extreme(&self) -> bool {
        self.rank == self.ambient
    }

    pub fn agree(&self) -> bool {
        self.structural == self.rank_extreme()
    }

    pub fn is_extreme(&self) -> bool {
        self.structural && self.rank_extreme()
    }
}

/// Decides whether `corr` is an extreme point of the spatio-temporal
/// polytope, structurally and by a tight-constraint rank certificate.
pub fn is_extreme_in_p(corr: &SequentialCorrelation, tol: f64) -> Result<ExtremalityCertificate> {
    let ambient = corr.scenario().len();
    if !membership_p(corr, tol).member {
        return Ok(ExtremalityCertificate {
            structural: false,
            rank: 0,
            ambient,
            spec: None,
        });
    }
    let f = corr.factorize(tol)?;
    let first = BoxVertex::identify(&f.first, tol);
    let mut ids = BTreeMap::new();
    let mut structural = first.is_some();
    for (h, c) in &f.conditionals {
        if let Conditional::Box(b) = c {
            match BoxVertex::identify(b, tol) {
                Some(v) => {
                    ids.insert(h.clone(), v.id);
                }
                None => structural = false,
            }
        }
    }
    let spec = match first {
        Some(v) if structural && corr.scenario().steps() == 2 => Some(ExtremePointSpec {
            first: v.id,
            per_history: ids,
        }),
        _ => None,
    };
    let rank = if structural || corr.scenario().steps() <= 2 {
        tight_constraint_rank(corr)
    } else {
        0
    };
    Ok(ExtremalityCertificate {
        structural,
        rank,
        ambient,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::DEFAULT_TOL;
    use crate::rng::seeded;

    #[test]
    fn count_matches_closed_form() {
        assert_eq!(count_extreme_points(Scenario::default()).unwrap(), 880_607_821_824);
        assert_eq!(16 * 331_776 + 8 * 110_075_314_176u64, 880_607_821_824);
        assert_eq!(count_extreme_points(Scenario::binary(1)).unwrap(), 24);
        assert_eq!(DETERMINISTIC_EXTREME_POINTS, 5_308_416);
        assert!(count_extreme_points(Scenario::binary(3)).is_err());
        assert!(count_extreme_points(Scenario::new(2, 3, 2).unwrap()).is_err());
    }

    #[test]
    fn support_sizes() {
        for id in 0..16 {
            assert_eq!(ExtremePointSpec::support_of(id).unwrap().len(), 4);
        }
        for id in 16..24 {
            assert_eq!(ExtremePointSpec::support_of(id).unwrap().len(), 8);
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExtremePointSpec::uniform_choice(0, 5).unwrap();
        assert!(spec.validate().is_ok());
        let h = spec.per_history.keys().next().unwrap().clone();
        spec.per_history.remove(&h);
        assert!(matches!(compose_extreme_point(&spec), Err(Error::MissingHistory(_))));
        let mut spec = ExtremePointSpec::uniform_choice(0, 5).unwrap();
        spec.per_history.insert(History::single(1, 1, 0, 0).unwrap(), 3);
        assert!(spec.validate().is_err());
        let mut spec = ExtremePointSpec::uniform_choice(0, 5).unwrap();
        *spec.per_history.values_mut().next().unwrap() = 30;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = ExtremePointSpec::uniform_choice(0, 17).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"first":0,"per_history":{"0,0,0,0":17,"0,0,0,1":17,"0,0,1,0":17,"0,0,1,1":17}}"#
        );
        let back: ExtremePointSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn deterministic_extreme_point_is_a_deterministic_strategy() {
        let spec = ExtremePointSpec::uniform_choice(6, 11).unwrap();
        let c = compose_extreme_point(&spec).unwrap();
        assert!(c.probabilities().iter().all(|&p| p == 0.0 || p == 1.0));
        assert!(c.validate(0.0).ok);
        let cert = is_extreme_in_p(&c, DEFAULT_TOL).unwrap();
        assert!(cert.is_extreme() && cert.agree());
        assert_eq!(cert.rank, 256);
        assert_eq!(cert.spec, Some(spec));
    }

    #[test]
    fn pr_pr_extreme_point_is_outside_q() {
        let spec = ExtremePointSpec::uniform_choice(16, 16).unwrap();
        let c = compose_extreme_point(&spec).unwrap();
        assert!(membership_p(&c, 0.0).member);
        let v = membership_q(&c, DEFAULT_TOL);
        assert!(!v.member);
        assert!(v.violated.unwrap().starts_with("first step"));
        let cert = is_extreme_in_p(&c, DEFAULT_TOL).unwrap();
        assert!(cert.is_extreme());
        assert_eq!(cert.rank, 256);
    }

    #[test]
    fn single_pr_conditional_is_named() {
        let mut spec = ExtremePointSpec::uniform_choice(0, 0).unwrap();
        let h = History::single(0, 0, 1, 0).unwrap();
        spec.per_history.insert(h, 16);
        let c = compose_extreme_point(&spec).unwrap();
        let v = membership_q(&c, DEFAULT_TOL);
        assert!(!v.member);
        assert!((v.margin - 2.0).abs() < 1e-12);
        assert!(v.violated.unwrap().starts_with("history 0,0,1,0"));
    }

    #[test]
    fn mixtures_are_not_extreme() {
        let a = compose_extreme_point(&ExtremePointSpec::uniform_choice(0, 0).unwrap()).unwrap();
        let b = compose_extreme_point(&ExtremePointSpec::uniform_choice(16, 17).unwrap()).unwrap();
        let m = SequentialCorrelation::mixture(&[(0.5, &a), (0.5, &b)]).unwrap();
        let cert = is_extreme_in_p(&m, DEFAULT_TOL).unwrap();
        assert!(!cert.structural && !cert.rank_extreme());

        let u = SequentialCorrelation::uniform(Scenario::default());
        let cert = is_extreme_in_p(&u, DEFAULT_TOL).unwrap();
        assert!(!cert.structural);
        assert!(cert.rank < 256);
        assert!(cert.agree());
    }

    #[test]
    fn random_specs_are_extreme_members() {
        let mut rng = seeded(11);
        for _ in 0..20 {
            let spec = ExtremePointSpec::random(&mut rng, false);
            let c = compose_extreme_point(&spec).unwrap();
            assert!(membership_p(&c, 0.0).member);
            let cert = is_extreme_in_p(&c, DEFAULT_TOL).unwrap();
            assert!(cert.is_extreme() && cert.agree(), "{spec:?}");
            assert_eq!(membership_q(&c, DEFAULT_TOL).member, !spec.has_pr_factor());
        }
    }
}
