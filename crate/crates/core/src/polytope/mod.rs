//! Vertex catalogs and membership tests for the single-step no-signaling
//! polytope, the spatio-temporal polytope `P`, the sequential local polytope
//! `Q`, and the time-ordered local vertex set.

mod rank;
mod sequential;
mod tol;

use serde::{Deserialize, Serialize};

use crate::corr::{Scenario, SequentialCorrelation, SingleStepBox};
use crate::error::{Error, Result};

pub use rank::{tight_constraint_rank, RANK_PIVOT_THRESHOLD};
pub use sequential::{
    compose_extreme_point, count_extreme_points, is_extreme_in_p, membership_p, membership_q, ExtremalityCertificate,
    ExtremePointSpec, DETERMINISTIC_EXTREME_POINTS, SINGLE_STEP_VERTEX_COUNT,
};
pub use tol::{sample_q, sample_tol, tol_vertices, TolVertex, TOL_VERTEX_COUNT};

/// Local bound of every CHSH expression.
pub const CHSH_LOCAL_BOUND: f64 = 2.0;

/// Which kind of no-signaling vertex a [`BoxVertex`] is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VertexKind {
    /// `a = alice[x]`, `b = bob[y]` with certainty.
    Deterministic { alice: [u8; 2], bob: [u8; 2] },
    /// `p(ab|xy) = 1/2` iff `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ`.
    PrVariant { alpha: u8, beta: u8, gamma: u8 },
}

/// One of the 24 vertices of the two-setting two-outcome no-signaling
/// polytope.
///
/// Ids: `0..16` are deterministic with `id = 4·f + g`, where `f = 2·a(x=0) +
/// a(x=1)` and likewise `g` for Bob; `16..24` are PR variants with
/// `id = 16 + 4α + 2β + γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxVertex {
    pub id: usize,
    #[serde(flatten)]
    pub kind: VertexKind,
}

impl BoxVertex {
    pub fn from_id(id: usize) -> Result<Self> {
        let kind = match id {
            0..=15 => {
                let (f, g) = ((id / 4) as u8, (id % 4) as u8);
                VertexKind::Deterministic {
                    alice: [f >> 1, f & 1],
                    bob: [g >> 1, g & 1],
                }
            }
            16..=23 => {
                let v = (id - 16) as u8;
                VertexKind::PrVariant {
                    alpha: v >> 2,
                    beta: (v >> 1) & 1,
                    gamma: v & 1,
                }
            }
            _ => return Err(Error::UnknownVertex(id)),
        };
        Ok(Self { id, kind })
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, VertexKind::Deterministic { .. })
    }

    pub fn to_box(&self) -> SingleStepBox {
        match self.kind {
            VertexKind::Deterministic { alice, bob } => {
                SingleStepBox::from_fn(|a, b, x, y| f64::from(u8::from(a as u8 == alice[x] && b as u8 == bob[y])))
            }
            VertexKind::PrVariant { alpha, beta, gamma } => SingleStepBox::from_fn(|a, b, x, y| {
                let rhs = (x & y) ^ (alpha as usize & x) ^ (beta as usize & y) ^ gamma as usize;
                if a ^ b == rhs {
                    0.5
                } else {
                    0.0
                }
            }),
        }
    }

    /// The vertex equal to `b` within `tol`, if any.
    pub fn identify(b: &SingleStepBox, tol: f64) -> Option<BoxVertex> {
        VERTICES.with(|vs| vs.iter().find(|(_, vb)| vb.max_abs_diff(b) <= tol).map(|(v, _)| *v))
    }
}

thread_local! {
    static VERTICES: Vec<(BoxVertex, SingleStepBox)> = single_step_vertices();
}

/// All 24 single-step no-signaling vertices, in id order.
pub fn single_step_vertices() -> Vec<(BoxVertex, SingleStepBox)> {
    (0..24)
        .map(|id| {
            let v = BoxVertex::from_id(id).expect("id in range");
            (v, v.to_box())
        })
        .collect()
}

/// The 16 deterministic boxes (ids `0..16`).
pub fn deterministic_boxes() -> Vec<SingleStepBox> {
    (0..16).map(|id| BoxVertex::from_id(id).unwrap().to_box()).collect()
}

/// Sign patterns `(s₀₀, s₀₁, s₁₀, s₁₁)` with `s₀₀s₀₁s₁₀s₁₁ = -1`.
pub const CHSH_PATTERNS: [[i8; 4]; 8] = chsh_patterns();

const fn chsh_patterns() -> [[i8; 4]; 8] {
    let mut out = [[0i8; 4]; 8];
    let mut n = 0;
    let mut bits = 0u8;
    while bits < 16 {
        if bits.count_ones() % 2 == 1 {
            let mut k = 0;
            while k < 4 {
                out[n][k] = if bits & (1 << k) != 0 { -1 } else { 1 };
                k += 1;
            }
            n += 1;
        }
        bits += 1;
    }
    out
}

/// Human-readable name of a sign pattern, e.g. `+E00+E01+E10-E11`.
pub fn pattern_label(pattern: &[i8; 4]) -> String {
    ["E00", "E01", "E10", "E11"]
        .iter()
        .zip(pattern)
        .map(|(e, &s)| format!("{}{e}", if s > 0 { '+' } else { '-' }))
        .collect()
}

/// `S_s = Σ_xy s_xy E_xy` for every pattern in [`CHSH_PATTERNS`].
pub fn chsh_values(b: &SingleStepBox) -> [f64; 8] {
    let e = [
        b.correlator(0, 0),
        b.correlator(0, 1),
        b.correlator(1, 0),
        b.correlator(1, 1),
    ];
    CHSH_PATTERNS.map(|s| (0..4).map(|k| f64::from(s[k]) * e[k]).sum())
}

/// Outcome of a membership test.
///
/// `margin` is the largest constraint violation found; it is nonpositive or
/// within tolerance for members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub member: bool,
    pub margin: f64,
    pub violated: Option<String>,
}

impl MembershipVerdict {
    pub(crate) fn from_margin(margin: f64, tol: f64, violated: impl FnOnce() -> String) -> Self {
        let member = margin <= tol;
        Self {
            member,
            margin,
            violated: (!member).then(violated),
        }
    }
}

/// No-signaling test for a single-step box.
pub fn is_no_signaling_box(b: &SingleStepBox, tol: f64) -> MembershipVerdict {
    let r = b.signaling_residual();
    MembershipVerdict::from_margin(r, tol, || format!("no-signaling: marginal residual {r:e}"))
}

/// Complete membership test for the single-step local polytope: positivity,
/// no-signaling, and all eight CHSH inequalities.
pub fn is_local_box(b: &SingleStepBox, tol: f64) -> Result<MembershipVerdict> {
    let norm = b.normalization_residual();
    if norm > tol {
        return Err(Error::NotNormalized(norm));
    }
    let values = chsh_values(b);
    let (k, best) =
        values.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    let chsh_margin = best - CHSH_LOCAL_BOUND;
    let negativity = -b.min_entry();
    let signaling = b.signaling_residual();
    let margin = chsh_margin.max(negativity).max(signaling);
    Ok(MembershipVerdict::from_margin(margin, tol, || {
        if chsh_margin >= negativity && chsh_margin >= signaling {
            format!("CHSH {} = {best}", pattern_label(&CHSH_PATTERNS[k]))
        } else if negativity >= signaling {
            format!("positivity: entry {}", -negativity)
        } else {
            format!("no-signaling: marginal residual {signaling:e}")
        }
    }))
}

/// Rank of the tight constraints of the single-step no-signaling polytope at
/// `b`. Equals 16 exactly at vertices.
pub fn single_step_vertex_rank(b: &SingleStepBox) -> usize {
    let c = SequentialCorrelation::new(Scenario::binary(1), b.as_array().to_vec()).expect("16 entries");
    tight_constraint_rank(&c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr_canonical() -> SingleStepBox {
        BoxVertex::from_id(16).unwrap().to_box()
    }

    #[test]
    fn twenty_four_vertices() {
        let vs = single_step_vertices();
        assert_eq!(vs.len(), 24);
        for (v, b) in &vs {
            assert!(is_no_signaling_box(b, 1e-12).member, "vertex {}", v.id);
            assert_eq!(b.normalization_residual(), 0.0);
            let local = is_local_box(b, 1e-12).unwrap().member;
            assert_eq!(local, v.is_deterministic(), "vertex {}", v.id);
            let units = b.as_array().iter().filter(|&&p| p == 1.0).count();
            let halves = b.as_array().iter().filter(|&&p| p == 0.5).count();
            if v.is_deterministic() {
                assert_eq!((units, halves), (4, 0));
            } else {
                assert_eq!((units, halves), (0, 8));
            }
        }
        // All distinct.
        for i in 0..24 {
            for j in 0..i {
                assert!(vs[i].1.max_abs_diff(&vs[j].1) > 0.0);
            }
        }
    }

    #[test]
    fn vertex_ids_follow_documented_enumeration() {
        let v = BoxVertex::from_id(0).unwrap();
        assert_eq!(
            v.kind,
            VertexKind::Deterministic {
                alice: [0, 0],
                bob: [0, 0]
            }
        );
        // f = 2·a(x=0) + a(x=1) = 2 -> a(0)=1, a(1)=0; g = 1 -> b(0)=0, b(1)=1
        let v = BoxVertex::from_id(9).unwrap();
        assert_eq!(
            v.kind,
            VertexKind::Deterministic {
                alice: [1, 0],
                bob: [0, 1]
            }
        );
        let v = BoxVertex::from_id(16 + 4 + 1).unwrap();
        assert_eq!(
            v.kind,
            VertexKind::PrVariant {
                alpha: 1,
                beta: 0,
                gamma: 1
            }
        );
        assert!(BoxVertex::from_id(24).is_err());
        for (v, b) in single_step_vertices() {
            assert_eq!(BoxVertex::identify(&b, 1e-12), Some(v));
        }
    }

    #[test]
    fn chsh_patterns_have_odd_sign() {
        for s in CHSH_PATTERNS {
            assert_eq!(s.iter().map(|&v| i32::from(v)).product::<i32>(), -1);
        }
        assert_eq!(CHSH_PATTERNS[0], [-1, 1, 1, 1]);
        assert!(CHSH_PATTERNS.contains(&[1, 1, 1, -1]));
    }

    #[test]
    fn canonical_pr_reaches_four_on_exactly_one_pattern() {
        let v = chsh_values(&pr_canonical());
        let max = v.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(max, 4.0);
        assert_eq!(v.iter().filter(|&&x| x == 4.0).count(), 1);
        let k = v.iter().position(|&x| x == 4.0).unwrap();
        assert_eq!(CHSH_PATTERNS[k], [1, 1, 1, -1]);
    }

    #[test]
    fn deterministic_all_plus_has_standard_chsh_two() {
        let v = chsh_values(&BoxVertex::from_id(0).unwrap().to_box());
        let k = CHSH_PATTERNS.iter().position(|p| *p == [1, 1, 1, -1]).unwrap();
        assert_eq!(v[k], 2.0);
    }

    #[test]
    fn uniform_box_has_vanishing_chsh() {
        assert_eq!(chsh_values(&SingleStepBox::uniform()), [0.0; 8]);
        assert!(is_local_box(&SingleStepBox::uniform(), 1e-12).unwrap().member);
        assert!(is_no_signaling_box(&SingleStepBox::uniform(), 1e-12).member);
    }

    #[test]
    fn pr_is_nonlocal_with_margin_two() {
        let v = is_local_box(&pr_canonical(), 1e-9).unwrap();
        assert!(!v.member);
        assert_eq!(v.margin, 2.0);
        assert!(v.violated.unwrap().contains("+E00+E01+E10-E11"));
    }

    #[test]
    fn signaling_box_is_rejected() {
        // Bob outputs Alice's setting.
        let b = SingleStepBox::from_fn(|a, b, x, _| f64::from(u8::from(a == 0 && b == x)));
        assert!(!is_no_signaling_box(&b, 1e-9).member);
        assert!(!is_local_box(&b, 1e-9).unwrap().member);
    }

    #[test]
    fn non_normalized_box_is_structural_error() {
        let b = SingleStepBox::new([0.1; 16]);
        assert!(matches!(is_local_box(&b, 1e-9), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn every_vertex_has_full_tight_rank() {
        for (v, b) in single_step_vertices() {
            assert_eq!(single_step_vertex_rank(&b), 16, "vertex {}", v.id);
        }
        assert!(single_step_vertex_rank(&SingleStepBox::uniform()) < 16);
        let mid = BoxVertex::from_id(0).unwrap().to_box().mix(&pr_canonical(), 0.5);
        assert!(single_step_vertex_rank(&mid) < 16);
    }
}
