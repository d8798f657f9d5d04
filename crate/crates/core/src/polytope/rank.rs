use crate::corr::{ConstraintFamily, SequentialCorrelation};

/// Pivots smaller than this are treated as zero during elimination.
pub const RANK_PIVOT_THRESHOLD: f64 = 1e-8;

/// Entries at or below this magnitude make their positivity row tight.
const TIGHT_ENTRY: f64 = 1e-12;

/// Rank of the constraints that are tight at `corr`: normalization of every
/// setting block, same-step no-signaling and arrow-of-time equalities, and
/// positivity rows of the vanishing entries.
///
/// A point of the polytope is a vertex iff this equals the tensor length.
/// Positivity rows are unit vectors, so the rank splits into the number of
/// vanishing entries plus the rank of the equality rows restricted to the
/// support.
pub fn tight_constraint_rank(corr: &SequentialCorrelation) -> usize {
    let sc = corr.scenario();
    let p = corr.probabilities();
    let mut column = vec![usize::MAX; p.len()];
    let mut support = 0;
    for (i, &v) in p.iter().enumerate() {
        if v.abs() > TIGHT_ENTRY {
            column[i] = support;
            support += 1;
        }
    }
    let zeros = p.len() - support;
    if support == 0 {
        return zeros;
    }

    let block = sc.outcome_count();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..sc.setting_count())
        .map(|s| (0..block).map(|o| (o + block * s, 1.0)).collect())
        .collect();
    let mut families = ConstraintFamily::no_signaling(sc.steps());
    families.extend(ConstraintFamily::arrow_of_time(sc.steps()));
    rows.extend(SequentialCorrelation::constraint_rows(sc, &families));

    let mut basis = Echelon::new(support);
    for row in rows {
        let mut dense = vec![0.0; support];
        let mut any = false;
        for (i, c) in row {
            if column[i] != usize::MAX {
                dense[column[i]] += c;
                any = true;
            }
        }
        if any && basis.insert(dense) && basis.rank() == support {
            break;
        }
    }
    zeros + basis.rank()
}

/// Incrementally built row-echelon basis.
struct Echelon {
    rows: Vec<(usize, Vec<f64>)>,
    width: usize,
}

impl Echelon {
    fn new(width: usize) -> Self {
        Self {
            rows: Vec::new(),
            width,
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis and keeps it if it is independent.
    fn insert(&mut self, mut v: Vec<f64>) -> bool {
        for (pivot, r) in &self.rows {
            let f = v[*pivot];
            if f != 0.0 {
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= f * ri;
                }
            }
        }
        let (pivot, max) = v.iter().enumerate().fold(
            (0, 0.0_f64),
            |acc, (i, &x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc },
        );
        if max <= RANK_PIVOT_THRESHOLD {
            return false;
        }
        let scale = v[pivot];
        for x in &mut v {
            *x /= scale;
        }
        // Keep the basis fully reduced so later reductions are single passes.
        for (_, r) in &mut self.rows {
            let f = r[pivot];
            if f != 0.0 {
                for (ri, vi) in r.iter_mut().zip(&v) {
                    *ri -= f * vi;
                }
            }
        }
        debug_assert_eq!(v.len(), self.width);
        self.rows.push((pivot, v));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echelon_detects_dependence() {
        let mut e = Echelon::new(3);
        assert!(e.insert(vec![1.0, 1.0, 0.0]));
        assert!(e.insert(vec![0.0, 1.0, 1.0]));
        assert!(!e.insert(vec![1.0, 2.0, 1.0]));
        assert!(e.insert(vec![1.0, 0.0, 0.0]));
        assert_eq!(e.rank(), 3);
    }
}
