use serde::{Deserialize, Serialize};

use crate::corr::{SequentialCorrelation, SingleStepBox};
use crate::error::{Error, Result};
use crate::polytope::{deterministic_boxes, MembershipVerdict, TolVertex, TOL_VERTEX_COUNT};

pub const GILBERT_MAX_ITERS: usize = 10_000;
pub const GILBERT_TOL: f64 = 1e-7;

/// Weights below this leave the active set.
const WEIGHT_FLOOR: f64 = 1e-15;
/// Relative pivot size below which the affine solve counts as singular.
const PIVOT_FLOOR: f64 = 1e-13;

/// Finite vertex set queried by direction.
pub trait VertexOracle {
    fn dim(&self) -> usize;

    /// Vertex maximizing `⟨direction, v⟩`, with that maximum.
    fn argmax(&self, direction: &[f64]) -> (usize, f64);

    fn vertex(&self, id: usize) -> Vec<f64>;
}

/// Explicitly listed vertices; argmax is exhaustive.
#[derive(Debug, Clone)]
pub struct DenseVertices {
    vertices: Vec<Vec<f64>>,
}

impl DenseVertices {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let d = vertices
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("vertex set is empty".into()))?;
        if vertices.iter().any(|v| v.len() != d) {
            return Err(Error::Dimension("vertices have different lengths".into()));
        }
        Ok(Self { vertices })
    }

    /// The 16 deterministic single-step boxes.
    pub fn local_single_step() -> Self {
        Self {
            vertices: deterministic_boxes().iter().map(|b| b.as_array().to_vec()).collect(),
        }
    }
}

impl VertexOracle for DenseVertices {
    fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    fn argmax(&self, direction: &[f64]) -> (usize, f64) {
        self.vertices
            .iter()
            .map(|v| dot(v, direction))
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
            )
    }

    fn vertex(&self, id: usize) -> Vec<f64> {
        self.vertices[id].clone()
    }
}

/// The 4096 deterministic time-ordered local tensors, evaluated sparsely.
#[derive(Debug, Clone)]
pub struct TolOracle {
    supports: Vec<[usize; 16]>,
}

impl TolOracle {
    pub fn new() -> Self {
        Self {
            supports: (0..TOL_VERTEX_COUNT)
                .map(|i| TolVertex::from_index(i).support())
                .collect(),
        }
    }
}

impl Default for TolOracle {
    fn default() -> Self {
        Self::new()
    }
}

impl VertexOracle for TolOracle {
    fn dim(&self) -> usize {
        256
    }

    fn argmax(&self, direction: &[f64]) -> (usize, f64) {
        self.supports
            .iter()
            .map(|s| s.iter().map(|&i| direction[i]).sum::<f64>())
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
            )
    }

    fn vertex(&self, id: usize) -> Vec<f64> {
        let mut v = vec![0.0; 256];
        for &i in &self.supports[id] {
            v[i] = 1.0;
        }
        v
    }
}

/// Outcome of a distance computation.
///
/// Members come with the convex combination found (`support`); separated
/// targets with a direction `d` such that every vertex satisfies
/// `⟨d, v⟩ ≤ ⟨d, target⟩ - margin·‖d‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GilbertResult {
    pub distance_upper_bound: f64,
    pub iterations: usize,
    pub separating_direction: Option<Vec<f64>>,
    pub margin: Option<f64>,
    pub inconclusive: bool,
    /// `(vertex id, weight)` of the current closest point.
    pub support: Vec<(usize, f64)>,
    /// Distance bound after every iteration.
    pub trace: Vec<f64>,
}

impl GilbertResult {
    pub fn is_member(&self, tol: f64) -> bool {
        !self.inconclusive && self.distance_upper_bound <= tol
    }
}

/// Euclidean distance from `target` to the convex hull of the oracle's
/// vertices.
///
/// Gilbert's vertex-oracle iteration, with each new vertex followed by
/// Wolfe's corrective minor cycles: the closest point of the affine hull of
/// the active vertices is taken whenever it lies inside their convex hull,
/// and otherwise the iterate moves toward it until a weight vanishes. Stops
/// when the distance bound drops to `tol` or no vertex improves the iterate;
/// a target is reported separated once some direction certifies a margin
/// above `tol`, and the largest such margin is kept.
pub fn gilbert_distance(
    target: &[f64],
    oracle: &impl VertexOracle,
    tol: f64,
    max_iters: usize,
) -> Result<GilbertResult> {
    if target.len() != oracle.dim() {
        return Err(Error::Dimension(format!(
            "target has {} coordinates, vertices have {}",
            target.len(),
            oracle.dim()
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let (first, _) = oracle.argmax(target);
    let mut active = Active::new(first, shifted(&oracle.vertex(first), target));
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut separation: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let x = active.point();
        let dist = norm(&x);
        best = best.min(dist);
        trace.push(best);
        if dist <= tol {
            separation = None;
            converged = true;
            break;
        }
        let d: Vec<f64> = x.iter().map(|v| -v).collect();
        let (j, best_val) = oracle.argmax(&d);
        let margin = (dot(&d, target) - best_val) / dist;
        if margin > tol && separation.as_ref().is_none_or(|s| margin > s.1) {
            separation = Some((d, margin));
        }
        let w = shifted(&oracle.vertex(j), target);
        // Improvement still available from vertex j: ‖x‖² - ⟨x, w_j⟩.
        let gap = dist * dist - dot(&x, &w);
        if gap <= 1e-13 * dist * dist {
            converged = true;
            break;
        }
        if active.ids.contains(&j) || !active.insert_and_correct(j, w.clone()) {
            active.line_step(j, w);
        }
    }
    let (separating_direction, margin) = match separation {
        Some((d, m)) => (Some(d), Some(m)),
        None => (None, None),
    };
    let inconclusive = margin.is_none() && !(converged && best <= tol);
    Ok(GilbertResult {
        distance_upper_bound: best,
        iterations,
        separating_direction,
        margin,
        inconclusive,
        support: active.ids.iter().copied().zip(active.weights.iter().copied()).collect(),
        trace,
    })
}

/// Active vertex set in target-centred coordinates.
struct Active {
    ids: Vec<usize>,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    gram: Vec<Vec<f64>>,
}

impl Active {
    fn new(id: usize, w: Vec<f64>) -> Self {
        let g = dot(&w, &w);
        Self {
            ids: vec![id],
            points: vec![w],
            weights: vec![1.0],
            gram: vec![vec![g]],
        }
    }

    fn point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.points[0].len()];
        for (w, &l) in self.points.iter().zip(&self.weights) {
            for (xi, wi) in x.iter_mut().zip(w) {
                *xi += l * wi;
            }
        }
        x
    }

    fn push(&mut self, id: usize, w: Vec<f64>, weight: f64) {
        let row: Vec<f64> = self.points.iter().map(|p| dot(p, &w)).collect();
        for (r, g) in self.gram.iter_mut().zip(&row) {
            r.push(*g);
        }
        let mut row = row;
        row.push(dot(&w, &w));
        self.gram.push(row);
        self.ids.push(id);
        self.points.push(w);
        self.weights.push(weight);
    }

    fn prune(&mut self) {
        let keep: Vec<bool> = self.weights.iter().map(|&l| l > WEIGHT_FLOOR).collect();
        if keep.iter().all(|&k| k) {
            return;
        }
        retain_mask(&mut self.ids, &keep);
        retain_mask(&mut self.points, &keep);
        retain_mask(&mut self.weights, &keep);
        retain_mask(&mut self.gram, &keep);
        for row in &mut self.gram {
            retain_mask(row, &keep);
        }
        let total: f64 = self.weights.iter().sum();
        for l in &mut self.weights {
            *l /= total;
        }
    }

    /// Adds vertex `j` and runs Wolfe's minor cycles. Returns `false` (with
    /// the vertex removed again) when the affine system is singular.
    fn insert_and_correct(&mut self, id: usize, w: Vec<f64>) -> bool {
        self.push(id, w, 0.0);
        loop {
            let Some(alpha) = affine_minimizer(&self.gram) else {
                self.weights.pop();
                self.points.pop();
                self.ids.pop();
                self.gram.pop();
                for row in &mut self.gram {
                    row.pop();
                }
                return false;
            };
            if alpha.iter().all(|&a| a > WEIGHT_FLOOR) {
                self.weights = alpha;
                return self.ids.contains(&id);
            }
            let theta = self
                .weights
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= WEIGHT_FLOOR)
                .map(|(&l, &a)| l / (l - a))
                .fold(1.0f64, f64::min)
                .clamp(0.0, 1.0);
            for (l, a) in self.weights.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            let before = self.ids.len();
            // The weight that hit zero at theta is dropped even if rounding
            // left it marginally positive.
            if let Some(k) = self
                .weights
                .iter()
                .zip(&alpha)
                .enumerate()
                .filter(|(_, (_, &a))| a <= WEIGHT_FLOOR)
                .min_by(|x, y| x.1 .0.total_cmp(y.1 .0))
                .map(|(k, _)| k)
            {
                self.weights[k] = 0.0;
            }
            self.prune();
            if self.ids.len() >= before {
                return self.ids.contains(&id);
            }
        }
    }

    /// Plain Gilbert step: exact line search toward vertex `j`.
    fn line_step(&mut self, id: usize, w: Vec<f64>) {
        let x = self.point();
        let diff: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a - b).collect();
        let denom = dot(&diff, &diff);
        if denom == 0.0 {
            return;
        }
        let gamma = (dot(&x, &diff) / denom).clamp(0.0, 1.0);
        for l in &mut self.weights {
            *l *= 1.0 - gamma;
        }
        match self.ids.iter().position(|&i| i == id) {
            Some(k) => self.weights[k] += gamma,
            None => self.push(id, w, gamma),
        }
        self.prune();
    }
}

/// Weights `α` (summing to one) of the point of minimum norm in the affine
/// hull, from the bordered system `[G 1; 1ᵀ 0]`.
fn affine_minimizer(gram: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = gram.len();
    let n = k + 1;
    let mut m = vec![vec![0.0; n + 1]; n];
    let scale = gram
        .iter()
        .enumerate()
        .map(|(i, r)| r[i])
        .fold(0.0f64, f64::max)
        .max(1.0);
    for i in 0..k {
        for j in 0..k {
            m[i][j] = gram[i][j] / scale;
        }
        m[i][k] = 1.0;
        m[k][i] = 1.0;
    }
    m[k][n] = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < PIVOT_FLOOR {
            return None;
        }
        m.swap(col, piv);
        let pivot = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                if f != 0.0 {
                    for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    let alpha: Vec<f64> = (0..k).map(|i| m[i][n] / m[i][i]).collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

fn retain_mask<T>(v: &mut Vec<T>, keep: &[bool]) {
    let mut k = keep.iter();
    v.retain(|_| *k.next().expect("mask covers vector"));
}

fn shifted(v: &[f64], t: &[f64]) -> Vec<f64> {
    v.iter().zip(t).map(|(a, b)| a - b).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Distance-based membership in the hull of the 16 deterministic boxes.
pub fn local_box_by_distance(b: &SingleStepBox, tol: f64, max_iters: usize) -> Result<GilbertResult> {
    gilbert_distance(b.as_array(), &DenseVertices::local_single_step(), tol, max_iters)
}

/// Membership in the convex hull of the time-ordered local vertices.
pub fn membership_tol(corr: &SequentialCorrelation, tol: f64, max_iters: usize) -> Result<MembershipVerdict> {
    membership_tol_with(corr, &TolOracle::new(), tol, max_iters).map(|(v, _)| v)
}

/// As [`membership_tol`], reusing an oracle and returning the run details.
pub fn membership_tol_with(
    corr: &SequentialCorrelation,
    oracle: &TolOracle,
    tol: f64,
    max_iters: usize,
) -> Result<(MembershipVerdict, GilbertResult)> {
    if corr.scenario() != crate::corr::Scenario::binary(2) {
        return Err(Error::Unsupported(
            "time-ordered local membership is built for two binary steps".into(),
        ));
    }
    let r = gilbert_distance(corr.probabilities(), oracle, tol, max_iters)?;
    if r.inconclusive {
        return Err(Error::Inconclusive {
            iterations: r.iterations,
            distance: r.distance_upper_bound,
        });
    }
    let verdict = match r.margin {
        Some(m) => MembershipVerdict {
            member: false,
            margin: m,
            violated: Some(format!("separated from the time-ordered local hull by {m:e}")),
        },
        None => MembershipVerdict {
            member: true,
            margin: r.distance_upper_bound,
            violated: None,
        },
    };
    Ok((verdict, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{is_local_box, BoxVertex};

    #[test]
    fn vertex_target_is_found_immediately() {
        let v = BoxVertex::from_id(5).unwrap().to_box();
        let r = local_box_by_distance(&v, GILBERT_TOL, 100).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.distance_upper_bound, 0.0);
    }

    #[test]
    fn pr_box_is_separated_by_chsh() {
        let pr = BoxVertex::from_id(16).unwrap().to_box();
        let r = local_box_by_distance(&pr, GILBERT_TOL, 1000).unwrap();
        assert!(!r.inconclusive);
        let m = r.margin.unwrap();
        assert!((m - 0.5).abs() < 1e-9, "margin {m}");
        assert!((r.distance_upper_bound - 0.5).abs() < 1e-9);
        // Direction is a multiple of the standard CHSH coefficient table.
        let d = r.separating_direction.unwrap();
        let scale = d[0];
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let sign = if (a ^ b ^ (x & y)) == 0 { 1.0 } else { -1.0 };
                        let k = SingleStepBox::index(a, b, x, y);
                        assert!((d[k] - sign * scale).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn interior_mixture_is_member_and_trace_is_monotone() {
        let v: Vec<SingleStepBox> = deterministic_boxes();
        let mut mix = SingleStepBox::uniform();
        for (k, b) in v.iter().enumerate().take(5) {
            mix = mix.mix(b, 0.1 + 0.01 * k as f64);
        }
        let r = local_box_by_distance(&mix, GILBERT_TOL, 1000).unwrap();
        assert!(r.is_member(GILBERT_TOL));
        assert!(is_local_box(&mix, 1e-9).unwrap().member);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        let total: f64 = r.support.iter().map(|s| s.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_box_converges() {
        // Mixture of PR and white noise exactly at CHSH = 2.
        let pr = BoxVertex::from_id(16).unwrap().to_box();
        let b = pr.mix(&SingleStepBox::uniform(), 0.5);
        let r = local_box_by_distance(&b, GILBERT_TOL, GILBERT_MAX_ITERS).unwrap();
        assert!(r.is_member(GILBERT_TOL), "{r:?}");
    }

    #[test]
    fn tol_vertex_and_mixtures() {
        let oracle = TolOracle::new();
        let c = TolVertex::from_index(1234).to_correlation();
        let (v, r) = membership_tol_with(&c, &oracle, GILBERT_TOL, 100).unwrap();
        assert!(v.member);
        assert_eq!(r.iterations, 1);
        let c = crate::polytope::sample_tol(3, 20).unwrap();
        assert!(membership_tol(&c, GILBERT_TOL, GILBERT_MAX_ITERS).unwrap().member);
    }

    #[test]
    fn dimension_checks() {
        assert!(gilbert_distance(&[0.0; 3], &DenseVertices::local_single_step(), 1e-7, 10).is_err());
        assert!(DenseVertices::new(vec![]).is_err());
    }
}
