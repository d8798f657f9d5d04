//! Reference values and the large seeded invariant sweeps.

use std::f64::consts::SQRT_2;

use seqlocal_core::corr::{Conditional, History, Scenario, SequentialCorrelation, SingleStepBox, DEFAULT_TOL};
use seqlocal_core::optimize::{
    hidden_nonlocality_demo, membership_tol, random_qubit_projective_strategy, random_strategy, GILBERT_MAX_ITERS,
    GILBERT_TOL,
};
use seqlocal_core::polytope::{
    chsh_values, compose_extreme_point, count_extreme_points, is_local_box, membership_p, membership_q, sample_q,
    single_step_vertex_rank, single_step_vertices, ExtremePointSpec, DETERMINISTIC_EXTREME_POINTS,
};
use seqlocal_core::quantum::{maximally_entangled_state, simulate, tensor_product, werner_state, SequentialStrategy};
use seqlocal_core::rng::{dirichlet_uniform, seeded, substream};
use seqlocal_core::witness::{
    bounds, canonical_strategy, classify, concatenated_chsh, concatenated_chsh_l, rescaled_chsh, standard_chsh,
    tsirelson_box, WitnessClass, WitnessReport,
};

const TSIRELSON: f64 = 2.0 * SQRT_2;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn bound_ladder() {
    let b2 = bounds(2).unwrap();
    assert_eq!(b2.local, 6.0);
    assert!(close(b2.qubit_projective, 2.0 * (SQRT_2 + 2.0), 1e-12));
    assert!(close(b2.qubit_projective, 6.8284271247, 1e-9));
    assert!(close(b2.quantum, 4.0 + 4.0 * SQRT_2, 1e-12));

    let b3 = bounds(3).unwrap();
    assert_eq!(b3.local, 18.0);
    assert!(close(b3.qubit_projective, 6.0 * (SQRT_2 + 2.0), 1e-12));
    assert!(close(b3.qubit_projective, 20.4852814, 1e-7));
    assert!(close(b3.quantum, 16.0 + 12.0 * SQRT_2, 1e-12));

    assert!(close(bounds(4).unwrap().qubit_projective, 61.4558441, 1e-7));
    assert!(bounds(1).is_err());
}

#[test]
fn single_step_values() {
    let t = tsirelson_box();
    assert!(close(standard_chsh(&t), TSIRELSON, 1e-9));
    assert!(close(rescaled_chsh(&t), SQRT_2 + 2.0, 1e-9));
    let ones = SingleStepBox::from_fn(|a, b, _, _| if a == 0 && b == 0 { 1.0 } else { 0.0 });
    assert_eq!(standard_chsh(&ones), 2.0);
    assert_eq!(rescaled_chsh(&ones), 3.0);
    let pr = single_step_vertices()[16].1;
    assert_eq!(standard_chsh(&pr), 4.0);
    assert_eq!(rescaled_chsh(&pr), 4.0);
    assert_eq!(chsh_values(&SingleStepBox::uniform()), [0.0; 8]);
}

#[test]
fn canonical_strategies_reach_the_quantum_bound() {
    let v2 = concatenated_chsh(&simulate(&canonical_strategy(2).unwrap()).unwrap(), DEFAULT_TOL).unwrap();
    assert!(close(v2, 9.6568542495, 1e-9));
    let c3 = simulate(&canonical_strategy(3).unwrap()).unwrap();
    assert!(close(
        concatenated_chsh_l(&c3, 3, DEFAULT_TOL).unwrap(),
        32.9705627485,
        1e-9
    ));
    assert!(canonical_strategy(4).is_err());
    assert_eq!(
        WitnessReport::evaluate(&simulate(&canonical_strategy(2).unwrap()).unwrap(), DEFAULT_TOL)
            .unwrap()
            .class,
        WitnessClass::BeyondQubitWithinQuantum
    );
}

#[test]
fn ququart_regrouping_gives_the_same_tensor() {
    let phi = maximally_entangled_state(2).unwrap();
    let pair = phi.tensor(&phi);
    let ququart = maximally_entangled_state(4).unwrap();
    // |Φ⁺⟩⊗|Φ⁺⟩ lives on A1 B1 A2 B2; regroup to A1 A2 B1 B2.
    let perm = |i: usize| {
        let (a1, b1, a2, b2) = ((i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1);
        (a1 << 3) | (a2 << 2) | (b1 << 1) | b2
    };
    let m = pair.matrix();
    let mut max = 0.0f64;
    for r in 0..16 {
        for c in 0..16 {
            max = max.max((m[(r, c)] - ququart.matrix()[(perm(r), perm(c))]).norm());
        }
    }
    assert!(max < 1e-15);

    let canonical = canonical_strategy(2).unwrap();
    let regrouped =
        SequentialStrategy::new(ququart.clone(), canonical.alice().clone(), canonical.bob().clone()).unwrap();
    assert!(
        simulate(&regrouped)
            .unwrap()
            .max_abs_diff(&simulate(&canonical).unwrap())
            < 1e-15
    );
    assert!(tensor_product(phi.matrix(), phi.matrix()).max_abs_diff(pair.matrix()) < 1e-15);
}

#[test]
fn witness_examples() {
    let all_plus = compose_extreme_point(&ExtremePointSpec::uniform_choice(0, 0).unwrap()).unwrap();
    assert_eq!(concatenated_chsh(&all_plus, DEFAULT_TOL).unwrap(), 6.0);
    let pr_pr = compose_extreme_point(&ExtremePointSpec::uniform_choice(16, 16).unwrap()).unwrap();
    assert_eq!(concatenated_chsh(&pr_pr, DEFAULT_TOL).unwrap(), 16.0);
    assert_eq!(classify(16.0, 2).unwrap(), WitnessClass::SupraQuantum);
    assert_eq!(classify(6.0, 2).unwrap(), WitnessClass::Local);
    assert_eq!(classify(9.65, 2).unwrap(), WitnessClass::BeyondQubitWithinQuantum);
    assert_eq!(classify(6.5, 2).unwrap(), WitnessClass::BeyondLocalWithinQubit);
}

#[test]
fn extreme_point_count() {
    assert_eq!(count_extreme_points(Scenario::binary(2)).unwrap(), 880_607_821_824);
    assert_eq!(DETERMINISTIC_EXTREME_POINTS, 5_308_416);
    assert_eq!(single_step_vertices().len(), 24);
    assert!(count_extreme_points(Scenario::binary(3)).is_err());
}

#[test]
fn single_step_vertices_have_full_rank() {
    for (v, b) in single_step_vertices() {
        assert_eq!(single_step_vertex_rank(&b), 16, "vertex {v:?}");
    }
}

#[test]
fn lemma_one_points_with_a_pr_factor_leave_q() {
    let pr_first = compose_extreme_point(&ExtremePointSpec::uniform_choice(16, 0).unwrap()).unwrap();
    let v = membership_q(&pr_first, DEFAULT_TOL);
    assert!(membership_p(&pr_first, 1e-12).member);
    assert!(!v.member);
    assert!(v.violated.unwrap().contains("first"));

    let mut spec = ExtremePointSpec::uniform_choice(0, 0).unwrap();
    let h = History::single(0, 0, 1, 1).unwrap();
    spec.per_history.insert(h.clone(), 16);
    let v = membership_q(&compose_extreme_point(&spec).unwrap(), DEFAULT_TOL);
    assert!(!v.member);
    assert!(v.violated.unwrap().contains(&h.key()));
}

#[test]
fn tol_rejects_pr_first_and_signaling_between_steps() {
    let pr_first = compose_extreme_point(&ExtremePointSpec::uniform_choice(16, 0).unwrap()).unwrap();
    assert!(
        !membership_tol(&pr_first, GILBERT_TOL, GILBERT_MAX_ITERS)
            .unwrap()
            .member
    );

    // Deterministic first step; Bob's second outcome copies Alice's first setting.
    let mut spec = ExtremePointSpec::uniform_choice(0, 0).unwrap();
    for h in spec.per_history.clone().keys() {
        let x1 = h.steps()[0].x as usize;
        spec.per_history.insert(h.clone(), 3 * x1);
    }
    let c = compose_extreme_point(&spec).unwrap();
    assert!(membership_q(&c, DEFAULT_TOL).member);
    let v = membership_tol(&c, GILBERT_TOL, GILBERT_MAX_ITERS).unwrap();
    assert!(!v.member);
    assert!(v.margin > GILBERT_TOL);
}

#[test]
fn q_membership_implies_p_membership() {
    let mut rng = seeded(99);
    for i in 0..2000u64 {
        let c = if i % 2 == 0 {
            sample_q(i, 1 + (i % 7) as usize).unwrap()
        } else {
            compose_extreme_point(&ExtremePointSpec::random(&mut rng, false)).unwrap()
        };
        if membership_q(&c, DEFAULT_TOL).member {
            assert!(membership_p(&c, DEFAULT_TOL).member);
        }
    }
}

#[test]
fn chsh_values_are_linear() {
    let mut rng = seeded(17);
    let mut random_box = || {
        let mut p = [0.0; 16];
        for s in 0..4 {
            p[4 * s..4 * s + 4].copy_from_slice(&dirichlet_uniform(&mut rng, 4));
        }
        SingleStepBox::new(p)
    };
    for k in 0..10_000 {
        let (p, q) = (random_box(), random_box());
        let w = (k as f64 + 0.5) / 10_000.0;
        let mixed = chsh_values(&p.mix(&q, w));
        let (cp, cq) = (chsh_values(&p), chsh_values(&q));
        for i in 0..8 {
            assert!(close(mixed[i], w * cp[i] + (1.0 - w) * cq[i], 1e-12));
        }
        assert!(close(rescaled_chsh(&p), (4.0 + standard_chsh(&p)) / 2.0, 1e-12));
    }
}

fn boxes(c: &SequentialCorrelation) -> Vec<SingleStepBox> {
    let f = c.factorize(DEFAULT_TOL).unwrap();
    let mut out = vec![f.first];
    out.extend(f.conditionals.values().filter_map(Conditional::as_box).copied());
    out
}

#[test]
fn tsirelson_ceiling_on_random_strategies() {
    let mut worst = 0.0f64;
    for i in 0..10_000u64 {
        let dims = [1 + (i % 4) as usize, 1 + ((i / 4) % 4) as usize];
        let c = simulate(&random_strategy(31, i, dims, 2).unwrap()).unwrap();
        for b in boxes(&c) {
            worst = worst.max(chsh_values(&b).into_iter().fold(f64::MIN, f64::max));
        }
    }
    assert!(worst <= TSIRELSON + 1e-9, "{worst}");
}

#[test]
fn qubit_projective_conditionals_are_local() {
    let q = bounds(2).unwrap().qubit_projective;
    for i in 0..10_000u64 {
        let c = simulate(&random_qubit_projective_strategy(41, i).unwrap()).unwrap();
        let f = c.factorize(DEFAULT_TOL).unwrap();
        for b in f.conditionals.values().filter_map(Conditional::as_box) {
            assert!(is_local_box(b, 1e-9).unwrap().member, "strategy {i}");
        }
        assert!(concatenated_chsh(&c, DEFAULT_TOL).unwrap() <= q + 1e-9);
    }
}

#[test]
fn werner_and_demo_values() {
    let w = werner_state(2, 1.0).unwrap();
    let singlet = [0.0, 0.5, -0.5, 0.0];
    for r in 0..4 {
        for c in 0..4 {
            assert!((w.matrix()[(r, c)].re - singlet[r] * singlet[c] * 2.0).abs() < 1e-12);
        }
    }
    let report = hidden_nonlocality_demo(5, 0.8, 1).unwrap();
    assert!(report.first_step_local.member);
    assert!(close(report.post_filter_chsh, TSIRELSON * 5.0 / 7.0, 1e-6));
}

#[test]
fn substreams_are_reproducible() {
    use rand::Rng;
    let a: Vec<u64> = (0..4).map(|_| substream(5, 3).random()).collect();
    let b: Vec<u64> = (0..4).map(|_| substream(5, 3).random()).collect();
    assert_eq!(a, b);
    let mut s = substream(5, 3);
    let mut t = substream(5, 4);
    assert_ne!(s.random::<u64>(), t.random::<u64>());
}
