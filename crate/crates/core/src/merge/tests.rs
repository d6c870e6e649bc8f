use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::alphabet::KernelSpec;
use crate::channel::ChannelFamily;
use crate::transform::plus_transform;

fn random_channel(rng: &mut ChaCha8Rng, q: usize, m: usize) -> JointDist {
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|_| {
            let r: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 0.01).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect();
    JointDist::from_transition_rows(&rows).unwrap()
}

/// Distribution without the uniform input marginal (merging does not need it).
fn raw(q: usize, py: Vec<f64>, post: Vec<f64>) -> JointDist {
    JointDist::from_parts(q, py, post)
}

fn total_entropy(d: &JointDist) -> f64 {
    d.conditional_entropy()
}

#[test]
fn identical_rows_merge_for_free() {
    let d = raw(3, vec![0.25, 0.25, 0.5], vec![0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.1, 0.1, 0.8]);
    assert_eq!(merge_cost(&d, ShiftGroup::Cyclic, 0, 1, 0).unwrap(), 0.0);
    let m = merge_pair(&d, 0, 1, 0).unwrap();
    assert_eq!(m.out_size(), 2);
    assert!((m.conditional_entropy() - d.conditional_entropy()).abs() < 1e-15);
}

#[test]
fn shifted_rows_merge_for_free_with_matching_shift() {
    // row 1 is row 0 rotated: post1[x + 2] = post0[x]
    let d = raw(3, vec![0.3, 0.7], vec![0.1, 0.2, 0.7, 0.2, 0.7, 0.1]);
    let costs: Vec<f64> = (0..3).map(|u| merge_cost(&d, ShiftGroup::Cyclic, 0, 1, u).unwrap()).collect();
    assert!(costs[2] < 1e-15, "{costs:?}");
    assert!(costs[0] > 1e-3 && costs[1] > 1e-3);
    let m = merge_pair(&d, 0, 1, 2).unwrap();
    assert!((m.conditional_entropy() - d.conditional_entropy()).abs() < 1e-14);
    assert_eq!(choose(&d).unwrap(), (0, 1, 2));
}

#[test]
fn merge_cost_matches_recomputed_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let d = random_channel(&mut rng, 3, 3);
        for y1 in 0..3 {
            for y2 in 0..3 {
                if y1 == y2 {
                    continue;
                }
                for u in 0..3 {
                    let m = merge_pair(&d, y1, y2, u).unwrap();
                    let dh = total_entropy(&m) - total_entropy(&d);
                    let c = merge_cost(&d, ShiftGroup::Cyclic, y1, y2, u).unwrap();
                    assert!(dh >= -1e-14);
                    assert!((dh - c).abs() < 1e-12, "{dh} vs {c}");
                }
            }
        }
    }
}

#[test]
fn merge_pair_layout_and_errors() {
    let d = raw(2, vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
    let m = merge_pair(&d, 2, 0, 0).unwrap();
    assert_eq!(m.py(), &[0.7, 0.3]);
    assert!((m.posterior(0)[0] - 0.2 / 0.7).abs() < 1e-15);
    assert_eq!(m.posterior(1), &[0.5, 0.5]);
    assert!(merge_pair(&d, 1, 1, 0).is_err());
    assert!(merge_pair(&d, 0, 3, 0).is_err());
    assert!(merge_pair(&d, 0, 1, 2).is_err());
}

#[test]
fn l1_bound_on_opposite_rows() {
    let d = JointDist::new(2, vec![0.5, 0.5], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let bound = l1_loss_bound(&d, 0, 1).unwrap();
    assert!((bound - 2.0 / std::f64::consts::LN_2).abs() < 1e-12);
    let merged = merge_pair(&d, 0, 1, 0).unwrap();
    let loss = d.symmetric_capacity() - merged.symmetric_capacity();
    assert!((loss - 1.0).abs() < 1e-12);
    assert!(loss <= bound);
    let same = raw(2, vec![0.5, 0.5], vec![0.3, 0.7, 0.3, 0.7]);
    assert_eq!(l1_loss_bound(&same, 0, 1).unwrap(), 0.0);
}

#[test]
fn l1_bound_holds_on_random_merges() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let q = rng.gen_range(2..=5);
        let m = rng.gen_range(2..=6);
        let d = random_channel(&mut rng, q, m);
        let y1 = rng.gen_range(0..m);
        let y2 = (y1 + rng.gen_range(1..m)) % m;
        let loss = d.symmetric_capacity() - merge_pair(&d, y1, y2, 0).unwrap().symmetric_capacity();
        assert!(loss <= l1_loss_bound(&d, y1, y2).unwrap() + 1e-12);
    }
}

#[test]
fn canonical_rotation() {
    let (c, s) = canonicalize_cyclic(&[0.1, 0.2, 0.7]);
    assert_eq!(c, vec![0.7, 0.1, 0.2]);
    assert_eq!(s, 2);
    let (c, s) = canonicalize_cyclic(&[0.25; 4]);
    assert_eq!((c, s), (vec![0.25; 4], 0));
    let p = [0.05, 0.4, 0.15, 0.3, 0.1];
    let r: Vec<f64> = (0..5).map(|x| p[(x + 2) % 5]).collect();
    assert_eq!(canonicalize_cyclic(&p).0, canonicalize_cyclic(&r).0);
}

#[test]
fn canonical_xor() {
    let p = [0.1, 0.2, 0.3, 0.4];
    let r: Vec<f64> = (0..4).map(|x| p[x ^ 3]).collect();
    assert_eq!(
        canonicalize_in(&p, ShiftGroup::Xor, DEFAULT_TOL).0,
        canonicalize_in(&r, ShiftGroup::Xor, DEFAULT_TOL).0
    );
}

fn qsc4() -> (JointDist, KernelSpec) {
    (
        ChannelFamily::Qsc { q: 4, eps: 0.15 }.build().unwrap(),
        KernelSpec::mod_add(4).unwrap(),
    )
}

#[test]
fn effective_sizes_of_plus_channels() {
    let (mut d, k) = qsc4();
    let mut sizes = Vec::new();
    for _ in 0..3 {
        d = plus_transform(&d, &k).unwrap();
        let h = d.conditional_entropy();
        let r = reduce_no_loss(&d, DEFAULT_TOL);
        assert!((r.conditional_entropy() - h).abs() < 1e-12);
        sizes.push(r.out_size());
        d = r;
    }
    assert!(sizes[0] <= 3 && sizes[1] <= 24 && sizes[2] <= 1200, "{sizes:?}");
}

#[test]
fn noiseless_collapses_to_one_symbol() {
    let d = ChannelFamily::Qsc { q: 4, eps: 0.0 }.build().unwrap();
    assert_eq!(reduce_no_loss(&d, DEFAULT_TOL).out_size(), 1);
}

#[test]
fn binary_conjugates_merge_losslessly() {
    let d = ChannelFamily::Bsc { eps: 0.11 }.build().unwrap();
    let r = reduce_no_loss(&d, 0.0);
    assert_eq!(r.out_size(), 1);
    assert_eq!(r.conditional_entropy(), d.conditional_entropy());
}

#[test]
fn premerge_count_and_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = random_channel(&mut rng, 4, 3);
    let k = KernelSpec::mod_add(4).unwrap();
    let p = plus_transform(&d, &k).unwrap();
    assert_eq!(p.out_size(), 36);
    // fixed points of (v, i, j) -> (-v, j, i): v in {0, 2}, i == j
    let fixed = (0..4usize)
        .flat_map(|v| (0..3usize).map(move |i| (v, i)))
        .filter(|&(v, _)| negate(4, v) == v)
        .count();
    let pm = plus_premerge(&p).unwrap();
    assert_eq!(pm.out_size(), (36 + fixed).div_ceil(2));
    assert_eq!(pm.out_size(), 21);
    assert!((pm.conditional_entropy() - p.conditional_entropy()).abs() < 1e-12);
    let twice = plus_premerge(&pm).unwrap();
    assert_eq!(twice, pm);
}

#[test]
fn premerge_preserves_qsc_capacity() {
    let (d, k) = qsc4();
    let p = plus_transform(&d, &k).unwrap();
    let pm = plus_premerge(&p).unwrap();
    assert!((pm.symmetric_capacity() - p.symmetric_capacity()).abs() < 1e-12);
    let clean = ChannelFamily::Qsc { q: 4, eps: 0.0 }.build().unwrap();
    let pc = plus_premerge(&plus_transform(&clean, &k).unwrap()).unwrap();
    assert!(pc.conditional_entropy().abs() < 1e-15);
}

#[test]
fn premerge_rejects_other_inputs() {
    let (d, k) = qsc4();
    assert!(plus_premerge(&d).is_err());
    assert!(plus_premerge(&crate::transform::minus_transform(&d, &k).unwrap()).is_err());
    let kf = KernelSpec::field_gamma(4, None).unwrap();
    assert!(plus_premerge(&plus_transform(&d, &kf).unwrap()).is_err());
}

fn brute_choose(d: &JointDist) -> (usize, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0, 0);
    for y1 in 0..d.out_size() {
        for y2 in y1 + 1..d.out_size() {
            for u in 0..d.q() {
                let m = merge_pair(d, y1, y2, u).unwrap();
                let dh = m.conditional_entropy() - d.conditional_entropy();
                if dh < best.0 - 1e-13 {
                    best = (dh, y1, y2, u);
                }
            }
        }
    }
    (best.1, best.2, best.3)
}

#[test]
fn choose_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let d = random_channel(&mut rng, 3, 4);
        assert_eq!(choose(&d).unwrap(), brute_choose(&d));
    }
    let single = JointDist::new(2, vec![1.0], vec![0.5, 0.5]).unwrap();
    assert!(choose(&single).is_err());
}

#[test]
fn choose_prefers_identical_rows() {
    let d = raw(
        3,
        vec![0.2, 0.3, 0.1, 0.4],
        vec![0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 0.05, 0.9, 0.05, 0.2, 0.2, 0.6],
    );
    assert_eq!(choose(&d).unwrap(), (1, 3, 0));
}

/// Reference for exact greedy: repeated `choose` + `merge_pair`.
fn reference_greedy(d: &JointDist, group: ShiftGroup, mu: usize) -> JointDist {
    let mut d = d.clone();
    while d.out_size() > mu {
        let (a, b, u) = choose_in(&d, group).unwrap();
        d = merge_pair_in(&d, group, a, b, u).unwrap();
    }
    d
}

#[test]
fn degrade_equals_repeated_choose() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (q, group) in [(3, ShiftGroup::Cyclic), (4, ShiftGroup::Xor), (4, ShiftGroup::Trivial)] {
        let d = random_channel(&mut rng, q, 40);
        let policy = MergePolicy {
            rule: MergeRule::GreedyExact,
            ..MergePolicy::algorithm2(12)
        };
        let got = degrade(&d, &policy, group).unwrap();
        let want = reference_greedy(&d, group, 12);
        assert_eq!(got.out_size(), 12);
        for (a, b) in got.posteriors().iter().zip(want.posteriors()) {
            assert!((a - b).abs() < 1e-13);
        }
        for (a, b) in got.py().iter().zip(want.py()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn pairs_only_never_shifts() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = random_channel(&mut rng, 3, 25);
    let got = degrade(&d, &MergePolicy::plain_greedy(6), ShiftGroup::Cyclic).unwrap();
    let want = reference_greedy(&d, ShiftGroup::Trivial, 6);
    for (a, b) in got.posteriors().iter().zip(want.posteriors()) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn degrade_small_input_unchanged() {
    let (d, _) = qsc4();
    let out = degrade(&d, &MergePolicy::algorithm2(16), ShiftGroup::Cyclic).unwrap();
    assert_eq!(out, d);
}

#[test]
fn policy_validation() {
    assert!(MergePolicy::algorithm2(3).validate(4).is_err());
    assert!(MergePolicy::threshold_l1(8, 0.0, 2.0).validate(4).is_err());
    assert!(MergePolicy::threshold_l1(8, 10.0, 2.0).validate(4).is_ok());
}

#[test]
fn large_inputs_use_candidate_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let d = random_channel(&mut rng, 4, 3000);
    for policy in [
        MergePolicy::algorithm2(64),
        MergePolicy::plain_greedy(64),
        MergePolicy::threshold_l1(64, 10.0, 2.0),
    ] {
        let a = degrade(&d, &policy, ShiftGroup::Cyclic).unwrap();
        let b = degrade(&d, &policy, ShiftGroup::Cyclic).unwrap();
        assert_eq!(a, b);
        assert!(a.out_size() <= 64);
        assert!((a.py().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.conditional_entropy() >= d.conditional_entropy() - 1e-12);
    }
}

proptest! {
    #[test]
    fn degrade_never_decreases_entropy(seed in any::<u64>(), q in 2usize..6, m in 2usize..40, mu_extra in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_channel(&mut rng, q, m);
        let mu = q + mu_extra;
        for policy in [MergePolicy::algorithm2(mu), MergePolicy::plain_greedy(mu), MergePolicy::threshold_l1(mu, 10.0, 2.0)] {
            let out = degrade(&d, &policy, ShiftGroup::Cyclic).unwrap();
            prop_assert!(out.out_size() <= mu);
            prop_assert!(out.conditional_entropy() >= d.conditional_entropy() - 1e-12);
            prop_assert!((out.py().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reduce_no_loss_of_shuffled_copy(seed in any::<u64>(), q in 2usize..6, m in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_channel(&mut rng, q, m);
        // append a rotated copy of every row with half of its mass moved over
        let mut py = Vec::new();
        let mut post = Vec::new();
        for y in 0..d.out_size() {
            let s = rng.gen_range(0..q);
            py.push(d.py()[y] / 2.0);
            post.extend_from_slice(d.posterior(y));
            py.push(d.py()[y] / 2.0);
            post.extend((0..q).map(|x| d.posterior(y)[(x + s) % q]));
        }
        let doubled = raw(q, py, post);
        let r = reduce_no_loss(&doubled, DEFAULT_TOL);
        prop_assert!(r.out_size() <= d.out_size());
        prop_assert!((r.conditional_entropy() - d.conditional_entropy()).abs() < 1e-12);
    }
}

#[test]
fn sparse_phase_tracks_exact_greedy() {
    let (w, k) = qsc4();
    let mut d = w;
    for plus in [true, false, true] {
        let t = if plus { plus_transform(&d, &k).unwrap() } else { crate::transform::minus_transform(&d, &k).unwrap() };
        d = degrade(&t, &MergePolicy::plain_greedy(24), ShiftGroup::Trivial).unwrap();
    }
    let t = plus_transform(&d, &k).unwrap();
    for group in [ShiftGroup::Trivial, ShiftGroup::Cyclic] {
        let loss = |limit: usize| {
            let mut e = greedy::Engine::new(&t, group);
            e.greedy_with_limit(64, limit);
            t.symmetric_capacity() - e.finish().symmetric_capacity()
        };
        let (exact, sparse) = (loss(usize::MAX), loss(128));
        assert!(sparse <= 1.02 * exact + 1e-9, "{group:?}: {sparse} vs {exact}");
    }
}
