mod common;

use common::{brute_force_capacities, capacity_of_rows, equivalence_gap, generator, matrix_encode, random_rows};
use proptest::prelude::*;
use qpolar::alphabet::KernelSpec;
use qpolar::channel::JointDist;
use qpolar::construct::construct_all;
use qpolar::merge::MergePolicy;
use qpolar::sc::encode;
use qpolar::transform::{minus_transform, plus_transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernels(q: usize) -> Vec<KernelSpec> {
    let mut ks = vec![KernelSpec::mod_add(q).unwrap(), KernelSpec::sasoglu(q).unwrap()];
    if let Ok(k) = KernelSpec::field_gamma(q, None) {
        ks.push(k);
    }
    ks
}

#[test]
fn leaves_match_enumeration_without_merging() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in [2, 3] {
        for n in 1..=2 {
            for _ in 0..3 {
                let m = rng.gen_range(2..=4);
                let rows = random_rows(&mut rng, q, m);
                let d = JointDist::from_transition_rows(&rows).unwrap();
                for k in kernels(q) {
                    let got = construct_all(&d, &k, n, &MergePolicy::unbounded()).unwrap();
                    let want = brute_force_capacities(&rows, 1 << n, |u| encode(u, &k).unwrap());
                    for (r, w) in got.iter().zip(&want) {
                        assert!((r.capacity - w).abs() < 1e-9, "{k} n={n} i={}: {} vs {w}", r.index, r.capacity);
                    }
                }
            }
        }
    }
}

#[test]
fn mod_add_leaves_match_generator_matrix() {
    // independent of the recursive encoder: x = u B_N F^{(x)n} mod q
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for q in [2, 3] {
        let rows = random_rows(&mut rng, q, 3);
        let d = JointDist::from_transition_rows(&rows).unwrap();
        let k = KernelSpec::mod_add(q).unwrap();
        let g = generator(2);
        let got = construct_all(&d, &k, 2, &MergePolicy::unbounded()).unwrap();
        let want = brute_force_capacities(&rows, 4, |u| matrix_encode(u, &g, q));
        for (r, w) in got.iter().zip(&want) {
            assert!((r.capacity - w).abs() < 1e-9);
        }
    }
}

#[test]
fn root_capacity_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for q in 2..=6 {
        let rows = random_rows(&mut rng, q, 5);
        let d = JointDist::from_transition_rows(&rows).unwrap();
        assert!((d.symmetric_capacity() - capacity_of_rows(&rows)).abs() < 1e-12);
    }
}

#[test]
fn chain_rule_on_random_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for t in 0..200 {
        let q = [2, 3, 4, 5, 8][t % 5];
        let m = rng.gen_range(2..=6);
        let d = JointDist::from_transition_rows(&random_rows(&mut rng, q, m)).unwrap();
        for k in kernels(q) {
            let sum = minus_transform(&d, &k).unwrap().symmetric_capacity()
                + plus_transform(&d, &k).unwrap().symmetric_capacity();
            assert!((sum - 2.0 * d.symmetric_capacity()).abs() < 1e-10, "{k}");
        }
    }
}

#[test]
fn equivalent_channels_stay_equivalent() {
    let ks = [
        KernelSpec::mod_add(3).unwrap(),
        KernelSpec::mod_add(4).unwrap(),
        KernelSpec::field_gamma(3, None).unwrap(),
        KernelSpec::field_gamma(4, None).unwrap(),
    ];
    for (i, k) in ks.iter().enumerate() {
        let m = if k.q() == 3 { 2 } else { 1 };
        for s in 0..3 {
            let dh = equivalence_gap(k, m, 100 * i as u64 + s);
            assert!(dh <= 1e-9, "{k}: {dh}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn equivalence_property(seed in any::<u64>(), which in 0usize..4) {
        let k = match which {
            0 => KernelSpec::mod_add(3).unwrap(),
            1 => KernelSpec::mod_add(2).unwrap(),
            2 => KernelSpec::field_gamma(3, None).unwrap(),
            _ => KernelSpec::field_gamma(4, None).unwrap(),
        };
        let m = if k.q() == 4 { 1 } else { 2 };
        prop_assert!(equivalence_gap(&k, m, seed) <= 1e-9);
    }
}
