mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tasep::model::{
    build_kernel, enumerate_states, successors, EventSet, StateCodec, DEFAULT_STATE_CAP,
};
use tasep::{LatticeState, SystemParams, TypeSpec};

fn params_strategy(max_n: usize, max_k: usize) -> impl Strategy<Value = SystemParams> {
    any::<u64>().prop_map(move |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::random_params(&mut rng, max_n, max_k)
    })
}

/// A successor is admissible when every occupied cell either kept its
/// particle, received the left neighbour's particle across a move, or got a
/// new arrival in cell 1.
fn admissible(from: &[u8], to: &[u8], k: usize) -> bool {
    let n = from.len();
    (0..n).all(|i| {
        let c = to[i];
        if c == 0 {
            return true;
        }
        if c as usize > k {
            return false;
        }
        let stayed = from[i] == c;
        let moved_in = i > 0 && from[i - 1] == c && from[i] == 0 && to[i - 1] == 0;
        let arrived = i == 0 && from[0] == 0;
        stayed || moved_in || arrived
    })
}

/// Particles that left a cell went right (or out of the last cell).
fn departures_explained(from: &[u8], to: &[u8]) -> bool {
    let n = from.len();
    (0..n).all(|i| {
        if from[i] == 0 || to[i] == from[i] {
            return true;
        }
        // vacated: moved to i+1 or exited
        to[i] == 0 && (i == n - 1 || (from[i + 1] == 0 && to[i + 1] == from[i]))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_are_stochastic(params in params_strategy(5, 3)) {
        let kernel = build_kernel(&params, DEFAULT_STATE_CAP).unwrap();
        prop_assert!(kernel.max_row_sum_error() <= 1e-12);
    }

    #[test]
    fn successors_respect_exclusion_and_types(params in params_strategy(5, 3)) {
        let k = params.n_types();
        for s in enumerate_states(&params, DEFAULT_STATE_CAP).unwrap() {
            let succ = successors(&s, &params);
            let total: f64 = succ.iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let mut prev: Option<&LatticeState> = None;
            for (t, prob) in &succ {
                prop_assert!(*prob > 0.0);
                prop_assert!(admissible(s.cells(), t.cells(), k), "{} -> {}", s, t);
                prop_assert!(departures_explained(s.cells(), t.cells()), "{} -> {}", s, t);
                let delta = t.occupied() as i64 - s.occupied() as i64;
                prop_assert!((-1..=1).contains(&delta));
                // merged and sorted
                if let Some(p) = prev {
                    prop_assert!(p < t);
                }
                prev = Some(t);
            }
        }
    }

    #[test]
    fn codec_is_bijective(n in 1usize..7, k in 1usize..4) {
        let codec = StateCodec::new(n, k);
        let count = codec.state_count() as u64;
        let mut seen = vec![false; count as usize];
        for code in 0..count {
            let s = codec.decode(code);
            prop_assert!(s.cells().iter().all(|&c| c as usize <= k));
            prop_assert_eq!(codec.encode(&s), code);
            prop_assert!(!seen[code as usize]);
            seen[code as usize] = true;
        }
    }
}

#[test]
fn arrival_and_exit_in_same_step() {
    let params = SystemParams::single(3, 0.5, 0.5, 0.5).unwrap();
    let succ = successors(&LatticeState::new(vec![0, 1, 1]), &params);
    let both = succ
        .iter()
        .find(|(s, _)| s.cells() == [1, 1, 0])
        .expect("arrival with simultaneous exit");
    assert!((both.1 - 0.25).abs() < 1e-15);
}

#[test]
fn every_state_exhaustively_stochastic_small_lattices() {
    for n in 1..=4 {
        for k in 1..=2 {
            let weights: Vec<f64> = (0..k).map(|i| (i + 1) as f64).collect();
            let total: f64 = weights.iter().sum();
            let types = weights
                .iter()
                .enumerate()
                .map(|(i, w)| TypeSpec::new(w / total, 0.3 + 0.2 * i as f64, 0.9 - 0.3 * i as f64))
                .collect();
            let params = SystemParams::new(n, 0.35, types).unwrap();
            let states = enumerate_states(&params, DEFAULT_STATE_CAP).unwrap();
            assert_eq!(states.len() as u128, params.state_count());
            for s in &states {
                let total: f64 = successors(s, &params).iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() <= 1e-12, "{s}");
            }
        }
    }
}

#[test]
fn single_type_kernel_matches_hand_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let params = common::params_with(&mut rng, 2, 1);
        let t = params.types()[0];
        let oracle = common::single_type_oracle(params.alpha(), t.hop_prob, t.exit_prob);
        let dense = build_kernel(&params, DEFAULT_STATE_CAP).unwrap().to_dense();
        for l in 0..4 {
            for r in 0..4 {
                assert!((dense[l][r] - oracle[l][r]).abs() <= 1e-15, "({l},{r})");
            }
        }
    }
}

#[test]
fn two_type_kernel_matches_hand_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut cases = vec![common::table_row1()];
    cases.extend((0..20).map(|_| common::params_with(&mut rng, 2, 2)));
    for params in cases {
        let oracle = common::two_type_oracle(&params);
        let dense = build_kernel(&params, DEFAULT_STATE_CAP).unwrap().to_dense();
        for l in 0..9 {
            for r in 0..9 {
                assert!((dense[l][r] - oracle[l][r]).abs() <= 1e-15, "({l},{r})");
            }
        }
    }
}

#[test]
fn events_never_share_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = common::params_with(&mut rng, 7, 2);
    for s in enumerate_states(&params, DEFAULT_STATE_CAP).unwrap() {
        let mut hits = [0; 7];
        for cells in EventSet::of(&s, &params).written_cells(7) {
            for c in cells {
                hits[c] += 1;
            }
        }
        assert!(hits.iter().all(|&h| h <= 1), "{s}");
    }
}
