use std::sync::Arc;
use std::thread;

use isbpol::cbalg::valid_keys;
use isbpol::{BigRational, CorrelatorKey, ExactCorrelators, FloatCorrelators};
use num_traits::{One, Signed, ToPrimitive};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(10_000) })]

    #[test]
    fn keys_off_the_selection_rule_vanish(
        n in 0i64..40, m in 0i64..40, s in 0i64..40, r in -1i64..40, n_el in 2u64..200,
    ) {
        prop_assume!(n + m != s + r + 1);
        let corr = ExactCorrelators::new(n_el);
        prop_assert_eq!(corr.k(n, m, s, r).unwrap(), BigRational::from_integer(0.into()));
    }
}

#[test]
fn exchange_and_shift_symmetries_are_exact() {
    for n_el in [2u64, 3, 5, 10] {
        let corr = ExactCorrelators::new(n_el);
        for key in (1..=8).flat_map(valid_keys) {
            let CorrelatorKey { n, m, s, r } = key;
            assert_eq!(corr.k(n, m, s, r).unwrap(), corr.k(m, n, r, s).unwrap(), "{key} N={n_el}");
        }
        for n in 0..=8i64 {
            for m in 0..=8 - n {
                if n >= 1 && m >= 1 {
                    assert_eq!(corr.k(n, m, n - 1, m).unwrap(), corr.k(n, m, n, m - 1).unwrap());
                }
            }
        }
    }
}

#[test]
fn norms_approach_one_monotonically() {
    for n in 0..=5i64 {
        for m in 1..=5i64 {
            let mut prev: Option<BigRational> = None;
            for n_el in [10u64, 100, 1_000, 10_000, 100_000, 1_000_000] {
                let k = ExactCorrelators::new(n_el).k(n, m, n, m - 1).unwrap();
                let dev = (k.clone() - BigRational::one()).abs();
                if let Some(p) = &prev {
                    assert!(dev <= *p, "K({n},{m},{n},{}) at N={n_el}", m - 1);
                }
                prev = Some(dev);
                if n_el == 1_000_000 {
                    let bound = 10.0 * (n * n + m * m) as f64 / 1e6;
                    assert!((k - BigRational::one()).abs().to_f64().unwrap() < bound);
                }
            }
        }
    }
}

#[test]
fn float_mode_matches_rational_mode() {
    for n_el in [7u64, 64, 1000] {
        let exact = ExactCorrelators::new(n_el);
        let float = FloatCorrelators::new(n_el);
        for key in (1..=10).flat_map(valid_keys) {
            let e = exact.k_key(key).unwrap().to_f64().unwrap();
            let f = float.k_key(key).unwrap().to_real();
            let scale = e.abs().max(1e-300);
            assert!((f - e).abs() / scale < 1e-10 || (f - e).abs() < 1e-14, "{key} N={n_el}: {f} vs {e}");
        }
    }
}

#[test]
fn concurrent_evaluation_is_order_independent() {
    let keys: Vec<CorrelatorKey> = (1..=9).flat_map(valid_keys).collect();
    let reference = ExactCorrelators::new(11);
    let want: Vec<BigRational> = keys.iter().map(|k| reference.k_key(*k).unwrap()).collect();

    let shared = Arc::new(ExactCorrelators::new(11));
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let corr = Arc::clone(&shared);
            let mut order = keys.clone();
            if t % 2 == 1 {
                order.reverse();
            }
            let shift = t * order.len() / 4;
            order.rotate_left(shift);
            thread::spawn(move || order.iter().map(|k| (*k, corr.k_key(*k).unwrap())).collect::<Vec<_>>())
        })
        .collect();
    for h in handles {
        for (key, v) in h.join().unwrap() {
            let i = keys.iter().position(|k| *k == key).unwrap();
            assert_eq!(v, want[i], "{key}");
        }
    }

    let float_a = FloatCorrelators::new(500);
    let float_b = FloatCorrelators::new(500);
    let big: Vec<CorrelatorKey> = [60i64, 120].iter().flat_map(|&t| valid_keys(t).step_by(17)).collect();
    let forward: Vec<f64> = big.iter().map(|k| float_a.k_key(*k).unwrap().to_real()).collect();
    let backward: Vec<f64> = big.iter().rev().map(|k| float_b.k_key(*k).unwrap().to_real()).collect();
    for (a, b) in forward.iter().zip(backward.iter().rev()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }
}
