//! Descriptive statistics against exact integer arithmetic and order-statistic
//! selection, and Welch's test against reference values.

use proptest::prelude::*;
use teleprobe_core::stats::{descriptive, median, welch_t_test, StatsError};

#[path = "fixtures/welch.rs"]
mod welch;

const REL: f64 = 1e-12;

/// Samples are multiples of 1/1024 so sums and squares are exact in i128.
const UNIT: f64 = 1024.0;

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs() || got == want
}

/// k-th smallest (0-based) by counting ranks, no sorting.
fn kth(values: &[i64], k: usize) -> i64 {
    *values
        .iter()
        .find(|&&v| {
            let below = values.iter().filter(|&&w| w < v).count();
            let at_most = values.iter().filter(|&&w| w <= v).count();
            below <= k && k < at_most
        })
        .unwrap()
}

/// Median of the order statistics lo..=hi, in sample units.
fn median_of_ranks(values: &[i64], lo: usize, hi: usize) -> f64 {
    let len = hi - lo + 1;
    let mid = lo + len / 2;
    if len % 2 == 1 {
        kth(values, mid) as f64 / UNIT
    } else {
        0.5 * (kth(values, mid - 1) as f64 / UNIT + kth(values, mid) as f64 / UNIT)
    }
}

struct Exact {
    mean: f64,
    std: f64,
    median: f64,
    iqr: f64,
}

fn exact(ks: &[i64]) -> Exact {
    let n = ks.len() as i128;
    let s: i128 = ks.iter().map(|&k| k as i128).sum();
    let ss: i128 = ks.iter().map(|&k| (k as i128) * (k as i128)).sum();
    // sum of squared deviations times n, in units of 1/1024^2
    let dev_n = n * ss - s * s;
    let std = if n > 1 {
        ((dev_n as f64) / ((n * (n - 1)) as f64)).sqrt() / UNIT
    } else {
        f64::NAN
    };
    let len = ks.len();
    let half = len.div_ceil(2);
    let iqr = median_of_ranks(ks, len - half, len - 1) - median_of_ranks(ks, 0, half - 1);
    Exact {
        mean: s as f64 / n as f64 / UNIT,
        std,
        median: median_of_ranks(ks, 0, len - 1),
        iqr,
    }
}

fn sample() -> impl Strategy<Value = Vec<i64>> {
    prop_oneof![
        // strictly positive, like durations and errors
        prop::collection::vec(1i64..10_000_000, 1..=1000),
        // few distinct values, many ties
        prop::collection::vec(prop::sample::select(vec![512i64, 1024, 4096, 9000]), 1..=200),
        // narrow spread far from zero
        prop::collection::vec(5_000_000i64..5_000_100, 1..=300),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 600, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn descriptive_matches_exact_oracle(ks in sample(), shuffle_seed in any::<u64>()) {
        let mut xs: Vec<f64> = ks.iter().map(|&k| k as f64 / UNIT).collect();
        // order must not matter
        let mut state = shuffle_seed | 1;
        for i in (1..xs.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            xs.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let want = exact(&ks);
        let got = descriptive(&xs).unwrap();
        prop_assert_eq!(got.n, ks.len());
        prop_assert!(close(got.mean, want.mean, REL), "mean {} vs {}", got.mean, want.mean);
        prop_assert_eq!(got.median, want.median);
        prop_assert_eq!(median(&xs), Some(want.median));
        if ks.len() >= 2 {
            let std = got.std().unwrap();
            prop_assert!(close(std, want.std, REL), "std {} vs {}", std, want.std);
            prop_assert_eq!(got.iqr().unwrap(), want.iqr);
            let cov = got.cov().unwrap();
            prop_assert!(close(cov, want.std / want.mean, 4.0 * REL), "cov {} vs {}", cov, want.std / want.mean);
        } else {
            prop_assert_eq!(got.std(), Err(StatsError::TooFew(1)));
            prop_assert_eq!(got.iqr(), Err(StatsError::TooFew(1)));
        }
    }

    #[test]
    fn welch_is_antisymmetric(
        a in prop::collection::vec(-1e4..1e4f64, 2..60),
        b in prop::collection::vec(-1e4..1e4f64, 2..60),
    ) {
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert_eq!(ab.dof, ba.dof);
        prop_assert_eq!(ab.p, ba.p);
        prop_assert!((0.0..=1.0).contains(&ab.p));
        let n = (a.len() + b.len()) as f64;
        prop_assert!(ab.dof >= (a.len().min(b.len()) - 1) as f64 - 1e-9 && ab.dof <= n - 2.0 + 1e-9);
    }

    #[test]
    fn welch_identical_samples_give_p_one(a in prop::collection::vec(-1e4..1e4f64, 2..60)) {
        prop_assume!(a.iter().any(|&x| x != a[0]));
        let r = welch_t_test(&a, &a).unwrap();
        prop_assert_eq!(r.t, 0.0);
        prop_assert_eq!(r.p, 1.0);
    }
}

#[test]
fn welch_matches_reference_values() {
    assert!(welch::WELCH_FIXTURES.len() >= 20);
    for (i, &(a, b, t, dof, p)) in welch::WELCH_FIXTURES.iter().enumerate() {
        let r = welch_t_test(a, b).unwrap();
        assert!(close(r.t, t, 1e-6), "case {i}: t {} vs {t}", r.t);
        assert!(close(r.dof, dof, 1e-6), "case {i}: dof {} vs {dof}", r.dof);
        assert!(close(r.p, p, 1e-6), "case {i}: p {} vs {p}", r.p);
    }
}

#[test]
fn welch_rejects_degenerate_input() {
    assert_eq!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(StatsError::TooFew(1)));
    assert_eq!(welch_t_test(&[2.0, 2.0], &[3.0, 3.0]), Err(StatsError::DegenerateVariance));
    assert_eq!(welch_t_test(&[], &[3.0, 3.0]), Err(StatsError::Empty));
    assert_eq!(welch_t_test(&[f64::NAN, 1.0], &[3.0, 4.0]), Err(StatsError::NonFinite));
}

#[test]
fn cov_of_zero_mean_is_an_error() {
    let s = descriptive(&[-1.0, 1.0]).unwrap();
    assert_eq!(s.cov(), Err(StatsError::ZeroMean));
}
