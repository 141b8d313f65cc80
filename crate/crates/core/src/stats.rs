//! Box-plot summaries (Tukey 1.5 x IQR fences) and a two-sample rank-sum test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Name of the quantile convention written into every summary.
pub const QUANTILE_METHOD: &str = "linear_type7";

pub const FENCE_MULTIPLIER: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub fence_low: f64,
    pub fence_high: f64,
    /// Most extreme observations inside the fences.
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Observations strictly outside the fences, ascending.
    pub outliers: Vec<f64>,
    pub quantile_method: String,
}

/// Neumaier-compensated sum; keeps the mean of many identical values exact.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() - 1) as f64
}

/// Quantile of sorted data, interpolating linearly between order statistics
/// at position `(n - 1) * q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn summarize(samples: &[f64]) -> Result<BoxSummary> {
    if samples.is_empty() {
        return Err(Error::validation("cannot summarize an empty sample"));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::validation(format!("sample contains non-finite value {bad}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let fence_low = q1 - FENCE_MULTIPLIER * iqr;
    let fence_high = q3 + FENCE_MULTIPLIER * iqr;

    let inside = |v: &f64| *v >= fence_low && *v <= fence_high;
    // The median always lies within the fences, so `inside` is never empty.
    let whisker_low = *sorted.iter().find(|v| inside(v)).unwrap_or(&median);
    let whisker_high = *sorted.iter().rev().find(|v| inside(v)).unwrap_or(&median);
    let outliers = sorted.iter().copied().filter(|v| !inside(v)).collect();

    Ok(BoxSummary {
        n: sorted.len(),
        mean: mean(samples),
        median,
        q1,
        q3,
        iqr,
        fence_low,
        fence_high,
        whisker_low,
        whisker_high,
        outliers,
        quantile_method: QUANTILE_METHOD.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    pub n_a: usize,
    pub n_b: usize,
    /// Mann-Whitney U for the first sample (pairs where `a` wins, ties count half).
    pub u_a: f64,
    pub u_b: f64,
    pub z: f64,
    /// Two-sided, normal approximation with tie and continuity corrections.
    pub p_value: f64,
}

/// Mid-ranks (1-based) of `values`, plus the tie term `sum(t^3 - t)`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    (ranks, tie_term)
}

pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<RankSumResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("rank-sum test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::validation("rank-sum test input contains a non-finite value"));
    }
    let n_a = a.len() as f64;
    let n_b = b.len() as f64;
    let n = n_a + n_b;

    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    let rank_sum_b: f64 = ranks[a.len()..].iter().sum();
    let u_a = rank_sum_a - n_a * (n_a + 1.0) / 2.0;
    let u_b = rank_sum_b - n_b * (n_b + 1.0) / 2.0;

    let mu = n_a * n_b / 2.0;
    let variance = n_a * n_b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let (z, p_value) = if variance <= 0.0 || !variance.is_finite() {
        (0.0, 1.0)
    } else {
        let z = ((u_a - mu).abs() - 0.5).max(0.0) / variance.sqrt();
        (z, erfc(z / std::f64::consts::SQRT_2).min(1.0))
    };

    Ok(RankSumResult {
        n_a: a.len(),
        n_b: b.len(),
        u_a,
        u_b,
        z,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_data() {
        let s = summarize(&[5.0; 4]).unwrap();
        assert_eq!((s.median, s.iqr), (5.0, 0.0));
        assert!(s.outliers.is_empty());
        assert_eq!((s.whisker_low, s.whisker_high), (5.0, 5.0));
    }

    #[test]
    fn one_to_nine() {
        let data: Vec<f64> = (1..=9).map(f64::from).collect();
        let s = summarize(&data).unwrap();
        assert_eq!((s.median, s.q1, s.q3, s.iqr), (5.0, 3.0, 7.0, 4.0));
        assert_eq!((s.fence_low, s.fence_high), (-3.0, 13.0));
        assert!(s.outliers.is_empty());
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 9.0));
        assert_eq!(s.quantile_method, QUANTILE_METHOD);
    }

    #[test]
    fn flags_far_point() {
        let s = summarize(&[1.0, 1.0, 1.0, 1.0, 100.0]).unwrap();
        assert_eq!(s.outliers, vec![100.0]);
        assert_eq!(s.whisker_high, 1.0);
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(summarize(&[]).is_err());
        assert!(summarize(&[1.0, f64::NAN]).is_err());
        assert!(rank_sum_test(&[], &[1.0]).is_err());
    }

    #[test]
    fn single_value() {
        let s = summarize(&[0.25]).unwrap();
        assert_eq!((s.q1, s.median, s.q3, s.n), (0.25, 0.25, 0.25, 1));
    }

    #[test]
    fn mean_of_repeated_value_is_exact() {
        assert_eq!(mean(&vec![0.005; 10_000]), 0.005);
        assert_eq!(mean(&vec![0.017; 10_000]), 0.017);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = rank_sum_test(&a, &a).unwrap();
        assert_eq!(r.u_a, 12.5);
        assert!(r.p_value >= 0.99);
    }

    #[test]
    fn fully_separated_samples() {
        let r = rank_sum_test(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap();
        assert_eq!(r.u_a, 0.0);
        assert_eq!(r.u_b, 9.0);
    }

    #[test]
    fn all_tied_gives_p_one() {
        let r = rank_sum_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.u_a + r.u_b, 6.0);
    }

    #[test]
    fn midranks_handle_ties() {
        let (ranks, ties) = midranks(&[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(ranks, vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(ties, 6.0);
    }

    #[test]
    fn p_value_shrinks_with_offset() {
        let a: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut last = f64::INFINITY;
        for k in 0..12 {
            let b: Vec<f64> = a.iter().map(|v| v + 0.1 * k as f64 + 0.013).collect();
            let p = rank_sum_test(&a, &b).unwrap().p_value;
            assert!(p <= last, "offset {k}: {p} > {last}");
            last = p;
        }
        assert!(last < 0.01);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut data in proptest::collection::vec(-1e3f64..1e3, 1..40), seed in any::<u64>()) {
            let s1 = summarize(&data).unwrap();
            let mut rng = crate::rng::Stream::from_key(seed);
            for i in (1..data.len()).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                data.swap(i, j);
            }
            let s2 = summarize(&data).unwrap();
            prop_assert_eq!(s1.median, s2.median);
            prop_assert_eq!(s1.q1, s2.q1);
            prop_assert_eq!(s1.q3, s2.q3);
            prop_assert_eq!(s1.outliers, s2.outliers);
            prop_assert!((s1.mean - s2.mean).abs() <= 1e-9);
        }

        #[test]
        fn translation_equivariant(data in proptest::collection::vec(-100.0f64..100.0, 1..40), k in -50.0f64..50.0) {
            let s = summarize(&data).unwrap();
            let shifted: Vec<f64> = data.iter().map(|v| v + k).collect();
            let t = summarize(&shifted).unwrap();
            let tol = 1e-9;
            prop_assert!((t.median - s.median - k).abs() < tol);
            prop_assert!((t.q1 - s.q1 - k).abs() < tol);
            prop_assert!((t.q3 - s.q3 - k).abs() < tol);
            prop_assert!((t.mean - s.mean - k).abs() < tol);
            prop_assert!((t.iqr - s.iqr).abs() < tol);
        }

        #[test]
        fn box_invariants(data in proptest::collection::vec(-100.0f64..100.0, 1..60)) {
            let s = summarize(&data).unwrap();
            prop_assert!(s.q1 <= s.median && s.median <= s.q3);
            prop_assert_eq!(s.iqr, s.q3 - s.q1);
            let inside = data.iter().filter(|v| **v >= s.fence_low && **v <= s.fence_high).count();
            prop_assert_eq!(inside + s.outliers.len(), data.len());
            for o in &s.outliers {
                prop_assert!(*o < s.fence_low || *o > s.fence_high);
            }
        }

        #[test]
        fn rank_sum_is_symmetric(
            a in proptest::collection::vec(0u8..20, 1..25),
            b in proptest::collection::vec(0u8..20, 1..25),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = rank_sum_test(&a, &b).unwrap();
            let ba = rank_sum_test(&b, &a).unwrap();
            let product = (a.len() * b.len()) as f64;
            prop_assert_eq!(ab.u_a + ab.u_b, product);
            prop_assert_eq!(ba.u_a, product - ab.u_a);
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }
}
