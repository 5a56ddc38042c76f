//! Global binarization thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    #[default]
    Otsu,
    Midpoint,
}

/// Exact Otsu threshold over the sample values: the split of the sorted
/// values maximizing between-class variance. Values `<= t` form the lower
/// class. `None` when all values are equal.
pub fn otsu(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n < 2 || v[0] == v[n - 1] {
        return None;
    }
    let total: f64 = v.iter().sum();
    let mut lower_sum = 0.0;
    let mut best = (f64::NEG_INFINITY, v[0]);
    for k in 1..n {
        lower_sum += v[k - 1];
        if v[k] == v[k - 1] {
            continue;
        }
        let w0 = k as f64;
        let w1 = (n - k) as f64;
        let m0 = lower_sum / w0;
        let m1 = (total - lower_sum) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, v[k - 1]);
        }
    }
    Some(best.1)
}

pub fn midpoint(values: &[f64]) -> Option<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo < hi).then_some(0.5 * (lo + hi))
}

/// Threshold under `policy`; Otsu falls back to the midpoint if it finds no
/// split. Constant input is an error.
pub fn threshold(values: &[f64], policy: ThresholdPolicy) -> Result<f64> {
    let t = match policy {
        ThresholdPolicy::Otsu => otsu(values).or_else(|| midpoint(values)),
        ThresholdPolicy::Midpoint => midpoint(values),
    };
    t.ok_or(Error::Degenerate("constant intensity"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn otsu_separates_two_clusters() {
        let v = [0.1, 0.12, 0.09, 0.11, 0.9, 0.88, 0.91];
        let t = otsu(&v).unwrap();
        assert_eq!(t, 0.12);
    }

    #[test]
    fn ties_go_to_lower_class() {
        let v = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(otsu(&v), Some(0.0));
        assert_eq!(midpoint(&v), Some(0.5));
    }

    #[test]
    fn constant_is_degenerate() {
        assert!(threshold(&[2.0; 5], ThresholdPolicy::Otsu).is_err());
        assert!(threshold(&[2.0; 5], ThresholdPolicy::Midpoint).is_err());
    }

    #[test]
    fn otsu_matches_brute_force() {
        let mut s = crate::rng::Stream::new(4, crate::rng::domain::TEST);
        for _ in 0..50 {
            let v: Vec<f64> = (0..40).map(|_| (s.below(10) as f64) * 0.1).collect();
            let Some(t) = otsu(&v) else { continue };
            let score = |t: f64| {
                let (lo, hi): (Vec<f64>, Vec<f64>) = v.iter().partition(|&&x| x <= t);
                if lo.is_empty() || hi.is_empty() {
                    return f64::NEG_INFINITY;
                }
                let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
                let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
                lo.len() as f64 * hi.len() as f64 * (m0 - m1).powi(2)
            };
            for &c in &v {
                assert!(score(c) <= score(t) + 1e-9);
            }
        }
    }
}
