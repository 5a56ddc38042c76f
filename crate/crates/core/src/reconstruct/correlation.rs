use crate::error::{Error, Result};
use crate::imaging::{Image, MeasurementSeries, PatternSequence};

use super::check_lengths;

/// Differential ghost-imaging estimate
/// `x(p) = (1/N) sum_n (I_n - mean I) (P_n(p) - mean_n P(p))`, shifted up
/// by its minimum when negative.
pub fn reconstruct_correlation(
    series: &MeasurementSeries,
    patterns: &PatternSequence,
) -> Result<Image> {
    check_lengths(series, patterns)?;
    let n = patterns.count();
    if n < 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            actual: n,
        });
    }
    let pixels = patterns.width() * patterns.height();
    let mean_i = series.values.iter().sum::<f64>() / n as f64;
    let mut mean_p = vec![0.0; pixels];
    for p in patterns.patterns() {
        for (m, &b) in mean_p.iter_mut().zip(p.bits()) {
            *m += b as f64;
        }
    }
    for m in mean_p.iter_mut() {
        *m /= n as f64;
    }
    let mut x = vec![0.0; pixels];
    for (p, &i) in patterns.patterns().iter().zip(&series.values) {
        let di = i - mean_i;
        for ((xv, &b), m) in x.iter_mut().zip(p.bits()).zip(&mean_p) {
            *xv += di * (b as f64 - m);
        }
    }
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    Image::new(
        patterns.width(),
        patterns.height(),
        x.into_iter()
            .map(|v| (v / n as f64 + shift / n as f64).max(0.0))
            .collect(),
    )
}
