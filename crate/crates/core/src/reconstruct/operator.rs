use rayon::prelude::*;

use crate::imaging::PatternSequence;

/// Dense pattern matrix `A` (one row per pattern) with a transposed copy
/// for `A^T r`. Every output element is a sequential sum in index order, so
/// results do not depend on the thread count.
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    at: Vec<f64>,
}

impl SensingMatrix {
    pub fn new(patterns: &PatternSequence) -> Self {
        let rows = patterns.count();
        let cols = patterns.width() * patterns.height();
        let mut a = Vec::with_capacity(rows * cols);
        for p in patterns.patterns() {
            a.extend(p.bits().iter().map(|&b| b as f64));
        }
        let mut at = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                at[c * rows + r] = a[r * cols + c];
            }
        }
        Self { rows, cols, a, at }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.a
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.a
            .par_chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_t(&self, r: &[f64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.rows);
        self.at
            .par_chunks(self.rows)
            .map(|col| col.iter().zip(r).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest eigenvalue of `A^T C A`, C the centering projector, by power
    /// iteration.
    pub fn centered_norm_sq(&self, iters: usize) -> f64 {
        let mut v = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        // start away from the all-ones direction the centering removes
        for (i, x) in v.iter_mut().enumerate() {
            if i % 2 == 1 {
                *x = -*x;
            }
        }
        let mut lambda = 0.0;
        for _ in 0..iters {
            let mut av = self.apply(&v);
            center(&mut av);
            let w = self.apply_t(&av);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm;
            v = w.into_iter().map(|x| x / norm).collect();
        }
        lambda
    }
}

pub fn center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}
