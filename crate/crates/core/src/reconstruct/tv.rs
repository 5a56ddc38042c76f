//! Total-variation regularized reconstruction.
//!
//! Minimizes
//!
//! ```text
//! F(x) = min_d ||A x + d 1 - y||^2 + lambda * sum_edges phi(x_j - x_i)
//! ```
//!
//! over the image `x` (optionally boxed, `0 <= x <= upper`), where the edges are all
//! horizontal and vertical neighbour pairs (replicate boundary: no edge
//! crosses the border) and `phi(t) = sqrt(t^2 + eps^2) - eps` is a smoothed
//! absolute value. The detector offset `d` is eliminated in closed form,
//! `d = mean(y - A x)`, which turns the data term into `||C (A x - y)||^2`
//! with `C` the centering projector.
//!
//! The solver is accelerated projected gradient (FISTA) with optional
//! backtracking. A step that would raise the objective is discarded and the
//! momentum restarted, so the logged objective never increases.

use serde::{Deserialize, Serialize};

use super::operator::{center, SensingMatrix};
use super::{SolverConfig, StepPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
}

pub struct TvProblem<'a> {
    op: &'a SensingMatrix,
    y: &'a [f64],
    width: usize,
    height: usize,
    lambda: f64,
    eps: f64,
}

#[derive(Debug, Clone)]
pub struct TvSolution {
    pub image: Vec<f64>,
    pub offset: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<IterRecord>,
}

impl<'a> TvProblem<'a> {
    pub fn new(
        op: &'a SensingMatrix,
        y: &'a [f64],
        width: usize,
        height: usize,
        lambda: f64,
        eps: f64,
    ) -> Self {
        assert_eq!(op.cols(), width * height);
        assert_eq!(op.rows(), y.len());
        Self {
            op,
            y,
            width,
            height,
            lambda,
            eps,
        }
    }

    fn centered_residual(&self, ax: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = ax.iter().zip(self.y).map(|(a, b)| a - b).collect();
        center(&mut r);
        r
    }

    /// `||C (A x - y)||^2`.
    pub fn data_fidelity(&self, x: &[f64]) -> f64 {
        self.data_from_ax(&self.op.apply(x))
    }

    fn data_from_ax(&self, ax: &[f64]) -> f64 {
        self.centered_residual(ax).iter().map(|r| r * r).sum()
    }

    /// `2 A^T C (A x - y)`.
    pub fn data_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.data_gradient_from_ax(&self.op.apply(x))
    }

    fn data_gradient_from_ax(&self, ax: &[f64]) -> Vec<f64> {
        let r = self.centered_residual(ax);
        self.op.apply_t(&r).into_iter().map(|g| 2.0 * g).collect()
    }

    fn for_each_edge(&self, mut f: impl FnMut(usize, usize)) {
        let (w, h) = (self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    f(i, i + 1);
                }
                if y + 1 < h {
                    f(i, i + w);
                }
            }
        }
    }

    /// Smoothed anisotropic total variation.
    pub fn tv(&self, x: &[f64]) -> f64 {
        let eps = self.eps;
        let mut acc = 0.0;
        self.for_each_edge(|i, j| {
            let t = x[j] - x[i];
            acc += (t * t + eps * eps).sqrt() - eps;
        });
        acc
    }

    fn tv_gradient_into(&self, x: &[f64], g: &mut [f64], scale: f64) {
        if scale == 0.0 {
            return;
        }
        let eps = self.eps;
        self.for_each_edge(|i, j| {
            let t = x[j] - x[i];
            let r = (t * t + eps * eps).sqrt();
            if r == 0.0 {
                return;
            }
            let d = scale * t / r;
            g[j] += d;
            g[i] -= d;
        });
    }

    fn objective_from_ax(&self, x: &[f64], ax: &[f64]) -> f64 {
        self.data_from_ax(ax) + self.lambda * self.tv(x)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objective_from_ax(x, &self.op.apply(x))
    }

    pub fn offset(&self, x: &[f64]) -> f64 {
        let ax = self.op.apply(x);
        ax.iter().zip(self.y).map(|(a, b)| b - a).sum::<f64>() / self.y.len() as f64
    }

    pub fn solve(&self, x0: &[f64], cfg: &SolverConfig) -> Result<TvSolution> {
        let lo = if cfg.nonneg { 0.0 } else { f64::NEG_INFINITY };
        let hi = cfg.upper.unwrap_or(f64::INFINITY);
        let project = |v: &mut [f64]| {
            for x in v.iter_mut() {
                *x = x.clamp(lo, hi);
            }
        };
        let mut x = x0.to_vec();
        project(&mut x);
        let mut ax = self.op.apply(&x);
        let mut fx = self.objective_from_ax(&x, &ax);
        if !fx.is_finite() {
            return Err(Error::Diverged("non-finite initial objective".into()));
        }

        let mut yv = x.clone();
        let mut ay = ax.clone();
        let mut momentum_free = true;
        let mut t = 1.0f64;
        let mut lip = 2.0 * self.op.centered_norm_sq(30).max(f64::MIN_POSITIVE);
        let mut log = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        for iter in 1..=cfg.max_iters {
            iterations = iter;
            let fy = self.objective_from_ax(&yv, &ay);
            let mut gy = self.data_gradient_from_ax(&ay);
            self.tv_gradient_into(&yv, &mut gy, self.lambda);

            let (z, az, fz, step) = loop {
                let step = match cfg.step_policy {
                    StepPolicy::Fixed(s) => s,
                    StepPolicy::Backtracking => 1.0 / lip,
                };
                let mut z: Vec<f64> = yv.iter().zip(&gy).map(|(v, g)| v - step * g).collect();
                project(&mut z);
                let az = self.op.apply(&z);
                let fz = self.objective_from_ax(&z, &az);
                if let StepPolicy::Backtracking = cfg.step_policy {
                    let mut lin = 0.0;
                    let mut quad = 0.0;
                    for ((zi, yi), gi) in z.iter().zip(&yv).zip(&gy) {
                        let d = zi - yi;
                        lin += gi * d;
                        quad += d * d;
                    }
                    let bound = fy + lin + quad / (2.0 * step);
                    if !(fz <= bound + 1e-12 * fy.abs()) && lip < 1e300 {
                        lip *= 2.0;
                        continue;
                    }
                }
                break (z, az, fz, step);
            };
            if !fz.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite objective at iteration {iter}"
                )));
            }

            if fz > fx {
                if momentum_free {
                    if let StepPolicy::Fixed(s) = cfg.step_policy {
                        return Err(Error::Diverged(format!(
                            "objective increased with fixed step {s} at iteration {iter}"
                        )));
                    }
                    // no descent left at working precision
                    converged = true;
                    break;
                }
                t = 1.0;
                yv.clone_from(&x);
                ay.clone_from(&ax);
                momentum_free = true;
                continue;
            }

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            yv = z
                .iter()
                .zip(&x)
                .map(|(zi, xi)| zi + beta * (zi - xi))
                .collect();
            ay = az
                .iter()
                .zip(&ax)
                .map(|(a, b)| a + beta * (a - b))
                .collect();
            momentum_free = beta == 0.0;
            t = t_next;
            x = z;
            ax = az;

            let rel = (fx - fz) / fx.abs().max(f64::MIN_POSITIVE);
            fx = fz;
            if cfg.record_log {
                log.push(IterRecord {
                    iter,
                    objective: fz,
                    step,
                });
            }
            if rel < cfg.tol {
                converged = true;
                break;
            }
            if let StepPolicy::Backtracking = cfg.step_policy {
                lip *= 0.9;
            }
        }

        let offset = ax.iter().zip(self.y).map(|(a, b)| b - a).sum::<f64>() / self.y.len() as f64;
        Ok(TvSolution {
            image: x,
            offset,
            objective: fx,
            iterations,
            converged,
            log,
        })
    }
}
