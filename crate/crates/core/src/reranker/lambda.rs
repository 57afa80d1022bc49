//! LambdaRank gradients.
//!
//! For a pair where row `i` has the higher grade, the pair weight is
//! `sigma * rho * |dNDCG|` with `rho = 1 / (1 + exp(sigma * (s_i - s_j)))`.
//! Row `i` receives `+weight` and row `j` receives `-weight`, so a positive
//! lambda means the score should go up. Second-order terms accumulate
//! `sigma^2 * rho * (1 - rho) * |dNDCG|` on both rows.

use super::metrics::{delta_ndcg_with_ideal, ideal_dcg, ranks_of};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaParams {
    pub sigma: f64,
    pub cutoff: usize,
    /// Multiply the pair weight by `sigma` (the outer factor). Off drops it.
    pub sigma_outer: bool,
}

impl Default for LambdaParams {
    fn default() -> Self {
        LambdaParams {
            sigma: 1.0,
            cutoff: 5,
            sigma_outer: true,
        }
    }
}

#[inline]
fn rho(sigma: f64, s_hi: f64, s_lo: f64) -> f64 {
    1.0 / (1.0 + (sigma * (s_hi - s_lo)).exp())
}

/// Magnitude of the lambda of one preference pair (higher-graded row first).
#[inline]
pub fn pair_lambda(s_hi: f64, s_lo: f64, delta: f64, params: &LambdaParams) -> f64 {
    let outer = if params.sigma_outer { params.sigma } else { 1.0 };
    outer * rho(params.sigma, s_hi, s_lo) * delta
}

/// Per-row lambdas and hessians for one query group.
pub fn lambda_pairs(grades: &[u32], scores: &[f64], params: &LambdaParams) -> (Vec<f64>, Vec<f64>) {
    let n = grades.len();
    let mut lambdas = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    if n < 2 {
        return (lambdas, hessians);
    }
    let ideal = ideal_dcg(grades, params.cutoff);
    if ideal == 0.0 {
        return (lambdas, hessians);
    }
    let ranks = ranks_of(scores);
    let outer = if params.sigma_outer { params.sigma } else { 1.0 };
    for i in 0..n {
        for j in 0..n {
            if grades[i] <= grades[j] {
                continue;
            }
            let delta = delta_ndcg_with_ideal(
                grades[i],
                grades[j],
                ranks[i],
                ranks[j],
                params.cutoff,
                ideal,
            );
            if delta == 0.0 {
                continue;
            }
            let r = rho(params.sigma, scores[i], scores[j]);
            let lambda = outer * r * delta;
            lambdas[i] += lambda;
            lambdas[j] -= lambda;
            let h = outer * params.sigma * r * (1.0 - r) * delta;
            hessians[i] += h;
            hessians[j] += h;
        }
    }
    (lambdas, hessians)
}
