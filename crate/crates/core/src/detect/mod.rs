//! Sparsity-adapted MAP detection with majority voting.
//!
//! Per frame the combined statistic is compared against
//! `eta(lambda, p) = sigma^2 / mu * ln((1 - p) / (lambda p)) + mu / 2`,
//! the `N_f` hard decisions are majority-voted, and the bias `lambda >= 1`
//! is chosen to minimize the closed-form bit error rate.

mod ber;
mod sparsity;

pub use ber::{
    analytic_ber, binomial_tail_above, majority_vote, optimize_lambda, optimize_lambda_with,
    per_frame_error_probs, ErrorModel, LambdaSearch, OptimizedLambda,
};
pub use sparsity::{
    em_refine, estimate_sparsity, EmEstimator, MomentEstimator, OracleEstimator, SparsityEstimate,
    SparsityEstimator, SparsityMethod, MIN_STATISTICS,
};

use crate::error::{Error, Result};
use crate::events::assemble_values;
use crate::rake::{FrameStatistics, LinkMoments};

/// Prior clamp `eps_p` applied before computing a threshold.
pub const PRIOR_EPS: f64 = 1e-4;

/// Gaussian tail `Q(x) = 1 - Phi(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn clamp_prior(p: f64) -> f64 {
    p.clamp(PRIOR_EPS, 1.0 - PRIOR_EPS)
}

/// MAP threshold for prior `p` and bias `lambda`.
pub fn map_threshold(lambda: f64, p: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(lambda >= 1.0) {
        return Err(Error::Config(format!(
            "bias lambda = {lambda} must be >= 1"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Numerical(format!(
            "prior p = {p} is degenerate; clamp it into (0, 1)"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::Numerical(format!("no signal: mu = {mu}")));
    }
    Ok(sigma * sigma / mu * ((1.0 - p) / (lambda * p)).ln() + mu / 2.0)
}

/// Hard per-frame decision: one iff `y > eta`.
#[inline]
pub fn detect_frame(y: f64, eta: f64) -> u8 {
    (y > eta) as u8
}

/// Everything the detector needs for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub lambda: f64,
    pub prior: f64,
    pub moments: LinkMoments,
    pub frames: usize,
}

impl DetectionConfig {
    pub fn threshold(&self) -> Result<f64> {
        map_threshold(
            self.lambda,
            clamp_prior(self.prior),
            self.moments.mu,
            self.moments.sigma,
        )
    }

    /// Detect and vote every bit of a bit-major `N_b x N_f` statistic slice.
    pub fn detect_stream(&self, ys: &[f64]) -> Result<Vec<u8>> {
        let eta = self.threshold()?;
        let mut frame_bits = vec![0u8; self.frames];
        ys.chunks_exact(self.frames)
            .map(|chunk| {
                for (b, &y) in frame_bits.iter_mut().zip(chunk) {
                    *b = detect_frame(y, eta);
                }
                majority_vote(&frame_bits)
            })
            .collect()
    }
}

/// Per-user outcome of [`reconstruct_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct UserDecision {
    pub prior: f64,
    pub lambda: f64,
    pub eta: f64,
    pub analytic_ber: f64,
}

/// Detect every user's stream with its own estimated prior and optimal
/// bias, then reassemble the bits in frame scan order (`H x W x 2`).
///
/// Detection errors can set both polarity bits of a pixel, a state no valid
/// [`crate::events::EventFrame`] holds, so the estimate is returned as raw
/// bits rather than a frame.
pub fn reconstruct_frame(
    stats: &FrameStatistics,
    estimates: &[SparsityEstimate],
    search: &LambdaSearch,
    height: usize,
    width: usize,
) -> Result<(Vec<u8>, Vec<UserDecision>)> {
    if estimates.len() != stats.users {
        return Err(Error::Structure(format!(
            "{} sparsity estimates for {} users",
            estimates.len(),
            stats.users
        )));
    }
    let mut streams = Vec::with_capacity(stats.users);
    let mut decisions = Vec::with_capacity(stats.users);
    for (k, est) in estimates.iter().enumerate() {
        let m = stats.moments[k];
        let prior = clamp_prior(est.p);
        let opt = optimize_lambda_with(prior, stats.frames, m.mu, m.sigma, search)?;
        let det = DetectionConfig {
            lambda: opt.lambda,
            prior,
            moments: m,
            frames: stats.frames,
        };
        streams.push(det.detect_stream(stats.user(k))?);
        decisions.push(UserDecision {
            prior,
            lambda: opt.lambda,
            eta: opt.eta,
            analytic_ber: opt.ber,
        });
    }
    let refs: Vec<&[u8]> = streams.iter().map(|s| s.as_slice()).collect();
    Ok((
        assemble_values(&refs, stats.users, height, width)?,
        decisions,
    ))
}
