use super::{clamp_prior, PRIOR_EPS};
use crate::error::{Error, Result};
use crate::rake::{FrameStatistics, LinkMoments};

/// Minimum number of statistics for a moment or EM estimate.
pub const MIN_STATISTICS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityMethod {
    Oracle,
    Moment,
    Em,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityEstimate {
    pub p: f64,
    pub method: SparsityMethod,
    pub samples: usize,
}

impl SparsityEstimate {
    pub fn oracle(p: f64, samples: usize) -> Self {
        SparsityEstimate {
            p: clamp_prior(p),
            method: SparsityMethod::Oracle,
            samples,
        }
    }
}

/// Anything that turns one user's statistics into a prior estimate.
pub trait SparsityEstimator {
    fn estimate(&self, stats: &FrameStatistics, user: usize) -> Result<SparsityEstimate>;
}

/// Known activation rate per user.
#[derive(Debug, Clone)]
pub struct OracleEstimator(pub Vec<f64>);

impl SparsityEstimator for OracleEstimator {
    fn estimate(&self, stats: &FrameStatistics, user: usize) -> Result<SparsityEstimate> {
        let p = *self
            .0
            .get(user)
            .ok_or_else(|| Error::Structure(format!("no oracle prior for user {user}")))?;
        Ok(SparsityEstimate::oracle(p, stats.bits))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MomentEstimator;

impl SparsityEstimator for MomentEstimator {
    fn estimate(&self, stats: &FrameStatistics, user: usize) -> Result<SparsityEstimate> {
        estimate_sparsity(stats.user(user), &stats.moments[user])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmEstimator {
    pub iterations: usize,
}

impl Default for EmEstimator {
    fn default() -> Self {
        EmEstimator { iterations: 50 }
    }
}

impl SparsityEstimator for EmEstimator {
    fn estimate(&self, stats: &FrameStatistics, user: usize) -> Result<SparsityEstimate> {
        let ys = stats.user(user);
        let m = stats.moments[user];
        let start = estimate_sparsity(ys, &m)?;
        let (p, _) = em_refine(ys, &m, start.p, self.iterations);
        Ok(SparsityEstimate {
            p: clamp_prior(p),
            method: SparsityMethod::Em,
            samples: ys.len(),
        })
    }
}

/// Moment estimate `p = mean(Y) / mu`, clamped into `[eps_p, 1 - eps_p]`.
pub fn estimate_sparsity(ys: &[f64], m: &LinkMoments) -> Result<SparsityEstimate> {
    if ys.len() < MIN_STATISTICS {
        return Err(Error::Estimation(format!(
            "{} statistics, need at least {MIN_STATISTICS}",
            ys.len()
        )));
    }
    if !(m.mu > 0.0) {
        return Err(Error::Estimation(format!("mu = {} must be positive", m.mu)));
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Ok(SparsityEstimate {
        p: (mean / m.mu).clamp(PRIOR_EPS, 1.0 - PRIOR_EPS),
        method: SparsityMethod::Moment,
        samples: ys.len(),
    })
}

/// Mean negative log-likelihood of the two-component mixture (up to the
/// constant `ln(sigma sqrt(2 pi))`).
fn mixture_nll(ys: &[f64], m: &LinkMoments, p: f64) -> f64 {
    let s2 = 2.0 * m.sigma * m.sigma;
    ys.iter()
        .map(|&y| {
            let l0 = (1.0 - p) * (-(y * y) / s2).exp();
            let l1 = p * (-((y - m.mu).powi(2)) / s2).exp();
            -(l0 + l1).max(f64::MIN_POSITIVE).ln()
        })
        .sum::<f64>()
        / ys.len() as f64
}

/// EM on the mixing weight of `{N(0, sigma^2), N(mu, sigma^2)}` with fixed
/// moments. Returns the final weight and the NLL before each iteration
/// (plus the final value).
pub fn em_refine(ys: &[f64], m: &LinkMoments, p0: f64, iterations: usize) -> (f64, Vec<f64>) {
    let mut p = p0.clamp(PRIOR_EPS, 1.0 - PRIOR_EPS);
    let mut trace = vec![mixture_nll(ys, m, p)];
    let s2 = 2.0 * m.sigma * m.sigma;
    for _ in 0..iterations {
        let resp: f64 = ys
            .iter()
            .map(|&y| {
                // responsibility of the b = 1 component, via the log-odds
                let log_odds = (p / (1.0 - p)).ln() + (y * y - (y - m.mu).powi(2)) / s2;
                1.0 / (1.0 + (-log_odds).exp())
            })
            .sum();
        let next = (resp / ys.len() as f64).clamp(PRIOR_EPS, 1.0 - PRIOR_EPS);
        let done = (next - p).abs() < 1e-12;
        p = next;
        trace.push(mixture_nll(ys, m, p));
        if done {
            break;
        }
    }
    (p, trace)
}
