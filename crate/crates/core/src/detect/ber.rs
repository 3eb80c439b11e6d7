use super::{clamp_prior, map_threshold, q_function};
use crate::error::{Error, Result};

/// Majority vote over an odd number of hard frame decisions.
pub fn majority_vote(frame_bits: &[u8]) -> Result<u8> {
    let n = frame_bits.len();
    if n % 2 == 0 {
        return Err(Error::Config(format!(
            "N_f must be odd for majority voting, got {n}"
        )));
    }
    let ones: usize = frame_bits.iter().map(|&b| b as usize).sum();
    Ok((2 * ones > n) as u8)
}

/// `(P_FA, P_MD) = (Q(eta / sigma), Q((mu - eta) / sigma))`.
pub fn per_frame_error_probs(eta: f64, mu: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(Error::Numerical(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    Ok((q_function(eta / sigma), q_function((mu - eta) / sigma)))
}

/// `sum_{i = m + 1}^{n} C(n, i) q^i (1 - q)^{n - i}` with `m = (n - 1) / 2`:
/// probability that a strict majority of `n` independent trials succeed.
pub fn binomial_tail_above(n: usize, q: f64) -> f64 {
    let m = (n - 1) / 2;
    let mut coeff = 1.0;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            coeff = coeff * (n - i + 1) as f64 / i as f64;
        }
        if i > m {
            total += coeff * q.powi(i as i32) * (1.0 - q).powi((n - i) as i32);
        }
    }
    total
}

/// Closed-form error model of the detect-and-vote receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub eta: f64,
    pub p_fa: f64,
    pub p_md: f64,
    /// Post-vote false-alarm probability.
    pub p_e0: f64,
    /// Post-vote miss probability.
    pub p_e1: f64,
    pub ber: f64,
    /// Vote threshold `m = (N_f - 1) / 2`.
    pub vote_threshold: usize,
}

/// Bit error rate for bias `lambda` and prior `p`. The threshold uses `p`
/// clamped into `[eps_p, 1 - eps_p]`; the mixture weights use `p` itself,
/// so `p = 0` gives `P_e|0` and `p = 1` gives `P_e|1`.
pub fn analytic_ber(lambda: f64, p: f64, n_f: usize, mu: f64, sigma: f64) -> Result<ErrorModel> {
    if n_f % 2 == 0 {
        return Err(Error::Config(format!("N_f must be odd, got {n_f}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("prior {p} outside [0, 1]")));
    }
    let eta = map_threshold(lambda, clamp_prior(p), mu, sigma)?;
    let (p_fa, p_md) = per_frame_error_probs(eta, mu, sigma)?;
    // P_e|1 = sum_{i=0}^{m} C(n, i) (1 - P_MD)^i P_MD^{n-i}: a strict
    // majority of misses
    let p_e0 = binomial_tail_above(n_f, p_fa);
    let p_e1 = binomial_tail_above(n_f, p_md);
    Ok(ErrorModel {
        eta,
        p_fa,
        p_md,
        p_e0,
        p_e1,
        ber: (1.0 - p) * p_e0 + p * p_e1,
        vote_threshold: (n_f - 1) / 2,
    })
}

/// Search domain for the bias parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSearch {
    pub lambda_max: f64,
    pub grid_points: usize,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        LambdaSearch {
            lambda_max: 1e3,
            grid_points: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedLambda {
    pub lambda: f64,
    pub eta: f64,
    pub ber: f64,
}

pub fn optimize_lambda(p: f64, n_f: usize, mu: f64, sigma: f64) -> Result<OptimizedLambda> {
    optimize_lambda_with(p, n_f, mu, sigma, &LambdaSearch::default())
}

/// Minimize the BER over `lambda in [1, lambda_max]`.
///
/// A uniform grid over `ln lambda` locates the best cell globally; golden
/// section then refines inside the neighbouring cells. The result is never
/// worse than the best grid point.
pub fn optimize_lambda_with(
    p: f64,
    n_f: usize,
    mu: f64,
    sigma: f64,
    search: &LambdaSearch,
) -> Result<OptimizedLambda> {
    if !(search.lambda_max >= 1.0) || search.grid_points < 2 {
        return Err(Error::Config(
            "lambda search needs lambda_max >= 1 and 2 grid points".into(),
        ));
    }
    let f = |s: f64| analytic_ber(s.exp(), p, n_f, mu, sigma).map(|e| e.ber);
    let s_max = search.lambda_max.ln();
    let n = search.grid_points;
    let grid: Vec<f64> = (0..n).map(|i| s_max * i as f64 / (n - 1) as f64).collect();
    let mut best_i = 0;
    let mut best = f(grid[0])?;
    for (i, &s) in grid.iter().enumerate().skip(1) {
        let v = f(s)?;
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut best_s = grid[best_i];
    if s_max > 0.0 {
        let mut a = grid[best_i.saturating_sub(1)];
        let mut b = grid[(best_i + 1).min(n - 1)];
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        for _ in 0..200 {
            if b - a < 1e-14 * (1.0 + b.abs()) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d)?;
            }
        }
        for (s, v) in [(c, fc), (d, fd)] {
            if v < best {
                best = v;
                best_s = s;
            }
        }
    }
    let lambda = best_s.exp().clamp(1.0, search.lambda_max);
    let model = analytic_ber(lambda, p, n_f, mu, sigma)?;
    Ok(OptimizedLambda {
        lambda,
        eta: model.eta,
        ber: model.ber,
    })
}
