//! One block of the multi-user link, at either simulation level.

use rand::Rng;

use super::config::{Level, NoiseKnowledge, PriorSource, Scheme};
use crate::channel::{propagate, sample_channel, ChannelParams, ChannelRealization};
use crate::detect::{
    analytic_ber, clamp_prior, map_threshold, optimize_lambda_with, DetectionConfig, EmEstimator,
    LambdaSearch, MomentEstimator, OracleEstimator, SparsityEstimator, UserDecision,
};
use crate::error::{Error, Result};
use crate::events::BitStream;
use crate::rake::{
    correlate, correlate_ppm, estimate_finger_noise, link_stats, mrc_combine, ppm_link_stats,
    sample_statistic, select_paths, FingerOutput, FingerSet, FrameStatistics, LinkMoments,
};
use crate::rng::{domain, substream};
use crate::tx::{gen_th_code, modulate_ook, modulate_ppm, LinkConfig, VarianceModel};

/// Variance floor that keeps moments finite on a noiseless link.
pub const NOISE_FLOOR: f64 = 1e-30;

/// Copy of `base` with `E_s = 1` and `N_0` set from `snr_db`.
pub fn at_snr(base: &LinkConfig, snr_db: f64) -> LinkConfig {
    LinkConfig {
        symbol_energy: 1.0,
        noise_psd: if snr_db.is_infinite() {
            0.0
        } else {
            10f64.powf(-snr_db / 10.0)
        },
        ..base.clone()
    }
}

/// Everything needed to push bits through the link.
#[derive(Debug, Clone)]
pub struct Link {
    pub cfg: LinkConfig,
    pub channel: ChannelParams,
    pub scheme: Scheme,
    pub level: Level,
    pub noise: NoiseKnowledge,
}

impl Link {
    /// Thermal noise variance of one finger under the configured convention.
    pub fn finger_noise_var(&self) -> f64 {
        let single = (self.cfg.noise_psd / 2.0).max(NOISE_FLOOR);
        match self.cfg.variance_model {
            VarianceModel::AsPrinted => single,
            VarianceModel::Derived => single * self.cfg.pulses_per_frame as f64,
        }
    }

    pub fn moments(&self, set: &FingerSet) -> Result<LinkMoments> {
        if self.scheme.is_ppm() {
            ppm_link_stats(set, &self.cfg)
        } else {
            link_stats(set, &self.cfg)
        }
    }

    /// Channel of every user in the block keyed by `seed`.
    pub fn channels(&self, seed: u64) -> Result<Vec<ChannelRealization>> {
        (0..self.cfg.users)
            .map(|k| sample_channel(&self.channel, seed, k, 0))
            .collect()
    }

    /// Strongest-path fingers with thermal noise, one set per user; every
    /// set has the same size (the smallest available).
    pub fn fingers(&self, channels: &[ChannelRealization]) -> Result<Vec<FingerSet>> {
        let l = channels
            .iter()
            .map(|c| c.taps.len())
            .min()
            .unwrap_or(0)
            .min(self.cfg.fingers);
        let var = self.finger_noise_var();
        channels
            .iter()
            .map(|c| select_paths(c, l)?.with_uniform_noise(var))
            .collect()
    }

    /// Frame statistics of all users for one block of `streams`.
    pub fn transmit(&self, streams: &[BitStream], seed: u64) -> Result<FrameStatistics> {
        if streams.len() != self.cfg.users {
            return Err(Error::Structure(format!(
                "{} streams for {} users",
                streams.len(),
                self.cfg.users
            )));
        }
        let channels = self.channels(seed)?;
        let sets = self.fingers(&channels)?;
        match self.level {
            Level::Statistic => self.transmit_statistic(streams, &sets, seed),
            Level::Waveform => self.transmit_waveform(streams, &channels, sets, seed),
        }
    }

    fn transmit_statistic(
        &self,
        streams: &[BitStream],
        sets: &[FingerSet],
        seed: u64,
    ) -> Result<FrameStatistics> {
        let n_f = self.cfg.frames_per_bit;
        let bits = streams[0].len();
        let mut y = Vec::with_capacity(streams.len() * bits * n_f);
        let mut moments = Vec::with_capacity(streams.len());
        for (k, (s, set)) in streams.iter().zip(sets).enumerate() {
            let m = self.moments(set)?;
            let mut rng = substream(seed, &[domain::STATISTIC, k as u64]);
            for &b in &s.bits {
                for _ in 0..n_f {
                    y.push(sample_statistic(b, &m, &mut rng));
                }
            }
            moments.push(m);
        }
        FrameStatistics::new(streams.len(), bits, n_f, y, moments)
    }

    fn transmit_waveform(
        &self,
        streams: &[BitStream],
        channels: &[ChannelRealization],
        mut sets: Vec<FingerSet>,
        seed: u64,
    ) -> Result<FrameStatistics> {
        let cfg = &self.cfg;
        let (users, bits, n_f) = (streams.len(), streams[0].len(), cfg.frames_per_bit);
        let fingers = sets[0].len();
        let codes = (0..users)
            .map(|k| gen_th_code(seed, k, cfg, bits))
            .collect::<Result<Vec<_>>>()?;
        let trains = streams
            .iter()
            .zip(&codes)
            .map(|(s, c)| {
                if self.scheme.is_ppm() {
                    modulate_ppm(s, c, cfg)
                } else {
                    modulate_ook(s, c, cfg)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = FingerOutput::zeros(users, bits, n_f, fingers);
        for n in 0..bits {
            let rx = propagate(&trains, channels, cfg, n, seed)?;
            if n == 0 && self.noise == NoiseKnowledge::Estimated {
                for (k, set) in sets.iter_mut().enumerate() {
                    let vars = set
                        .fingers
                        .iter()
                        .map(|f| {
                            let template = estimate_finger_noise(&rx, &codes[k], f, cfg)?;
                            let v = match cfg.variance_model {
                                VarianceModel::AsPrinted => template / cfg.pulses_per_frame as f64,
                                VarianceModel::Derived => template,
                            };
                            Ok(v.max(NOISE_FLOOR))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    *set = set.clone().with_noise_variances(&vars)?;
                }
            }
            for (k, set) in sets.iter().enumerate() {
                for j in 0..n_f {
                    for (l, f) in set.fingers.iter().enumerate() {
                        let v = if self.scheme.is_ppm() {
                            correlate_ppm(&rx, &codes[k], f, cfg, j)?
                        } else {
                            correlate(&rx, &codes[k], f, cfg, j)?
                        };
                        out.set(k, n, j, l, v);
                    }
                }
            }
        }
        if !self.scheme.is_ppm() {
            return mrc_combine(&out, &sets, cfg);
        }
        // PPM: combine, then shift by half the separation so a zero sits at 0.
        let mut y = Vec::with_capacity(users * bits * n_f);
        let mut moments = Vec::with_capacity(users);
        for (k, set) in sets.iter().enumerate() {
            let m = ppm_link_stats(set, cfg)?;
            let w = set.weights();
            for n in 0..bits {
                for j in 0..n_f {
                    let d: f64 = (0..fingers).map(|l| w[l] * out.get(k, n, j, l)).sum();
                    y.push(d + m.mu / 2.0);
                }
            }
            moments.push(m);
        }
        FrameStatistics::new(users, bits, n_f, y, moments)
    }
}

/// Bernoulli(`p`) bits for every user, keyed by `seed`.
pub fn random_streams(users: usize, bits: usize, p: f64, seed: u64) -> Vec<BitStream> {
    (0..users)
        .map(|k| {
            let mut rng = substream(seed, &[domain::BITS, k as u64]);
            BitStream {
                user: k,
                bits: (0..bits).map(|_| (rng.random::<f64>() < p) as u8).collect(),
            }
        })
        .collect()
}

/// Prior of every user from the configured source. `truth` holds the
/// actual activation rates, used only by the oracle.
pub fn estimate_priors(
    stats: &FrameStatistics,
    source: PriorSource,
    truth: &[f64],
) -> Result<Vec<f64>> {
    let est: Box<dyn SparsityEstimator> = match source {
        PriorSource::Oracle => Box::new(OracleEstimator(truth.to_vec())),
        PriorSource::Moment => Box::new(MomentEstimator),
        PriorSource::Em => Box::new(EmEstimator::default()),
    };
    (0..stats.users)
        .map(|k| Ok(est.estimate(stats, k)?.p))
        .collect()
}

/// Hard decisions of every user. OOK uses the MAP threshold at the
/// optimised bias; PPM is symmetric and uses the midpoint.
pub fn detect_users(
    stats: &FrameStatistics,
    scheme: Scheme,
    priors: &[f64],
    search: &LambdaSearch,
) -> Result<(Vec<BitStream>, Vec<UserDecision>)> {
    let mut streams = Vec::with_capacity(stats.users);
    let mut decisions = Vec::with_capacity(stats.users);
    for k in 0..stats.users {
        let m = stats.moments[k];
        let (prior, lambda, eta, ber) = if scheme.is_ppm() {
            let eta = map_threshold(1.0, 0.5, m.mu, m.sigma)?;
            let e = analytic_ber(1.0, 0.5, stats.frames, m.mu, m.sigma)?;
            (0.5, 1.0, eta, e.ber)
        } else {
            let prior = clamp_prior(priors[k]);
            let o = optimize_lambda_with(prior, stats.frames, m.mu, m.sigma, search)?;
            (prior, o.lambda, o.eta, o.ber)
        };
        let det = DetectionConfig {
            lambda,
            prior,
            moments: m,
            frames: stats.frames,
        };
        streams.push(BitStream {
            user: k,
            bits: det.detect_stream(stats.user(k))?,
        });
        decisions.push(UserDecision {
            prior,
            lambda,
            eta,
            analytic_ber: ber,
        });
    }
    Ok((streams, decisions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(level: Level, scheme: Scheme, users: usize, snr_db: f64) -> Link {
        let base = LinkConfig {
            users,
            frames_per_bit: 3,
            ..LinkConfig::default()
        };
        Link {
            cfg: at_snr(&base, snr_db),
            channel: ChannelParams::single_path(),
            scheme,
            level,
            noise: NoiseKnowledge::Known,
        }
    }

    #[test]
    fn snr_sets_noise_psd() {
        let c = at_snr(&LinkConfig::default(), 10.0);
        assert!((c.noise_psd - 0.1).abs() < 1e-15);
        assert_eq!(at_snr(&LinkConfig::default(), f64::INFINITY).noise_psd, 0.0);
    }

    #[test]
    fn awgn_moments_follow_snr() {
        // Single unit tap: mu / sigma = sqrt(2 N_p E_s / N_0).
        let l = link(Level::Statistic, Scheme::OokDigital, 1, 6.0);
        let sets = l.fingers(&l.channels(1).unwrap()).unwrap();
        let m = l.moments(&sets[0]).unwrap();
        let want = (2.0 * 10f64.powf(0.6)).sqrt();
        assert!((m.mu / m.sigma - want).abs() < 1e-12);
    }

    #[test]
    fn noiseless_waveform_is_exact() {
        let l = link(Level::Waveform, Scheme::OokDigital, 1, f64::INFINITY);
        let streams = random_streams(1, 60, 0.3, 5);
        let stats = l.transmit(&streams, 9).unwrap();
        let (rx, _) = detect_users(&stats, l.scheme, &[0.3], &LambdaSearch::default()).unwrap();
        assert_eq!(rx, streams);
    }

    #[test]
    fn noiseless_ppm_waveform_is_exact() {
        let l = link(Level::Waveform, Scheme::PpmDigital, 1, f64::INFINITY);
        let streams = random_streams(1, 30, 0.5, 6);
        let stats = l.transmit(&streams, 3).unwrap();
        for k in 0..1 {
            let m = stats.moments[k];
            for (n, &b) in streams[k].bits.iter().enumerate() {
                for j in 0..3 {
                    let d = (stats.get(k, n, j) - b as f64 * m.mu).abs() / m.mu;
                    // Sampled pulse versus closed-form autocorrelation.
                    assert!(d < 1e-4, "bit {b}: relative offset {d}");
                }
            }
        }
    }

    #[test]
    fn waveform_matches_statistic_moments() {
        // Single user, single tap: waveform Y has the Gaussian model's moments.
        let l = link(Level::Waveform, Scheme::OokDigital, 1, 3.0);
        let streams = vec![BitStream {
            user: 0,
            bits: (0..400).map(|i| (i % 2) as u8).collect(),
        }];
        let stats = l.transmit(&streams, 11).unwrap();
        let m = stats.moments[0];
        let (mut ones, mut zeros) = (Vec::new(), Vec::new());
        for n in 0..400 {
            for j in 0..3 {
                let v = stats.get(0, n, j);
                if n % 2 == 1 {
                    ones.push(v)
                } else {
                    zeros.push(v)
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let mu = mean(v);
            v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        // 600 samples per class: loose 5-sigma style tolerances.
        assert!((mean(&ones) - m.mu).abs() < 5.0 * m.sigma / 600f64.sqrt());
        assert!(mean(&zeros).abs() < 5.0 * m.sigma / 600f64.sqrt());
        assert!((var(&zeros) / (m.sigma * m.sigma) - 1.0).abs() < 0.2);
    }

    #[test]
    fn estimated_noise_sees_interference() {
        let mut l = link(Level::Waveform, Scheme::OokDigital, 8, 20.0);
        l.noise = NoiseKnowledge::Estimated;
        let streams = random_streams(8, 4, 1.0, 1);
        let known = {
            let mut k = l.clone();
            k.noise = NoiseKnowledge::Known;
            k.transmit(&streams, 2).unwrap()
        };
        let est = l.transmit(&streams, 2).unwrap();
        assert!(
            est.moments[0].sigma / est.moments[0].mu > known.moments[0].sigma / known.moments[0].mu
        );
    }
}
