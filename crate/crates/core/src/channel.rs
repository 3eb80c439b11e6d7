//! Quasi-static cluster/ray multipath channel and waveform propagation.
//!
//! Realizations follow the Saleh-Valenzuela structure of the 802.15.4a
//! models: Poisson cluster arrivals, Poisson ray arrivals inside each
//! cluster, doubly exponential mean power and Nakagami-m magnitudes. Gains
//! are real. Taps are truncated at the configured delay spread and the
//! realization is normalized to unit power.
//!
//! Propagation treats every frame as an independent cyclic block: energy
//! delayed past the end of a frame wraps to its start. Per-frame correlation
//! therefore sees exactly the frame's own pulses, and no energy leaks into
//! the neighbouring frame.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::tx::{add_pulse_cyclic, LinkConfig, PulseTrain};

/// How the uniform phase of a complex path gain maps to a real gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseModel {
    /// Random sign with probability 1/2.
    #[default]
    Sign,
    /// Real part of `|a| e^{j phi}` with `phi` uniform.
    ComplexRealPart,
}

/// Number of rays per cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RayCount {
    /// Exactly `rays_per_cluster` rays.
    #[default]
    Fixed,
    /// Poisson with mean `rays_per_cluster`, at least one ray.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Cluster arrival rate (1/ns).
    pub cluster_rate: f64,
    /// Ray arrival rate (1/ns).
    pub ray_rate: f64,
    /// Cluster power decay constant (ns).
    pub cluster_decay_ns: f64,
    /// Ray power decay constant (ns).
    pub ray_decay_ns: f64,
    pub nakagami_m: f64,
    pub clusters: usize,
    pub rays_per_cluster: usize,
    pub max_delay_ns: f64,
    pub phase_model: PhaseModel,
    pub ray_count: RayCount,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams::cm1_fallback()
    }
}

impl ChannelParams {
    /// Residential LOS (CM1) style parameters. External default values, not
    /// taken from the standard's tables; replace with the official preset
    /// where bit-exact CM1 behaviour matters.
    pub fn cm1_fallback() -> Self {
        ChannelParams {
            cluster_rate: 0.047,
            ray_rate: 1.54,
            cluster_decay_ns: 22.61,
            ray_decay_ns: 12.53,
            nakagami_m: 1.0,
            clusters: 5,
            rays_per_cluster: 20,
            max_delay_ns: 90.0,
            phase_model: PhaseModel::Sign,
            ray_count: RayCount::Fixed,
        }
    }

    /// One path of unit gain at delay zero (AWGN link).
    pub fn single_path() -> Self {
        ChannelParams {
            clusters: 1,
            rays_per_cluster: 1,
            ..ChannelParams::cm1_fallback()
        }
    }

    /// Look up a preset by name: `cm1`, `single-path` (alias `awgn`).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "cm1" => Ok(Self::cm1_fallback()),
            "single-path" | "awgn" => Ok(Self::single_path()),
            other => Err(Error::Config(format!("unknown channel preset `{other}`"))),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [
            ("cluster_rate", self.cluster_rate),
            ("ray_rate", self.ray_rate),
            ("cluster_decay_ns", self.cluster_decay_ns),
            ("ray_decay_ns", self.ray_decay_ns),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive and finite, got {x}"));
            }
        }
        if !(self.nakagami_m >= 0.5) {
            v.push(format!(
                "nakagami_m must be >= 0.5, got {}",
                self.nakagami_m
            ));
        }
        if self.clusters == 0 || self.rays_per_cluster == 0 {
            v.push("clusters and rays_per_cluster must be at least 1".into());
        }
        if !(self.max_delay_ns >= 0.0) {
            v.push("max_delay_ns must be non-negative".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// One resolvable path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay_ns: f64,
    pub gain: f64,
}

/// Unnormalized path with its cluster/ray decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawTap {
    pub cluster: usize,
    pub cluster_delay_ns: f64,
    pub ray_delay_ns: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub user: usize,
    pub block: u64,
    /// Sorted by delay.
    pub taps: Vec<Tap>,
}

impl ChannelRealization {
    pub fn power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain * t.gain).sum()
    }

    /// Ideal unit path, used for AWGN tests.
    pub fn identity(user: usize) -> Self {
        ChannelRealization {
            user,
            block: 0,
            taps: vec![Tap {
                delay_ns: 0.0,
                gain: 1.0,
            }],
        }
    }
}

/// Nakagami-m magnitude with spread `omega = E[r^2]`.
pub fn sample_nakagami<R: Rng + ?Sized>(m: f64, omega: f64, rng: &mut R) -> f64 {
    // r^2 ~ Gamma(shape m, scale omega / m)
    let g = Gamma::new(m, omega / m).expect("valid Nakagami parameters");
    g.sample(rng).sqrt()
}

/// All cluster/ray paths before truncation and normalization.
pub fn sample_raw_paths<R: Rng + ?Sized>(
    params: &ChannelParams,
    rng: &mut R,
) -> Result<Vec<RawTap>> {
    params.validate()?;
    let cluster_gap = Exp::new(params.cluster_rate).map_err(|e| Error::Config(e.to_string()))?;
    let ray_gap = Exp::new(params.ray_rate).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::new();
    let mut cluster_delay = 0.0;
    for l in 0..params.clusters {
        if l > 0 {
            cluster_delay += cluster_gap.sample(rng);
        }
        let rays = match params.ray_count {
            RayCount::Fixed => params.rays_per_cluster,
            RayCount::Poisson => {
                let pois = Poisson::new(params.rays_per_cluster as f64)
                    .map_err(|e| Error::Config(e.to_string()))?;
                (pois.sample(rng) as usize).max(1)
            }
        };
        let mut ray_delay = 0.0;
        for m in 0..rays {
            if m > 0 {
                ray_delay += ray_gap.sample(rng);
            }
            let omega = (-cluster_delay / params.cluster_decay_ns).exp()
                * (-ray_delay / params.ray_decay_ns).exp();
            let mag = sample_nakagami(params.nakagami_m, omega, rng);
            let gain = match params.phase_model {
                PhaseModel::Sign => {
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                }
                PhaseModel::ComplexRealPart => {
                    mag * (rng.random::<f64>() * std::f64::consts::TAU).cos()
                }
            };
            out.push(RawTap {
                cluster: l,
                cluster_delay_ns: cluster_delay,
                ray_delay_ns: ray_delay,
                gain,
            });
        }
    }
    Ok(out)
}

/// Draw the block-`block` realization of user `user`.
pub fn sample_channel(
    params: &ChannelParams,
    seed: u64,
    user: usize,
    block: u64,
) -> Result<ChannelRealization> {
    let mut rng = substream(seed, &[domain::CHANNEL, user as u64, block]);
    let raw = sample_raw_paths(params, &mut rng)?;
    let mut taps: Vec<Tap> = raw
        .iter()
        .map(|r| Tap {
            delay_ns: r.cluster_delay_ns + r.ray_delay_ns,
            gain: r.gain,
        })
        .filter(|t| t.delay_ns <= params.max_delay_ns)
        .collect();
    taps.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
    normalize_channel(&ChannelRealization { user, block, taps })
}

/// Scale gains so that the total power is one.
pub fn normalize_channel(r: &ChannelRealization) -> Result<ChannelRealization> {
    let p = r.power();
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Numerical(format!(
            "cannot normalize channel of user {} with power {p}",
            r.user
        )));
    }
    let s = p.sqrt().recip();
    Ok(ChannelRealization {
        user: r.user,
        block: r.block,
        taps: r
            .taps
            .iter()
            .map(|t| Tap {
                delay_ns: t.delay_ns,
                gain: t.gain * s,
            })
            .collect(),
    })
}

/// CSV rows `user,delay_ns,gain` (with header).
pub fn taps_csv(realizations: &[ChannelRealization]) -> String {
    let mut s = String::from("user,delay_ns,gain\n");
    for r in realizations {
        for t in &r.taps {
            s.push_str(&format!("{},{},{}\n", r.user, t.delay_ns, t.gain));
        }
    }
    s
}

/// Sampled received signal of one bit's `N_f`-frame block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedWaveform {
    pub bit: usize,
    pub samples: Vec<f64>,
    pub samples_per_ns: f64,
    pub noise_psd: f64,
    pub samples_per_frame: usize,
}

impl ReceivedWaveform {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.samples_per_frame
    }

    pub fn frame(&self, j: usize) -> &[f64] {
        &self.samples[j * self.samples_per_frame..(j + 1) * self.samples_per_frame]
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples_per_ns
    }
}

/// Superpose every user's pulses of bit `bit` through that user's channel
/// and add white Gaussian noise of two-sided PSD `N_0 / 2` (per-sample
/// variance `N_0 / 2 * samples_per_ns`). `trains[k]` and `realizations[k]`
/// belong to the same user.
pub fn propagate(
    trains: &[PulseTrain],
    realizations: &[ChannelRealization],
    cfg: &LinkConfig,
    bit: usize,
    noise_seed: u64,
) -> Result<ReceivedWaveform> {
    if trains.len() != realizations.len() {
        return Err(Error::Structure(format!(
            "{} pulse trains but {} channel realizations",
            trains.len(),
            realizations.len()
        )));
    }
    for r in realizations {
        if let Some(t) = r
            .taps
            .iter()
            .find(|t| t.delay_ns < 0.0 || t.delay_ns >= cfg.frame_ns)
        {
            return Err(Error::Config(format!(
                "tap delay {} ns of user {} outside the {} ns frame",
                t.delay_ns, r.user, cfg.frame_ns
            )));
        }
    }
    let spf = cfg.samples_per_frame();
    let shape = cfg.pulse_shape();
    let mut samples = vec![0.0; spf * cfg.frames_per_bit];
    for (train, chan) in trains.iter().zip(realizations) {
        for p in train.for_bit(bit) {
            let frame = &mut samples[p.frame * spf..(p.frame + 1) * spf];
            let centre = p.time_ns - p.frame as f64 * cfg.frame_ns + cfg.chip_ns / 2.0;
            for tap in &chan.taps {
                add_pulse_cyclic(
                    frame,
                    cfg.samples_per_ns,
                    centre + tap.delay_ns,
                    p.amplitude * tap.gain,
                    &shape,
                );
            }
        }
    }
    if cfg.noise_psd > 0.0 {
        let sd = (cfg.noise_psd / 2.0 * cfg.samples_per_ns).sqrt();
        let normal = Normal::new(0.0, sd).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut rng = substream(noise_seed, &[domain::NOISE, bit as u64]);
        for s in samples.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }
    Ok(ReceivedWaveform {
        bit,
        samples,
        samples_per_ns: cfg.samples_per_ns,
        noise_psd: cfg.noise_psd,
        samples_per_frame: spf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::BitStream;
    use crate::tx::{gen_th_code, modulate_ook, monocycle};

    #[test]
    fn single_path_is_unit_tap() {
        for seed in 0..20 {
            let r = sample_channel(&ChannelParams::single_path(), seed, 0, 0).unwrap();
            assert_eq!(r.taps.len(), 1);
            assert_eq!(r.taps[0].delay_ns, 0.0);
            assert!((r.taps[0].gain.abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn footnote_scale_path_count() {
        let mut p = ChannelParams::cm1_fallback();
        p.max_delay_ns = f64::INFINITY;
        let mut rng = substream(1, &[]);
        assert_eq!(sample_raw_paths(&p, &mut rng).unwrap().len(), 100);
        let r = sample_channel(&p, 1, 0, 0).unwrap();
        assert_eq!(r.taps.len(), 100);
    }

    #[test]
    fn unit_power_sorted_and_truncated() {
        let p = ChannelParams::cm1_fallback();
        for block in 0..200 {
            let r = sample_channel(&p, 3, 2, block).unwrap();
            assert!((r.power() - 1.0).abs() < 1e-9);
            assert!(r.taps.windows(2).all(|w| w[0].delay_ns <= w[1].delay_ns));
            assert!(r
                .taps
                .iter()
                .all(|t| t.delay_ns >= 0.0 && t.delay_ns <= p.max_delay_ns));
        }
    }

    #[test]
    fn poisson_ray_count_and_complex_phase() {
        let p = ChannelParams {
            ray_count: RayCount::Poisson,
            phase_model: PhaseModel::ComplexRealPart,
            ..ChannelParams::cm1_fallback()
        };
        let mut counts = 0usize;
        for block in 0..100 {
            let r = sample_channel(&p, 3, 0, block).unwrap();
            assert!((r.power() - 1.0).abs() < 1e-9);
            counts += r.taps.len();
        }
        assert!(counts > 0);
    }

    #[test]
    fn degenerate_params_rejected() {
        let p = ChannelParams {
            cluster_rate: 0.0,
            ..ChannelParams::cm1_fallback()
        };
        assert!(matches!(sample_channel(&p, 0, 0, 0), Err(Error::Config(_))));
        let p = ChannelParams {
            nakagami_m: 0.3,
            ..ChannelParams::cm1_fallback()
        };
        assert!(p.validate().is_err());
        assert!(ChannelParams::preset("cm9").is_err());
    }

    #[test]
    fn normalize_examples() {
        let r = ChannelRealization {
            user: 0,
            block: 0,
            taps: vec![
                Tap {
                    delay_ns: 0.0,
                    gain: 0.3,
                },
                Tap {
                    delay_ns: 1.0,
                    gain: 0.4,
                },
            ],
        };
        let n = normalize_channel(&r).unwrap();
        assert!((n.taps[0].gain - 0.6).abs() < 1e-15);
        assert!((n.taps[1].gain - 0.8).abs() < 1e-15);
        let nn = normalize_channel(&n).unwrap();
        for (a, b) in n.taps.iter().zip(&nn.taps) {
            assert!((a.gain - b.gain).abs() < 1e-15);
        }
        let zero = ChannelRealization {
            user: 0,
            block: 0,
            taps: vec![Tap {
                delay_ns: 0.0,
                gain: 0.0,
            }],
        };
        assert!(matches!(normalize_channel(&zero), Err(Error::Numerical(_))));
    }

    fn cfg() -> LinkConfig {
        LinkConfig {
            frames_per_bit: 1,
            pulses_per_frame: 1,
            users: 1,
            noise_psd: 0.0,
            ..LinkConfig::default()
        }
    }

    #[test]
    fn silence_without_noise_is_zero() {
        let c = cfg();
        let w = propagate(
            &[PulseTrain::default()],
            &[ChannelRealization::identity(0)],
            &c,
            0,
            1,
        )
        .unwrap();
        assert!(w.samples.iter().all(|&x| x == 0.0));
        assert_eq!(w.samples.len(), 1600);
    }

    #[test]
    fn delayed_unit_tap_shifts_pulse() {
        let c = cfg();
        let code = gen_th_code(1, 0, &c, 1).unwrap();
        let train = modulate_ook(
            &BitStream {
                user: 0,
                bits: vec![1],
            },
            &code,
            &c,
        )
        .unwrap();
        let d = 7.25;
        let chan = ChannelRealization {
            user: 0,
            block: 0,
            taps: vec![Tap {
                delay_ns: d,
                gain: 1.0,
            }],
        };
        let w = propagate(&[train.clone()], &[chan], &c, 0, 1).unwrap();
        let centre = (train.pulses[0].time_ns + 1.0 + d) % 100.0;
        let shape = c.pulse_shape();
        for (i, &x) in w.samples.iter().enumerate() {
            let t = i as f64 / 16.0;
            let mut dt = t - centre;
            if dt > 50.0 {
                dt -= 100.0;
            } else if dt < -50.0 {
                dt += 100.0;
            }
            let expect = if dt.abs() <= 1.0 {
                monocycle(dt, &shape)
            } else {
                0.0
            };
            assert!((x - expect).abs() < 1e-12);
        }
        assert!((w.energy() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn multipath_energy_is_conserved() {
        let c = LinkConfig {
            symbol_energy: 3.0,
            ..cfg()
        };
        let code = gen_th_code(1, 0, &c, 1).unwrap();
        let train = modulate_ook(
            &BitStream {
                user: 0,
                bits: vec![1],
            },
            &code,
            &c,
        )
        .unwrap();
        // taps spaced beyond the pulse support, so the echoes do not overlap
        let chan = normalize_channel(&ChannelRealization {
            user: 0,
            block: 0,
            taps: vec![
                Tap {
                    delay_ns: 0.0,
                    gain: 0.9,
                },
                Tap {
                    delay_ns: 5.0,
                    gain: -0.5,
                },
                Tap {
                    delay_ns: 12.5,
                    gain: 0.3,
                },
            ],
        })
        .unwrap();
        let w = propagate(&[train], &[chan], &c, 0, 1).unwrap();
        assert!((w.energy() / 3.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tap_beyond_frame_rejected() {
        let c = cfg();
        let chan = ChannelRealization {
            user: 0,
            block: 0,
            taps: vec![Tap {
                delay_ns: 100.0,
                gain: 1.0,
            }],
        };
        assert!(propagate(&[PulseTrain::default()], &[chan], &c, 0, 1).is_err());
    }

    #[test]
    fn noise_sample_variance() {
        let c = LinkConfig {
            noise_psd: 0.5,
            frames_per_bit: 625,
            ..cfg()
        };
        // 625 * 1600 = 10^6 samples
        let w = propagate(
            &[PulseTrain::default()],
            &[ChannelRealization::identity(0)],
            &c,
            0,
            9,
        )
        .unwrap();
        let n = w.samples.len() as f64;
        let mean = w.samples.iter().sum::<f64>() / n;
        let var = w.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expect = 0.5 / 2.0 * 16.0;
        assert!((var / expect - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn noiseless_propagation_is_repeatable() {
        let c = LinkConfig {
            frames_per_bit: 3,
            ..cfg()
        };
        let code = gen_th_code(1, 0, &c, 2).unwrap();
        let train = modulate_ook(
            &BitStream {
                user: 0,
                bits: vec![1, 1],
            },
            &code,
            &c,
        )
        .unwrap();
        let chan = sample_channel(&ChannelParams::cm1_fallback(), 4, 0, 0).unwrap();
        let a = propagate(&[train.clone()], &[chan.clone()], &c, 1, 1).unwrap();
        let b = propagate(&[train], &[chan], &c, 1, 2).unwrap();
        assert_eq!(a, b);
    }
}
