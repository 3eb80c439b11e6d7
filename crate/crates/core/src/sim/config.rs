use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::snn::Presentation;
use crate::tx::LinkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    OokDigital,
    OokAnalog,
    PpmDigital,
    PpmAnalog,
    /// Clean frames straight into the network, no link.
    Baseline,
}

impl Scheme {
    pub fn is_ppm(self) -> bool {
        matches!(self, Scheme::PpmDigital | Scheme::PpmAnalog)
    }

    pub fn is_analog(self) -> bool {
        matches!(self, Scheme::OokAnalog | Scheme::PpmAnalog)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::OokDigital => "ook-digital",
            Scheme::OokAnalog => "ook-analog",
            Scheme::PpmDigital => "ppm-digital",
            Scheme::PpmAnalog => "ppm-analog",
            Scheme::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    /// Sampled pulses, multipath and noise, correlated by the RAKE.
    Waveform,
    /// Gaussian draws from the per-link moments.
    #[default]
    Statistic,
}

/// Where the detector's prior comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriorSource {
    /// The true activation rate of each user's stream.
    #[default]
    Oracle,
    Moment,
    Em,
}

/// What the receiver knows about finger noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKnowledge {
    /// Thermal noise level only.
    #[default]
    Known,
    /// Measured at silent chips of the first block (includes interference).
    Estimated,
}

/// Synthetic bit source for BER sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// Probability that a bit is one.
    pub activation: f64,
    /// Bits per user per trial.
    pub bits: usize,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            activation: 0.1,
            bits: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub prior: PriorSource,
    pub noise: NoiseKnowledge,
    pub lambda_max: f64,
    pub grid_points: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            prior: PriorSource::Oracle,
            noise: NoiseKnowledge::Known,
            lambda_max: 1e3,
            grid_points: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnnConfig {
    pub beta: f64,
    pub threshold: f64,
    pub steps_per_slice: usize,
    pub presentation: Presentation,
    /// Toy dataset file; the bundled test split when absent.
    pub dataset: Option<PathBuf>,
    /// Use only the first `samples` frames of the dataset.
    pub samples: Option<usize>,
}

impl Default for SnnConfig {
    fn default() -> Self {
        SnnConfig {
            beta: 0.9,
            threshold: 1.0,
            steps_per_slice: 2,
            presentation: Presentation::Block,
            dataset: None,
            samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionConfig {
    /// Frames of the reference user to examine.
    pub frames: usize,
    /// Every user sends a one in every frame; otherwise OOK users are
    /// active with the source activation rate.
    pub all_active: bool,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig {
            frames: 100_000,
            all_active: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub level: Level,
    /// Channel preset: `cm1`, `single-path` or `awgn`.
    pub channel: String,
    /// SNR grid, `10 log10(E_s / N_0)` in dB; `inf` means noiseless.
    pub snr_db: Vec<f64>,
    /// Independent (channel, noise, data) draws per grid point.
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Skip the Monte Carlo part and report analytic values only.
    pub dry_run: bool,
    pub link: LinkConfig,
    pub source: SourceConfig,
    pub detector: DetectorConfig,
    pub snn: SnnConfig,
    pub collisions: CollisionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheme: Scheme::OokDigital,
            level: Level::Statistic,
            channel: "cm1".into(),
            snr_db: Vec::new(),
            trials: 500,
            seed: 0,
            output: None,
            dry_run: false,
            link: LinkConfig::default(),
            source: SourceConfig::default(),
            detector: DetectorConfig::default(),
            snn: SnnConfig::default(),
            collisions: CollisionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn channel_params(&self) -> Result<ChannelParams> {
        ChannelParams::preset(&self.channel)
    }

    /// Every violated rule, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .link
            .violations(true)
            .into_iter()
            .map(|m| format!("link: {m}"))
            .collect();
        match self.channel_params() {
            Ok(p) => {
                v.extend(p.violations().into_iter().map(|m| format!("channel: {m}")));
                if p.max_delay_ns + self.link.pulses_per_frame as f64 * self.link.chip_ns
                    > self.link.frame_ns
                {
                    v.push(format!(
                        "channel: delay spread {} ns plus N_p chips exceeds the {} ns frame",
                        p.max_delay_ns, self.link.frame_ns
                    ));
                }
            }
            Err(e) => v.push(format!("channel: {e}")),
        }
        if self.snr_db.is_empty() {
            v.push("snr_db: grid must not be empty".into());
        }
        if let Some(s) = self
            .snr_db
            .iter()
            .find(|s| s.is_nan() || **s == f64::NEG_INFINITY)
        {
            v.push(format!("snr_db: {s} is not a usable SNR"));
        }
        if self.trials == 0 {
            v.push("trials: must be at least 1".into());
        }
        if self.scheme.is_ppm() && self.link.pulses_per_frame > 1 {
            v.push(format!(
                "scheme: intra-frame repetition (N_p = {}) is only defined for OOK",
                self.link.pulses_per_frame
            ));
        }
        if !(0.0..=1.0).contains(&self.source.activation) {
            v.push(format!(
                "source.activation: {} outside [0, 1]",
                self.source.activation
            ));
        }
        if self.source.bits == 0 {
            v.push("source.bits: must be at least 1".into());
        }
        if !(self.detector.lambda_max >= 1.0) {
            v.push(format!(
                "detector.lambda_max: {} must be >= 1",
                self.detector.lambda_max
            ));
        }
        if self.detector.grid_points < 2 {
            v.push("detector.grid_points: need at least 2".into());
        }
        if !(self.snn.beta > 0.0 && self.snn.beta < 1.0) {
            v.push(format!(
                "snn.beta: {} must lie strictly inside (0, 1)",
                self.snn.beta
            ));
        }
        if !(self.snn.threshold > 0.0) {
            v.push(format!(
                "snn.threshold: {} must be positive",
                self.snn.threshold
            ));
        }
        if self.snn.steps_per_slice == 0 {
            v.push("snn.steps_per_slice: must be at least 1".into());
        }
        if self.collisions.frames == 0 {
            v.push("collisions.frames: must be at least 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Hex SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serialises");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parse TOML text, rejecting unknown keys, and validate the result.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
