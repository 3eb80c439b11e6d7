//! Time-hopping impulse-radio transmitter.
//!
//! A bit occupies `N_f` consecutive frames of `T_f` ns, each split into
//! `N_h = T_f / T_c` chips. Under TH-OOK a one-bit places `N_p` pulses in
//! distinct pseudo-random chips of every frame and a zero-bit is silent;
//! TH-PPM places one pulse per frame and shifts it by `ppm_shift_ns` for a
//! one-bit. Pulses are centred in their chip.

mod hop;
mod modulate;
mod pulse;

pub use hop::{gen_th_code, HopCode};
pub use modulate::{modulate_ook, modulate_ppm, Pulse, PulseTrain};
pub use pulse::{monocycle, PulseShape};

pub(crate) use pulse::{add_pulse_cyclic, correlate_cyclic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `E_s` is spread over repeated pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    /// Every pulse carries `E_s`; bit energy grows with `N_s`.
    #[default]
    PerPulse,
    /// Pulses are scaled by `1/sqrt(N_s)` so one bit carries `E_s` in total.
    PerBit,
}

/// Interpretation of the per-finger noise variance in the link moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceModel {
    /// Finger variance is the single-pulse correlator variance and the
    /// combined variance carries an explicit `N_p` factor.
    #[default]
    AsPrinted,
    /// Finger variance is the variance of the full `N_p`-pulse template
    /// correlation; no extra `N_p` factor.
    Derived,
}

/// Physical-layer parameters shared by transmitter and receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Frame duration `T_f` (ns).
    pub frame_ns: f64,
    /// Chip duration `T_c` (ns).
    pub chip_ns: f64,
    /// Inter-frame repetitions `N_f`.
    pub frames_per_bit: usize,
    /// Intra-frame repetitions `N_p`.
    pub pulses_per_frame: usize,
    /// Users `K`.
    pub users: usize,
    /// Energy `E_s` per pulse (per bit under [`EnergyMode::PerBit`]).
    pub symbol_energy: f64,
    /// Noise PSD `N_0`; the noise is white with two-sided PSD `N_0 / 2`.
    pub noise_psd: f64,
    /// SRAKE fingers `L`.
    pub fingers: usize,
    pub samples_per_ns: f64,
    pub energy_mode: EnergyMode,
    /// PPM shift `delta` (ns).
    pub ppm_shift_ns: f64,
    /// Monocycle shape parameter `tau_p` (ns).
    pub pulse_tau_ns: f64,
    pub variance_model: VarianceModel,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            frame_ns: 100.0,
            chip_ns: 2.0,
            frames_per_bit: 9,
            pulses_per_frame: 1,
            users: 16,
            symbol_energy: 1.0,
            noise_psd: 1.0,
            fingers: 4,
            samples_per_ns: 16.0,
            energy_mode: EnergyMode::PerPulse,
            ppm_shift_ns: 1.0,
            pulse_tau_ns: PulseShape::DEFAULT_TAU_NS,
            variance_model: VarianceModel::AsPrinted,
        }
    }
}

impl LinkConfig {
    /// Chips per frame `N_h`.
    pub fn chips_per_frame(&self) -> usize {
        (self.frame_ns / self.chip_ns).round() as usize
    }

    /// Total repetitions `N_s = N_f * N_p`.
    pub fn total_repetitions(&self) -> usize {
        self.frames_per_bit * self.pulses_per_frame
    }

    /// Samples per frame at the configured rate.
    pub fn samples_per_frame(&self) -> usize {
        (self.frame_ns * self.samples_per_ns).round() as usize
    }

    pub fn pulse_shape(&self) -> PulseShape {
        PulseShape::new(self.pulse_tau_ns, self.chip_ns / 2.0)
    }

    /// Amplitude of one transmitted pulse.
    pub fn pulse_amplitude(&self, repetitions: usize) -> f64 {
        match self.energy_mode {
            EnergyMode::PerPulse => self.symbol_energy.sqrt(),
            EnergyMode::PerBit => (self.symbol_energy / repetitions as f64).sqrt(),
        }
    }

    /// Every violated invariant, as messages. `voting` requires odd `N_f`.
    pub fn violations(&self, voting: bool) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.frame_ns > 0.0) || !(self.chip_ns > 0.0) {
            v.push("frame_ns and chip_ns must be positive".to_string());
        } else {
            let ratio = self.frame_ns / self.chip_ns;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                v.push(format!(
                    "frame_ns = {} is not an integer multiple of chip_ns = {}",
                    self.frame_ns, self.chip_ns
                ));
            }
            if self.pulses_per_frame > self.chips_per_frame() {
                v.push(format!(
                    "N_p = {} exceeds N_h = {}",
                    self.pulses_per_frame,
                    self.chips_per_frame()
                ));
            }
        }
        if self.frames_per_bit == 0 {
            v.push("N_f must be at least 1".to_string());
        } else if voting && self.frames_per_bit % 2 == 0 {
            v.push(format!("N_f must be odd, got {}", self.frames_per_bit));
        }
        if self.pulses_per_frame == 0 {
            v.push("N_p must be at least 1".to_string());
        }
        if self.users == 0 {
            v.push("K must be at least 1".to_string());
        }
        if self.fingers == 0 {
            v.push("L must be at least 1".to_string());
        }
        if !(self.symbol_energy >= 0.0) {
            v.push("symbol energy must be non-negative".to_string());
        }
        if !(self.noise_psd >= 0.0) {
            v.push("noise PSD must be non-negative".to_string());
        }
        if !(self.samples_per_ns > 0.0) {
            v.push("samples_per_ns must be positive".to_string());
        }
        if !(self.pulse_tau_ns > 0.0) {
            v.push("pulse_tau_ns must be positive".to_string());
        }
        if !(self.ppm_shift_ns > 0.0 && self.ppm_shift_ns < self.chip_ns) {
            v.push(format!(
                "PPM shift {} must lie in (0, chip_ns)",
                self.ppm_shift_ns
            ));
        }
        v
    }

    pub fn validate(&self, voting: bool) -> Result<()> {
        let v = self.violations(voting);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}
