//! Selective-RAKE receiver.
//!
//! The receiver keeps the `L` strongest paths of each user, correlates the
//! received block with the (N_p-pulse) template of every finger in every
//! frame and combines fingers with MRC weights `beta = alpha / sigma^2`.
//!
//! Finger noise variances follow the [`VarianceModel`] convention:
//! `AsPrinted` stores the single-pulse correlator variance and the combined
//! moments are `mu = sqrt(E_s) N_p S`, `sigma^2 = N_p S` with
//! `S = sum alpha^2 / sigma_l^2`; `Derived` stores the variance of the whole
//! N_p-pulse template and drops the `N_p` in `sigma^2`. Both describe the
//! same Gaussian model when the variances are supplied consistently.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{ChannelRealization, ReceivedWaveform};
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::tx::{correlate_cyclic, EnergyMode, HopCode, LinkConfig, PulseShape, VarianceModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Finger {
    pub delay_ns: f64,
    pub gain: f64,
    pub noise_var: f64,
}

/// The `L` strongest taps of one user with their noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerSet {
    pub user: usize,
    pub fingers: Vec<Finger>,
}

impl FingerSet {
    pub fn len(&self) -> usize {
        self.fingers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingers.is_empty()
    }

    /// MRC weights `alpha_l / sigma_l^2`.
    pub fn weights(&self) -> Vec<f64> {
        self.fingers.iter().map(|f| f.gain / f.noise_var).collect()
    }

    pub fn with_noise_variances(mut self, vars: &[f64]) -> Result<Self> {
        if vars.len() != self.fingers.len() {
            return Err(Error::Structure(format!(
                "{} variances for {} fingers",
                vars.len(),
                self.fingers.len()
            )));
        }
        for (f, &v) in self.fingers.iter_mut().zip(vars) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "finger at {} ns has noise variance {v}",
                    f.delay_ns
                )));
            }
            f.noise_var = v;
        }
        Ok(self)
    }

    pub fn with_uniform_noise(self, var: f64) -> Result<Self> {
        let n = self.fingers.len();
        self.with_noise_variances(&vec![var; n])
    }

    /// `sum alpha_l^2 / sigma_l^2`.
    pub fn combining_gain(&self) -> f64 {
        self.fingers
            .iter()
            .map(|f| f.gain * f.gain / f.noise_var)
            .sum()
    }
}

/// Pick the `l` strongest taps, strongest first; equal powers prefer the
/// earlier tap. Noise variances start at 1.
pub fn select_paths(r: &ChannelRealization, l: usize) -> Result<FingerSet> {
    if l == 0 || l > r.taps.len() {
        return Err(Error::Config(format!(
            "cannot select {l} fingers from {} taps",
            r.taps.len()
        )));
    }
    let mut taps = r.taps.clone();
    taps.sort_by(|a, b| {
        (b.gain * b.gain)
            .total_cmp(&(a.gain * a.gain))
            .then(a.delay_ns.total_cmp(&b.delay_ns))
    });
    Ok(FingerSet {
        user: r.user,
        fingers: taps
            .into_iter()
            .take(l)
            .map(|t| Finger {
                delay_ns: t.delay_ns,
                gain: t.gain,
                noise_var: 1.0,
            })
            .collect(),
    })
}

fn check_delay(delay_ns: f64, cfg: &LinkConfig) -> Result<()> {
    if delay_ns < 0.0 || delay_ns >= cfg.frame_ns {
        return Err(Error::Config(format!(
            "template delay {delay_ns} ns extends beyond the {} ns frame",
            cfg.frame_ns
        )));
    }
    Ok(())
}

fn template_correlation(
    frame: &[f64],
    cfg: &LinkConfig,
    shape: &PulseShape,
    chip: u16,
    delay_ns: f64,
) -> f64 {
    let centre = chip as f64 * cfg.chip_ns + cfg.chip_ns / 2.0 + delay_ns;
    correlate_cyclic(frame, cfg.samples_per_ns, centre, shape)
}

/// Correlator output `Y_{n,j,l}` of one finger in frame `j` of the block
/// carried by `received` (bit `received.bit`), against the N_p-pulse
/// template of `code`.
pub fn correlate(
    received: &ReceivedWaveform,
    code: &HopCode,
    finger: &Finger,
    cfg: &LinkConfig,
    j: usize,
) -> Result<f64> {
    check_delay(finger.delay_ns, cfg)?;
    if j >= received.frames() {
        return Err(Error::Structure(format!(
            "frame {j} outside the received block"
        )));
    }
    let shape = cfg.pulse_shape();
    let frame = received.frame(j);
    Ok(code
        .chips(received.bit, j)
        .iter()
        .map(|&c| template_correlation(frame, cfg, &shape, c, finger.delay_ns))
        .sum())
}

/// PPM finger statistic: correlation with the shifted template minus the
/// unshifted one, in the first hop chip of frame `j`.
pub fn correlate_ppm(
    received: &ReceivedWaveform,
    code: &HopCode,
    finger: &Finger,
    cfg: &LinkConfig,
    j: usize,
) -> Result<f64> {
    check_delay(finger.delay_ns, cfg)?;
    let shape = cfg.pulse_shape();
    let frame = received.frame(j);
    let c = code.chips(received.bit, j)[0];
    let one = template_correlation(frame, cfg, &shape, c, finger.delay_ns + cfg.ppm_shift_ns);
    let zero = template_correlation(frame, cfg, &shape, c, finger.delay_ns);
    Ok(one - zero)
}

/// Per-finger correlator outputs, indexed `(user, bit, frame, finger)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerOutput {
    pub users: usize,
    pub bits: usize,
    pub frames: usize,
    pub fingers: usize,
    pub y: Vec<f64>,
}

impl FingerOutput {
    pub fn zeros(users: usize, bits: usize, frames: usize, fingers: usize) -> Self {
        FingerOutput {
            users,
            bits,
            frames,
            fingers,
            y: vec![0.0; users * bits * frames * fingers],
        }
    }

    #[inline]
    pub fn index(&self, k: usize, n: usize, j: usize, l: usize) -> usize {
        ((k * self.bits + n) * self.frames + j) * self.fingers + l
    }

    pub fn get(&self, k: usize, n: usize, j: usize, l: usize) -> f64 {
        self.y[self.index(k, n, j, l)]
    }

    pub fn set(&mut self, k: usize, n: usize, j: usize, l: usize, v: f64) {
        let i = self.index(k, n, j, l);
        self.y[i] = v;
    }
}

/// Gaussian moments of the combined statistic: `Y ~ N(b mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMoments {
    pub mu: f64,
    pub sigma: f64,
}

/// Frame-level statistics `Y_{n,j}^{(k)}` of all users plus their moments.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStatistics {
    pub users: usize,
    pub bits: usize,
    pub frames: usize,
    pub y: Vec<f64>,
    pub moments: Vec<LinkMoments>,
}

impl FrameStatistics {
    pub fn new(
        users: usize,
        bits: usize,
        frames: usize,
        y: Vec<f64>,
        moments: Vec<LinkMoments>,
    ) -> Result<Self> {
        if y.len() != users * bits * frames || moments.len() != users {
            return Err(Error::Structure(format!(
                "statistics of shape {users}x{bits}x{frames} need {} values and {users} moments, got {} and {}",
                users * bits * frames,
                y.len(),
                moments.len()
            )));
        }
        if let Some(m) = moments.iter().find(|m| !(m.sigma > 0.0)) {
            return Err(Error::Numerical(format!(
                "link sigma {} is not positive",
                m.sigma
            )));
        }
        Ok(FrameStatistics {
            users,
            bits,
            frames,
            y,
            moments,
        })
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize, j: usize) -> f64 {
        self.y[(k * self.bits + n) * self.frames + j]
    }

    /// All `N_b * N_f` statistics of user `k`, bit-major.
    pub fn user(&self, k: usize) -> &[f64] {
        let len = self.bits * self.frames;
        &self.y[k * len..(k + 1) * len]
    }

    /// CSV rows `k,n,j,Y` (with header).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,n,j,Y\n");
        for k in 0..self.users {
            for n in 0..self.bits {
                for j in 0..self.frames {
                    s.push_str(&format!("{k},{n},{j},{}\n", self.get(k, n, j)));
                }
            }
        }
        s
    }
}

/// Per-pulse amplitude of an OOK link, `sqrt(E_s)` or its per-bit share.
fn ook_amplitude(cfg: &LinkConfig) -> f64 {
    match cfg.energy_mode {
        EnergyMode::PerPulse => cfg.symbol_energy.sqrt(),
        EnergyMode::PerBit => (cfg.symbol_energy / cfg.total_repetitions() as f64).sqrt(),
    }
}

/// Combined mean and standard deviation of an OOK link.
pub fn link_stats(set: &FingerSet, cfg: &LinkConfig) -> Result<LinkMoments> {
    if let Some(f) = set.fingers.iter().find(|f| !(f.noise_var > 0.0)) {
        return Err(Error::Numerical(format!(
            "finger at {} ns has zero noise variance",
            f.delay_ns
        )));
    }
    let s = set.combining_gain();
    let n_p = cfg.pulses_per_frame as f64;
    let mu = ook_amplitude(cfg) * n_p * s;
    let var = match cfg.variance_model {
        VarianceModel::AsPrinted => n_p * s,
        VarianceModel::Derived => s,
    };
    Ok(LinkMoments {
        mu,
        sigma: var.sqrt(),
    })
}

/// Normalized monocycle autocorrelation at lag `x_ns`.
pub fn pulse_autocorrelation(x_ns: f64, shape: &PulseShape) -> f64 {
    let u2 = (x_ns / shape.tau_ns).powi(2);
    let pi = std::f64::consts::PI;
    (1.0 - 4.0 * pi * u2 + 4.0 * pi * pi / 3.0 * u2 * u2) * (-pi * u2).exp()
}

/// Moments of the PPM statistic shifted by half its separation, so that a
/// zero-bit has mean 0 and a one-bit mean `mu`, like OOK.
pub fn ppm_link_stats(set: &FingerSet, cfg: &LinkConfig) -> Result<LinkMoments> {
    if let Some(f) = set.fingers.iter().find(|f| !(f.noise_var > 0.0)) {
        return Err(Error::Numerical(format!(
            "finger at {} ns has zero noise variance",
            f.delay_ns
        )));
    }
    let s = set.combining_gain();
    let amp = match cfg.energy_mode {
        EnergyMode::PerPulse => cfg.symbol_energy.sqrt(),
        EnergyMode::PerBit => (cfg.symbol_energy / cfg.frames_per_bit as f64).sqrt(),
    };
    let sep = 1.0 - pulse_autocorrelation(cfg.ppm_shift_ns, &cfg.pulse_shape());
    Ok(LinkMoments {
        mu: 2.0 * amp * sep * s,
        sigma: (2.0 * sep * s).sqrt(),
    })
}

/// `Y_{n,j} = sum_l beta_l Y_{n,j,l}`, with moments from [`link_stats`].
pub fn mrc_combine(
    out: &FingerOutput,
    sets: &[FingerSet],
    cfg: &LinkConfig,
) -> Result<FrameStatistics> {
    if sets.len() != out.users {
        return Err(Error::Structure(format!(
            "{} finger sets for {} users",
            sets.len(),
            out.users
        )));
    }
    let mut y = Vec::with_capacity(out.users * out.bits * out.frames);
    let mut moments = Vec::with_capacity(out.users);
    for (k, set) in sets.iter().enumerate() {
        if set.len() != out.fingers {
            return Err(Error::Structure(format!(
                "user {k} has {} fingers, output has {}",
                set.len(),
                out.fingers
            )));
        }
        let w = set.weights();
        for n in 0..out.bits {
            for j in 0..out.frames {
                y.push((0..out.fingers).map(|l| w[l] * out.get(k, n, j, l)).sum());
            }
        }
        moments.push(link_stats(set, cfg)?);
    }
    FrameStatistics::new(out.users, out.bits, out.frames, y, moments)
}

/// Draw `Y ~ N(b mu, sigma^2)`.
pub fn sample_statistic<R: Rng + ?Sized>(b: u8, m: &LinkMoments, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    b as f64 * m.mu + m.sigma * z
}

/// Seeded single draw of the Gaussian statistic model.
pub fn statistic_model_sample(b: u8, m: &LinkMoments, seed: u64) -> f64 {
    sample_statistic(b, m, &mut substream(seed, &[domain::STATISTIC]))
}

/// Minimum number of silent-chip correlations needed for a noise estimate.
pub const MIN_SILENT_CHIPS: usize = 30;

/// Estimate the N_p-template noise variance of a finger from single-pulse
/// correlations at the chips this user leaves empty in every frame of the
/// block. Returns `N_p * s^2`, `s^2` the unbiased variance of the
/// single-chip outputs; divide by `N_p` for the single-pulse variance.
pub fn estimate_finger_noise(
    received: &ReceivedWaveform,
    code: &HopCode,
    finger: &Finger,
    cfg: &LinkConfig,
) -> Result<f64> {
    check_delay(finger.delay_ns, cfg)?;
    let shape = cfg.pulse_shape();
    let n_h = cfg.chips_per_frame();
    let mut samples = Vec::new();
    for j in 0..received.frames() {
        let used = code.chips(received.bit, j);
        let frame = received.frame(j);
        for c in 0..n_h as u16 {
            if !used.contains(&c) {
                samples.push(template_correlation(frame, cfg, &shape, c, finger.delay_ns));
            }
        }
    }
    if samples.len() < MIN_SILENT_CHIPS {
        return Err(Error::Estimation(format!(
            "only {} silent chips, need {MIN_SILENT_CHIPS}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(cfg.pulses_per_frame as f64 * var)
}
