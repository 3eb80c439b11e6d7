use super::{add_pulse_cyclic, HopCode, LinkConfig};
use crate::error::{Error, Result};
use crate::events::BitStream;

/// One transmitted pulse. `time_ns` is the start of its chip measured from
/// the start of the bit's frame block (plus the PPM shift, if any); the
/// pulse itself is centred half a chip later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub user: usize,
    pub bit: usize,
    pub frame: usize,
    pub time_ns: f64,
    pub amplitude: f64,
}

/// Symbolic pulse list of one user's bit stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseTrain {
    pub pulses: Vec<Pulse>,
}

impl PulseTrain {
    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Pulses belonging to bit `n`.
    pub fn for_bit(&self, n: usize) -> impl Iterator<Item = &Pulse> {
        self.pulses.iter().filter(move |p| p.bit == n)
    }

    /// Channel-free sampled waveform of the `N_f`-frame block of bit `n`.
    pub fn sample_block(&self, n: usize, cfg: &LinkConfig) -> Vec<f64> {
        let spf = cfg.samples_per_frame();
        let shape = cfg.pulse_shape();
        let mut out = vec![0.0; spf * cfg.frames_per_bit];
        for p in self.for_bit(n) {
            let frame = &mut out[p.frame * spf..(p.frame + 1) * spf];
            let centre = p.time_ns - p.frame as f64 * cfg.frame_ns + cfg.chip_ns / 2.0;
            add_pulse_cyclic(frame, cfg.samples_per_ns, centre, p.amplitude, &shape);
        }
        out
    }

    /// CSV rows `user,bit,frame,time_ns,amplitude` (with header).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("user,bit,frame,time_ns,amplitude\n");
        for p in &self.pulses {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.user, p.bit, p.frame, p.time_ns, p.amplitude
            ));
        }
        s
    }
}

fn check_coverage(bits: &BitStream, code: &HopCode, cfg: &LinkConfig) -> Result<()> {
    if code.n_bits() < bits.len() {
        return Err(Error::Structure(format!(
            "hop code covers {} bits, stream has {}",
            code.n_bits(),
            bits.len()
        )));
    }
    if code.frames_per_bit() != cfg.frames_per_bit {
        return Err(Error::Structure(
            "hop code built for a different N_f".into(),
        ));
    }
    Ok(())
}

/// TH-OOK with two-timescale repetition: a one-bit emits `N_p` pulses in
/// each of its `N_f` frames; a zero-bit emits nothing.
pub fn modulate_ook(bits: &BitStream, code: &HopCode, cfg: &LinkConfig) -> Result<PulseTrain> {
    check_coverage(bits, code, cfg)?;
    let amplitude = cfg.pulse_amplitude(cfg.total_repetitions());
    let mut pulses = Vec::with_capacity(bits.ones() * cfg.total_repetitions());
    for (n, &b) in bits.bits.iter().enumerate() {
        if b == 0 {
            continue;
        }
        for j in 0..cfg.frames_per_bit {
            for &c in code.chips(n, j) {
                pulses.push(Pulse {
                    user: bits.user,
                    bit: n,
                    frame: j,
                    time_ns: j as f64 * cfg.frame_ns + c as f64 * cfg.chip_ns,
                    amplitude,
                });
            }
        }
    }
    Ok(PulseTrain { pulses })
}

/// Binary TH-PPM benchmark: one pulse per frame regardless of the bit, in
/// the first hop chip of the frame, delayed by `ppm_shift_ns` for a one-bit.
/// Only inter-frame repetition is used.
pub fn modulate_ppm(bits: &BitStream, code: &HopCode, cfg: &LinkConfig) -> Result<PulseTrain> {
    check_coverage(bits, code, cfg)?;
    let amplitude = cfg.pulse_amplitude(cfg.frames_per_bit);
    let mut pulses = Vec::with_capacity(bits.len() * cfg.frames_per_bit);
    for (n, &b) in bits.bits.iter().enumerate() {
        for j in 0..cfg.frames_per_bit {
            let c = code.chips(n, j)[0];
            pulses.push(Pulse {
                user: bits.user,
                bit: n,
                frame: j,
                time_ns: j as f64 * cfg.frame_ns
                    + c as f64 * cfg.chip_ns
                    + if b == 1 { cfg.ppm_shift_ns } else { 0.0 },
                amplitude,
            });
        }
    }
    Ok(PulseTrain { pulses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{gen_th_code, EnergyMode};
    use proptest::prelude::*;

    fn cfg(n_f: usize, n_p: usize) -> LinkConfig {
        LinkConfig {
            frames_per_bit: n_f,
            pulses_per_frame: n_p,
            symbol_energy: 2.25,
            ..LinkConfig::default()
        }
    }

    fn stream(bits: Vec<u8>) -> BitStream {
        BitStream { user: 0, bits }
    }

    #[test]
    fn silent_on_zero_stream() {
        let c = cfg(3, 2);
        let code = gen_th_code(1, 0, &c, 8).unwrap();
        assert!(modulate_ook(&stream(vec![0; 8]), &code, &c)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn one_bit_two_timescale_layout() {
        let c = cfg(3, 2);
        let code = gen_th_code(1, 0, &c, 1).unwrap();
        let train = modulate_ook(&stream(vec![1]), &code, &c).unwrap();
        assert_eq!(train.len(), 6);
        for j in 0..3 {
            let times: Vec<f64> = train
                .pulses
                .iter()
                .filter(|p| p.frame == j)
                .map(|p| p.time_ns)
                .collect();
            assert_eq!(times.len(), 2);
            assert_ne!(times[0], times[1]);
            for t in times {
                assert!(t >= j as f64 * 100.0 && t < (j + 1) as f64 * 100.0);
            }
        }
        assert!(train.pulses.iter().all(|p| p.amplitude == 1.5));
    }

    #[test]
    fn per_bit_mode_spreads_energy() {
        let mut c = cfg(3, 2);
        c.energy_mode = EnergyMode::PerBit;
        let code = gen_th_code(1, 0, &c, 1).unwrap();
        let train = modulate_ook(&stream(vec![1]), &code, &c).unwrap();
        let e: f64 = train.pulses.iter().map(|p| p.amplitude.powi(2)).sum();
        assert!((e - 2.25).abs() < 1e-12);
    }

    #[test]
    fn ppm_pulses_every_frame() {
        let c = cfg(5, 1);
        let code = gen_th_code(1, 0, &c, 4).unwrap();
        let zeros = modulate_ppm(&stream(vec![0; 4]), &code, &c).unwrap();
        let ones = modulate_ppm(&stream(vec![1; 4]), &code, &c).unwrap();
        assert_eq!(zeros.len(), 20);
        assert_eq!(ones.len(), 20);
        for (a, b) in zeros.pulses.iter().zip(&ones.pulses) {
            assert!((b.time_ns - a.time_ns - c.ppm_shift_ns).abs() < 1e-12);
            assert_eq!(a.amplitude, b.amplitude);
        }
    }

    #[test]
    fn single_pulse_waveform_energy() {
        let c = cfg(1, 1);
        let code = gen_th_code(4, 0, &c, 1).unwrap();
        let train = modulate_ook(&stream(vec![1]), &code, &c).unwrap();
        let w = train.sample_block(0, &c);
        let e: f64 = w.iter().map(|x| x * x).sum::<f64>() / c.samples_per_ns;
        assert!((e / c.symbol_energy - 1.0).abs() < 1e-4, "energy {e}");
    }

    #[test]
    fn short_code_rejected() {
        let c = cfg(1, 1);
        let code = gen_th_code(4, 0, &c, 2).unwrap();
        assert!(modulate_ook(&stream(vec![1; 3]), &code, &c).is_err());
    }

    #[test]
    fn chip_occupancy_matches_expectation() {
        // p-sparse streams of 16 users: expected occupied fraction per
        // user-frame is p * N_p / N_h
        let c = cfg(1, 2);
        let p = 0.1;
        let n = 20_000;
        let mut occupied = 0usize;
        for user in 0..16 {
            let bits: Vec<u8> = crate::events::synth_sparse_frame(p, 100, n / 200, user as u64)
                .unwrap()
                .bits()
                .to_vec();
            let s = BitStream { user, bits };
            let code = gen_th_code(99, user, &c, s.len()).unwrap();
            occupied += modulate_ook(&s, &code, &c).unwrap().len();
        }
        let frames = 16.0 * n as f64;
        let frac = occupied as f64 / (frames * 50.0);
        let expect = p * 2.0 / 50.0;
        // pulses come in pairs, so the count variance is 4 * frames * p(1-p)
        let sd = (4.0 * frames * p * (1.0 - p)).sqrt() / (frames * 50.0);
        assert!((frac - expect).abs() < 3.0 * sd, "{frac} vs {expect}");
    }

    proptest! {
        #[test]
        fn pulse_counts(bits in proptest::collection::vec(0u8..=1, 1..40), n_f in 1usize..4, n_p in 1usize..4) {
            let c = cfg(n_f, n_p);
            let s = stream(bits);
            let code = gen_th_code(2, 0, &c, s.len()).unwrap();
            let ook = modulate_ook(&s, &code, &c).unwrap();
            prop_assert_eq!(ook.len(), n_f * n_p * s.ones());
            let ppm_cfg = cfg(n_f, 1);
            let code1 = gen_th_code(2, 0, &ppm_cfg, s.len()).unwrap();
            prop_assert_eq!(modulate_ppm(&s, &code1, &ppm_cfg).unwrap().len(), n_f * s.len());
            for p in &ook.pulses {
                prop_assert!(p.time_ns >= 0.0 && p.time_ns < n_f as f64 * c.frame_ns);
            }
        }
    }
}
