use rand::seq::index::sample;

use super::LinkConfig;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};

/// Pseudo-random chip assignment of one user.
///
/// The sequence is one continuous stream keyed by `(seed, user)` and consumed
/// bit by bit, frame by frame; each frame draws `N_p` distinct chips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopCode {
    pub user: usize,
    pub seed: u64,
    n_bits: usize,
    frames_per_bit: usize,
    pulses_per_frame: usize,
    chips_per_frame: usize,
    chips: Vec<u16>,
}

impl HopCode {
    /// Chips used by bit `n` in frame `j`.
    pub fn chips(&self, n: usize, j: usize) -> &[u16] {
        let start = (n * self.frames_per_bit + j) * self.pulses_per_frame;
        &self.chips[start..start + self.pulses_per_frame]
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn frames_per_bit(&self) -> usize {
        self.frames_per_bit
    }

    pub fn pulses_per_frame(&self) -> usize {
        self.pulses_per_frame
    }

    pub fn chips_per_frame(&self) -> usize {
        self.chips_per_frame
    }

    /// Whole sequence in consumption order.
    pub fn sequence(&self) -> &[u16] {
        &self.chips
    }
}

pub fn gen_th_code(seed: u64, user: usize, cfg: &LinkConfig, n_bits: usize) -> Result<HopCode> {
    let n_h = cfg.chips_per_frame();
    let n_p = cfg.pulses_per_frame;
    if n_p > n_h {
        return Err(Error::Config(format!("N_p = {n_p} exceeds N_h = {n_h}")));
    }
    if n_p == 0 || n_h > u16::MAX as usize {
        return Err(Error::Config(format!(
            "unsupported N_p = {n_p}, N_h = {n_h}"
        )));
    }
    let mut rng = substream(seed, &[domain::HOP_CODE, user as u64]);
    let frames = n_bits * cfg.frames_per_bit;
    let mut chips = Vec::with_capacity(frames * n_p);
    for _ in 0..frames {
        chips.extend(sample(&mut rng, n_h, n_p).into_iter().map(|c| c as u16));
    }
    Ok(HopCode {
        user,
        seed,
        n_bits,
        frames_per_bit: cfg.frames_per_bit,
        pulses_per_frame: n_p,
        chips_per_frame: n_h,
        chips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_f: usize, n_p: usize) -> LinkConfig {
        LinkConfig {
            frames_per_bit: n_f,
            pulses_per_frame: n_p,
            ..LinkConfig::default()
        }
    }

    #[test]
    fn one_chip_per_frame_in_range() {
        let code = gen_th_code(1, 0, &cfg(3, 1), 100).unwrap();
        for n in 0..100 {
            for j in 0..3 {
                let c = code.chips(n, j);
                assert_eq!(c.len(), 1);
                assert!(c[0] < 50);
            }
        }
    }

    #[test]
    fn exhaustive_draw_selects_every_chip() {
        let code = gen_th_code(5, 2, &cfg(1, 50), 4).unwrap();
        for n in 0..4 {
            let mut c = code.chips(n, 0).to_vec();
            c.sort_unstable();
            assert_eq!(c, (0..50).collect::<Vec<u16>>());
        }
    }

    #[test]
    fn deterministic_and_user_specific() {
        let a = gen_th_code(9, 3, &cfg(3, 2), 50).unwrap();
        let b = gen_th_code(9, 3, &cfg(3, 2), 50).unwrap();
        let c = gen_th_code(9, 4, &cfg(3, 2), 50).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sequence(), c.sequence());
    }

    #[test]
    fn chips_distinct_within_frame() {
        let code = gen_th_code(11, 0, &cfg(5, 7), 200).unwrap();
        for n in 0..200 {
            for j in 0..5 {
                let mut c = code.chips(n, j).to_vec();
                c.sort_unstable();
                c.dedup();
                assert_eq!(c.len(), 7);
            }
        }
    }

    #[test]
    fn rejects_too_many_pulses() {
        let mut c = cfg(1, 1);
        c.pulses_per_frame = 51;
        assert!(matches!(gen_th_code(0, 0, &c, 1), Err(Error::Config(_))));
    }

    #[test]
    fn chips_roughly_uniform() {
        let code = gen_th_code(3, 0, &cfg(1, 1), 50_000).unwrap();
        let mut hist = [0usize; 50];
        for &c in code.sequence() {
            hist[c as usize] += 1;
        }
        // each bin ~ Binomial(50000, 0.02): mean 1000, sd ~ 31
        assert!(hist.iter().all(|&h| (h as f64 - 1000.0).abs() < 5.0 * 31.3));
    }
}
