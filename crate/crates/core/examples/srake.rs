//! Selective RAKE on one CM1 link: finger choice, per-finger correlation,
//! maximal ratio combining, and the predicted (mu, sigma) per finger count.
//!
//! cargo run --release --example srake

use impulse_rake::channel::{propagate, sample_channel, ChannelParams};
use impulse_rake::events::BitStream;
use impulse_rake::rake::{correlate, link_stats, select_paths};
use impulse_rake::tx::{gen_th_code, modulate_ook, LinkConfig};

fn main() -> impulse_rake::Result<()> {
    let cfg = LinkConfig {
        frames_per_bit: 3,
        users: 1,
        noise_psd: 0.1,
        ..LinkConfig::default()
    };
    let r = sample_channel(&ChannelParams::preset("cm1")?, 3, 0, 0)?;
    println!("{} taps, power {:.6}", r.taps.len(), r.power());
    for l in [1, 2, 4, 8, 16] {
        let set = select_paths(&r, l.min(r.taps.len()))?.with_uniform_noise(cfg.noise_psd / 2.0)?;
        let m = link_stats(&set, &cfg)?;
        println!(
            "L = {l:>2}: captured energy {:.3}, mu/sigma {:.3}",
            set.combining_gain() * cfg.noise_psd / 2.0,
            m.mu / m.sigma
        );
    }

    let bits = BitStream {
        user: 0,
        bits: vec![1, 0, 1, 1, 0],
    };
    let code = gen_th_code(3, 0, &cfg, bits.len())?;
    let train = modulate_ook(&bits, &code, &cfg)?;
    let set = select_paths(&r, cfg.fingers)?.with_uniform_noise(cfg.noise_psd / 2.0)?;
    let w = set.weights();
    for n in 0..bits.len() {
        let rx = propagate(
            std::slice::from_ref(&train),
            std::slice::from_ref(&r),
            &cfg,
            n,
            100 + n as u64,
        )?;
        let y: Vec<f64> = (0..cfg.frames_per_bit)
            .map(|j| {
                let mut acc = 0.0;
                for (f, wl) in set.fingers.iter().zip(&w) {
                    acc += wl * correlate(&rx, &code, f, &cfg, j)?;
                }
                Ok(acc)
            })
            .collect::<impulse_rake::Result<_>>()?;
        let yf: Vec<String> = y.iter().map(|v| format!("{v:8.2}")).collect();
        println!(
            "bit {n} = {}: combined per frame {}",
            bits.bits[n],
            yf.join("")
        );
    }
    println!("expected: {:?}", link_stats(&set, &cfg)?);
    Ok(())
}
