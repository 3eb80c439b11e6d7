//! Time-hopping codes and the TH-OOK / TH-PPM pulse trains they produce.
//!
//! cargo run --example modulation

use impulse_rake::events::BitStream;
use impulse_rake::tx::{gen_th_code, modulate_ook, modulate_ppm, monocycle, LinkConfig};

fn main() -> impulse_rake::Result<()> {
    let cfg = LinkConfig {
        frames_per_bit: 3,
        pulses_per_frame: 2,
        users: 1,
        ..LinkConfig::default()
    };
    let bits = BitStream {
        user: 0,
        bits: vec![1, 0, 0, 1],
    };
    let code = gen_th_code(11, 0, &cfg, bits.len())?;
    println!(
        "N_h = {}, N_s = {}",
        cfg.chips_per_frame(),
        cfg.total_repetitions()
    );
    for n in 0..bits.len() {
        let hops: Vec<_> = (0..cfg.frames_per_bit)
            .map(|j| code.chips(n, j).to_vec())
            .collect();
        println!("bit {n} ({}) chips per frame {hops:?}", bits.bits[n]);
    }

    let ook = modulate_ook(&bits, &code, &cfg)?;
    println!("OOK: {} pulses (zeros send nothing)", ook.len());
    print!("{}", ook.to_csv());

    let ppm_cfg = LinkConfig {
        pulses_per_frame: 1,
        ..cfg.clone()
    };
    let ppm_code = gen_th_code(11, 0, &ppm_cfg, bits.len())?;
    let ppm = modulate_ppm(&bits, &ppm_code, &ppm_cfg)?;
    println!("PPM: {} pulses (every bit sends)", ppm.len());

    let shape = cfg.pulse_shape();
    let dt = 1e-3;
    let energy: f64 = (-20_000..=20_000)
        .map(|i| monocycle(i as f64 * dt, &shape).powi(2) * dt)
        .sum();
    println!(
        "monocycle energy {energy:.9}, w(0) = {:.4}",
        monocycle(0.0, &shape)
    );
    Ok(())
}
