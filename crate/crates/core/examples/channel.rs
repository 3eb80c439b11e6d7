//! CM1-style multipath realizations: tap counts, power, delay spread.
//!
//! cargo run --example channel -- [seed]

use impulse_rake::channel::{sample_channel, ChannelParams};

fn main() -> impulse_rake::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(1, |s| s.parse().expect("seed"));
    let params = ChannelParams::preset("cm1")?;
    println!("user  taps  power      strongest  rms delay (ns)");
    for user in 0..8 {
        let r = sample_channel(&params, seed, user, 0)?;
        let strongest = r.taps.iter().map(|t| t.gain.abs()).fold(0.0, f64::max);
        let mean: f64 = r
            .taps
            .iter()
            .map(|t| t.gain * t.gain * t.delay_ns)
            .sum::<f64>()
            / r.power();
        let rms = (r
            .taps
            .iter()
            .map(|t| t.gain * t.gain * (t.delay_ns - mean).powi(2))
            .sum::<f64>()
            / r.power())
        .sqrt();
        println!(
            "{user:>4}  {:>4}  {:.12}  {strongest:.4}     {rms:.2}",
            r.taps.len(),
            r.power()
        );
    }
    Ok(())
}
