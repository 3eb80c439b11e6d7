//! BER versus SNR with the analytic overlay, straight from a config file.
//!
//! cargo run --release --example ber_sweep -- [config]

use impulse_rake::sim::{parse_config, run_ber_sweep};

fn main() -> impulse_rake::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ber_sweep.toml").into());
    let cfg = parse_config(&std::fs::read_to_string(&path)?)?;
    println!(
        "{} over {}, N_f = {}, N_p = {}, K = {}",
        cfg.scheme.name(),
        cfg.channel,
        cfg.link.frames_per_bit,
        cfg.link.pulses_per_frame,
        cfg.link.users
    );
    println!("  snr   empirical  [99% CI]               analytic   prior");
    for r in run_ber_sweep(&cfg)? {
        println!(
            "{:5}   {:.3e}  [{:.3e}, {:.3e}]   {:.3e}  {:.4}",
            r.snr_db.unwrap_or(f64::NAN),
            r.value.unwrap_or(f64::NAN),
            r.ci_low.unwrap_or(f64::NAN),
            r.ci_high.unwrap_or(f64::NAN),
            r.analytic.unwrap_or(f64::NAN),
            r.prior.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
