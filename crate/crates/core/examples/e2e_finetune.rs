//! Fine-tune a clean-trained classifier on channel-corrupted frames at each
//! SNR of a config, then report end-to-end accuracy before and after.
//!
//! cargo run --release --example e2e_finetune -- <config> <clean-weights> [epochs] [lr]
//!
//! Analog soft values are dense (every input sits near 0.3-0.6), so the
//! step size of the clean training run is too coarse here; 5e-4 works.

use impulse_rake::sim::{parse_config, run_e2e_adapted, run_e2e_trial};
use impulse_rake::snn::{bundled_train, decode_weights, Schedule, SnnNetwork, TrainConfig};

fn main() -> impulse_rake::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        eprintln!("usage: e2e_finetune <config> <clean-weights> [epochs] [lr]");
        std::process::exit(2);
    }
    let cfg = parse_config(&std::fs::read_to_string(&args[0])?)?;
    let layers = decode_weights(&std::fs::read(&args[1])?)?;
    let clean = SnnNetwork::new(layers, cfg.snn.beta, cfg.snn.threshold)?;
    let tc = TrainConfig {
        epochs: args.get(2).map_or(20, |s| s.parse().expect("epochs")),
        lr: args.get(3).map_or(5e-4, |s| s.parse().expect("lr")),
        schedule: Schedule {
            steps_per_slice: cfg.snn.steps_per_slice,
            presentation: cfg.snn.presentation,
        },
        ..TrainConfig::default()
    };

    let before = run_e2e_trial(&cfg, &clean)?;
    let (after, _) = run_e2e_adapted(&cfg, &clean, &bundled_train(), &tc)?;
    println!("{:>8}  {:>8}  {:>8}", "snr_db", "clean", "tuned");
    for (b, a) in before.iter().zip(&after) {
        println!(
            "{:>8}  {:>8.3}  {:>8.3}",
            b.snr_db.map_or("-".into(), |s| s.to_string()),
            b.value.unwrap_or(f64::NAN),
            a.value.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
