//! Pulse-collision rate of TH-OOK versus TH-PPM as the user count grows.
//!
//! cargo run --release --example collisions

use impulse_rake::sim::{
    analytic_collision_probability, run_collision_analysis, ExperimentConfig, Scheme,
};

fn main() -> impulse_rake::Result<()> {
    println!("   K  N_p  scheme        empirical  analytic");
    for users in [2, 4, 16] {
        for (scheme, n_p) in [
            (Scheme::OokDigital, 1),
            (Scheme::OokDigital, 2),
            (Scheme::PpmDigital, 1),
        ] {
            let mut cfg = ExperimentConfig {
                scheme,
                snr_db: vec![0.0],
                ..ExperimentConfig::default()
            };
            cfg.link.users = users;
            cfg.link.pulses_per_frame = n_p;
            cfg.collisions.all_active = false;
            let r = run_collision_analysis(&cfg)?;
            // OOK users pulse only on ones; PPM users pulse on every bit.
            let activity = if scheme.is_ppm() {
                1.0
            } else {
                cfg.source.activation
            };
            let analytic =
                analytic_collision_probability(users, cfg.link.chips_per_frame(), n_p, activity);
            println!(
                "{users:>4}  {n_p:>3}  {:<12}  {:.5}    {analytic:.5}",
                scheme.name(),
                r.value.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
