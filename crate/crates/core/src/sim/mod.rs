//! Experiment configuration and seeded Monte Carlo orchestration.
//!
//! Every trial draws its channel, hop codes, data and noise from a seed
//! derived from `(master seed, grid point, trial)`, and results are folded
//! in trial order, so outputs do not depend on the number of threads.
//!
//! SNR is `10 log10(E_s / N_0)` with unit-power channels; `E_s` is per pulse
//! or per bit according to the link's energy mode.

mod config;
mod link;
mod run;

pub use config::{
    parse_config, CollisionConfig, DetectorConfig, ExperimentConfig, Level, NoiseKnowledge,
    PriorSource, Scheme, SnnConfig, SourceConfig,
};
pub use link::{at_snr, detect_users, estimate_priors, random_streams, Link, NOISE_FLOOR};
pub use run::{
    analytic_collision_probability, ber_sweep_csv, channel_dataset, receive_frame, records_csv,
    run_ber_sweep, run_collision_analysis, run_e2e_adapted, run_e2e_trial, wilson_interval, Metric,
    ResultRecord, Z99,
};
