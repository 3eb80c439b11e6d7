//! Regenerate the bundled toy datasets.
//!
//! cargo run --example toy_dataset -- crates/core/data

use std::path::PathBuf;

use impulse_rake::snn::generate_toy;

fn main() -> impulse_rake::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data".into())
        .into();
    std::fs::create_dir_all(&dir)?;
    for (name, seed, per_class) in [("toy_train.txt", 2024, 80), ("toy_test.txt", 2025, 40)] {
        let d = generate_toy(seed, per_class, 16, 16);
        std::fs::write(dir.join(name), d.to_text())?;
        let rate: f64 = d.samples.iter().map(|s| s.frame.bit_rate()).sum::<f64>() / d.len() as f64;
        println!("{name}: {} samples, mean bit rate {rate:.4}", d.len());
    }
    Ok(())
}
