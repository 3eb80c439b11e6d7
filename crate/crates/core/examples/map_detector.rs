//! Sparsity-adapted MAP thresholds, the optimal bias, and the resulting BER
//! against the plain midpoint detector.
//!
//! cargo run --example map_detector

use impulse_rake::detect::{analytic_ber, estimate_sparsity, map_threshold, optimize_lambda};
use impulse_rake::rake::{sample_statistic, LinkMoments};
use impulse_rake::rng::substream;

fn main() -> impulse_rake::Result<()> {
    let (mu, sigma, n_f) = (2.0, 1.0, 3);
    println!(
        "eta(1, 0.5) = {:.4} (midpoint)",
        map_threshold(1.0, 0.5, mu, sigma)?
    );
    println!("eta(1, 0.1) = {:.4}", map_threshold(1.0, 0.1, mu, sigma)?);

    println!("\n    p  lambda*     eta*   BER(opt)  BER(midpoint)");
    for p in [0.01, 0.05, 0.1, 0.2, 0.5] {
        let opt = optimize_lambda(p, n_f, mu, sigma)?;
        let mid = analytic_ber(1.0, 0.5, n_f, mu, sigma)?;
        // The midpoint rule ignores the prior, but its errors still weigh by it.
        let mid_ber = p * mid.p_e1 + (1.0 - p) * mid.p_e0;
        println!(
            "{p:5.2}  {:7.3}  {:7.4}  {:.3e}  {:.3e}",
            opt.lambda, opt.eta, opt.ber, mid_ber
        );
    }

    let m = LinkMoments { mu, sigma };
    let mut rng = substream(9, &[]);
    let p_true = 0.08;
    let ys: Vec<f64> = (0..20_000)
        .map(|_| {
            sample_statistic(
                (rand::Rng::random::<f64>(&mut rng) < p_true) as u8,
                &m,
                &mut rng,
            )
        })
        .collect();
    let est = estimate_sparsity(&ys, &m)?;
    println!(
        "\nmoment estimate of p from 20000 statistics: {:.4} (true {p_true})",
        est.p
    );
    Ok(())
}
