//! Train the toy classifier on the bundled event frames and save its weights.
//!
//! cargo run --release --example snn_toy -- [weights-out] [slices]

use std::time::Instant;

use impulse_rake::snn::{
    bundled_test, bundled_train, encode_digital, save_weights, train_toy, NetInput, SnnNetwork,
    TrainConfig,
};

fn main() -> impulse_rake::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next();
    let slices: usize = args.next().map(|s| s.parse().expect("slices")).unwrap_or(3);

    let train = bundled_train();
    let test = bundled_test();
    let inputs = |d: &impulse_rake::snn::ToyDataset| -> Vec<(NetInput, usize)> {
        d.samples
            .iter()
            .map(|s| (encode_digital(&s.frame, slices), s.label))
            .collect()
    };
    let (tr, te) = (inputs(&train), inputs(&test));

    let net = SnnNetwork::toy(train.height * train.width * 2, train.classes, 1)?;
    let cfg = TrainConfig::default();
    let t0 = Instant::now();
    let out_net = train_toy(&net, &tr, &cfg)?;
    for (e, (l, a)) in out_net
        .report
        .losses
        .iter()
        .zip(&out_net.report.accuracies)
        .enumerate()
    {
        println!("epoch {e:2}  loss {l:.4}  train acc {a:.3}");
    }
    let (loss, acc) = impulse_rake::snn::evaluate(&out_net.network, &te, &cfg)?;
    println!(
        "test loss {loss:.4}  test acc {acc:.3}  ({:.1?})",
        t0.elapsed()
    );
    if let Some(path) = out {
        std::fs::write(&path, save_weights(&out_net.network))?;
        println!("weights written to {path}");
    }
    Ok(())
}
