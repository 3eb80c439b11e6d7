//! Membrane trajectory of a single LIF neuron under constant drive, and
//! rate-decoded classification with a two-output network.
//!
//! cargo run --example lif_neuron -- [beta] [drive]

use impulse_rake::snn::{forward, lif_step, DenseLayer, NetInput, Schedule, SnnNetwork, SnnState};

fn main() -> impulse_rake::Result<()> {
    let mut args = std::env::args().skip(1);
    let beta: f64 = args.next().map_or(0.5, |s| s.parse().expect("beta"));
    let drive: f64 = args.next().map_or(0.6, |s| s.parse().expect("drive"));

    let net = SnnNetwork::new(vec![DenseLayer::new(1, 1, vec![drive])?], beta, 1.0)?;
    let mut state = SnnState::new(&net);
    println!("beta {beta}, threshold 1, drive {drive}");
    for m in 1..=10 {
        let s = lif_step(&mut state, &net, &[1.0], 0)?[0];
        println!(
            "m = {m:2}  U = {:8.5}  {}",
            state.membrane[0][0],
            if s == 1 { "spike" } else { "" }
        );
    }

    // Output 1 integrates twice as fast as output 0, so it wins the count.
    let layer = DenseLayer::new(2, 2, vec![0.3, 0.0, 0.0, 0.6])?;
    let net = SnnNetwork::new(vec![layer], 0.9, 1.0)?;
    let input = NetInput::new(vec![vec![1.0, 1.0]; 3])?;
    let scores = forward(&net, &input, &Schedule::default())?;
    println!(
        "\ncounts {:?} over {} steps -> label {}",
        scores.counts,
        scores.steps,
        scores.label()
    );
    Ok(())
}
