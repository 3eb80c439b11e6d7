//! Backprop-through-time with an arctangent surrogate gradient.
//!
//! The spike nonlinearity is replaced in the backward pass by
//! `dS/dU = 1 / (1 + (pi k (U - zeta))^2)`. The reset term is treated as a
//! constant (detached), the usual choice for subtractive-reset LIF units.
//! The loss is cross-entropy on `logit_scale * counts`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{forward, NetInput, Schedule, SnnNetwork};
use crate::error::{Error, Result};
use crate::rng::{domain, substream};

/// Surrogate derivative of the spike with respect to the membrane.
pub fn surrogate_grad(u: f64, threshold: f64, slope: f64) -> f64 {
    let a = PI * slope * (u - threshold);
    1.0 / (1.0 + a * a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub schedule: Schedule,
    pub surrogate_slope: f64,
    pub logit_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            lr: 2e-3,
            batch_size: 16,
            optimizer: Optimizer::adam(),
            schedule: Schedule::default(),
            surrogate_slope: 2.0,
            logit_scale: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss of the untrained network.
    pub initial_loss: f64,
    /// Mean loss observed during each epoch.
    pub losses: Vec<f64>,
    /// Training accuracy after each epoch.
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: SnnNetwork,
    pub report: TrainReport,
}

struct Tape {
    membrane: Vec<Vec<Vec<f64>>>,
    spikes: Vec<Vec<Vec<f64>>>,
    counts: Vec<f64>,
}

fn run_recorded(net: &SnnNetwork, input: &NetInput, schedule: &Schedule) -> Tape {
    let steps = schedule.total_steps(input.slices());
    let depth = net.depth();
    let mut membrane = vec![Vec::with_capacity(steps); depth];
    let mut spikes: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(steps); depth];
    let mut counts = vec![0.0; net.classes()];
    let mut u: Vec<Vec<f64>> = net
        .layers()
        .iter()
        .map(|l| vec![0.0; l.outputs()])
        .collect();
    let mut s: Vec<Vec<f64>> = u.clone();
    for m in 0..steps {
        let mut x: &[f64] = input.slice(schedule.slice_at(m, input.slices()));
        for (d, layer) in net.layers().iter().enumerate() {
            let current = layer.drive(x);
            for o in 0..layer.outputs() {
                u[d][o] = net.beta() * u[d][o] + current[o] - s[d][o] * net.threshold();
                s[d][o] = if u[d][o] >= net.threshold() { 1.0 } else { 0.0 };
            }
            membrane[d].push(u[d].clone());
            spikes[d].push(s[d].clone());
            x = &spikes[d][m];
        }
        for (c, &v) in s[depth - 1].iter().enumerate() {
            counts[c] += v;
        }
    }
    Tape {
        membrane,
        spikes,
        counts,
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Loss, gradient of every layer's weights, and whether the argmax was right.
fn sample_gradient(
    net: &SnnNetwork,
    input: &NetInput,
    label: usize,
    cfg: &TrainConfig,
) -> (f64, Vec<Vec<f64>>, bool) {
    let tape = run_recorded(net, input, &cfg.schedule);
    let steps = tape.membrane[0].len();
    let logits: Vec<f64> = tape.counts.iter().map(|c| c * cfg.logit_scale).collect();
    let prob = softmax(&logits);
    let loss = -prob[label].max(1e-300).ln();
    let scores = super::ClassScores {
        counts: tape.counts.iter().map(|&c| c as u32).collect(),
        steps,
    };
    let correct = scores.label() == label;

    let depth = net.depth();
    let mut grads: Vec<Vec<f64>> = net
        .layers()
        .iter()
        .map(|l| vec![0.0; l.weights().len()])
        .collect();
    // Gradient of the loss with respect to each step's spikes of the current layer.
    let g_count: Vec<f64> = (0..net.classes())
        .map(|c| cfg.logit_scale * (prob[c] - if c == label { 1.0 } else { 0.0 }))
        .collect();
    let mut g_spikes: Vec<Vec<f64>> = vec![g_count; steps];
    for d in (0..depth).rev() {
        let layer = &net.layers()[d];
        let (n_in, n_out) = (layer.inputs(), layer.outputs());
        let mut g_below = if d > 0 {
            vec![vec![0.0; n_in]; steps]
        } else {
            Vec::new()
        };
        let mut g_next = vec![0.0; n_out];
        for m in (0..steps).rev() {
            let u = &tape.membrane[d][m];
            let mut g_u = vec![0.0; n_out];
            for o in 0..n_out {
                g_u[o] = g_spikes[m][o]
                    * surrogate_grad(u[o], net.threshold(), cfg.surrogate_slope)
                    + net.beta() * g_next[o];
            }
            let x: &[f64] = if d == 0 {
                input.slice(cfg.schedule.slice_at(m, input.slices()))
            } else {
                &tape.spikes[d - 1][m]
            };
            let active: Vec<(usize, f64)> = x
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect();
            let w = layer.weights();
            let g = &mut grads[d];
            for o in 0..n_out {
                let go = g_u[o];
                if go == 0.0 {
                    continue;
                }
                let row = o * n_in;
                for &(i, v) in &active {
                    g[row + i] += go * v;
                }
                if d > 0 {
                    for i in 0..n_in {
                        g_below[m][i] += w[row + i] * go;
                    }
                }
            }
            g_next = g_u;
        }
        g_spikes = g_below;
    }
    (loss, grads, correct)
}

fn diverged(loss: f64, initial: f64) -> bool {
    !loss.is_finite() || loss > 10.0 * initial
}

/// Mean loss and accuracy of `net` on `data`.
pub fn evaluate(
    net: &SnnNetwork,
    data: &[(NetInput, usize)],
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    let per: Vec<Result<(f64, bool)>> = data
        .par_iter()
        .map(|(x, y)| {
            let sc = forward(net, x, &cfg.schedule)?;
            let logits: Vec<f64> = sc
                .counts
                .iter()
                .map(|&c| c as f64 * cfg.logit_scale)
                .collect();
            Ok((-softmax(&logits)[*y].max(1e-300).ln(), sc.label() == *y))
        })
        .collect();
    let mut loss = 0.0;
    let mut hits = 0usize;
    for r in per {
        let (l, ok) = r?;
        loss += l;
        hits += ok as usize;
    }
    Ok((loss / data.len() as f64, hits as f64 / data.len() as f64))
}

/// Train a copy of `net` on labelled inputs.
pub fn train_toy(
    net: &SnnNetwork,
    data: &[(NetInput, usize)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::Training("empty dataset".into()));
    }
    if let Some((x, _)) = data.iter().find(|(x, _)| x.dim() != net.inputs()) {
        return Err(Error::Structure(format!(
            "network takes {} inputs, sample has {}",
            net.inputs(),
            x.dim()
        )));
    }
    if let Some((_, y)) = data.iter().find(|(_, y)| *y >= net.classes()) {
        return Err(Error::Structure(format!(
            "label {y} >= {} classes",
            net.classes()
        )));
    }
    if cfg.batch_size == 0 || cfg.schedule.steps_per_slice == 0 {
        return Err(Error::Config(
            "batch size and steps per slice must be positive".into(),
        ));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate {} must be non-negative",
            cfg.lr
        )));
    }

    let mut net = net.clone();
    let (initial_loss, _) = evaluate(&net, data, cfg)?;
    let mut first_moment: Vec<Vec<f64>> = net
        .layers()
        .iter()
        .map(|l| vec![0.0; l.weights().len()])
        .collect();
    let mut second_moment = first_moment.clone();
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut accuracies = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut substream(
            cfg.seed,
            &[domain::SNN_SHUFFLE, epoch as u64],
        ));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Vec<Vec<f64>>, bool)> = batch
                .par_iter()
                .map(|&i| sample_gradient(&net, &data[i].0, data[i].1, cfg))
                .collect();
            // Reduce in batch order so thread count never changes the result.
            let mut grads: Vec<Vec<f64>> = net
                .layers()
                .iter()
                .map(|l| vec![0.0; l.weights().len()])
                .collect();
            for (loss, g, _) in &results {
                epoch_loss += loss;
                for (acc, gd) in grads.iter_mut().zip(g) {
                    for (a, v) in acc.iter_mut().zip(gd) {
                        *a += v;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            t += 1;
            for (d, layer) in net.layers_mut().iter_mut().enumerate() {
                let w = layer.weights_mut();
                match cfg.optimizer {
                    Optimizer::Sgd => {
                        for (wi, g) in w.iter_mut().zip(&grads[d]) {
                            *wi -= cfg.lr * g * scale;
                        }
                    }
                    Optimizer::Adam { beta1, beta2, eps } => {
                        let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                        for i in 0..w.len() {
                            let g = grads[d][i] * scale;
                            let m1 = &mut first_moment[d][i];
                            let m2 = &mut second_moment[d][i];
                            *m1 = beta1 * *m1 + (1.0 - beta1) * g;
                            *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
                            w[i] -= cfg.lr * (*m1 / c1) / ((*m2 / c2).sqrt() + eps);
                        }
                    }
                }
            }
        }
        let mean = epoch_loss / data.len() as f64;
        let (_, acc) = evaluate(&net, data, cfg)?;
        losses.push(mean);
        accuracies.push(acc);
        if diverged(mean, initial_loss) {
            return Err(Error::Training(format!(
                "diverged at epoch {epoch}: loss {mean:.4} vs initial {initial_loss:.4} (lr {}, history {:?})",
                cfg.lr, losses
            )));
        }
    }
    Ok(TrainOutcome {
        network: net,
        report: TrainReport {
            initial_loss,
            losses,
            accuracies,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{encode_digital, generate_toy, DenseLayer, SnnState};

    fn toy_data(per_class: usize, seed: u64) -> (Vec<(NetInput, usize)>, usize) {
        let d = generate_toy(seed, per_class, 8, 8);
        let n = 8 * 8 * 2;
        (
            d.samples
                .iter()
                .map(|s| (encode_digital(&s.frame, 2), s.label))
                .collect(),
            n,
        )
    }

    #[test]
    fn surrogate_peaks_at_threshold() {
        assert_eq!(surrogate_grad(1.0, 1.0, 2.0), 1.0);
        for du in [-0.3, -0.01, 0.01, 0.3] {
            assert!(surrogate_grad(1.0 + du, 1.0, 2.0) < 1.0);
        }
        // Closed form: derivative of atan(pi k x)/pi at x = 0.25, k = 2.
        let x: f64 = 0.25;
        let want = 1.0 / (1.0 + (PI * 2.0 * x).powi(2));
        assert!((surrogate_grad(1.25, 1.0, 2.0) - want).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let (data, n) = toy_data(5, 1);
        let net = SnnNetwork::toy(n, 4, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            lr: 0.0,
            ..TrainConfig::default()
        };
        let out = train_toy(&net, &data, &cfg).unwrap();
        assert_eq!(out.network, net);
    }

    #[test]
    fn single_step_gradient_by_hand() {
        // One layer, one step, nothing fires: dL/dW = (p - y) * surrogate(U) * x.
        let layer = DenseLayer::new(2, 3, vec![0.2, -0.1, 0.4, 0.3, 0.5, -0.2]).unwrap();
        let net = SnnNetwork::new(vec![layer], 0.5, 1.0).unwrap();
        let x = NetInput::new(vec![vec![1.0, 0.0, 0.5]]).unwrap();
        let cfg = TrainConfig {
            schedule: Schedule {
                steps_per_slice: 1,
                ..Schedule::default()
            },
            logit_scale: 1.0,
            ..TrainConfig::default()
        };
        let (_, g, _) = sample_gradient(&net, &x, 1, &cfg);
        let mut st = SnnState::new(&net);
        st.advance(&net, x.slice(0)).unwrap();
        let p = softmax(&[0.0, 0.0]);
        for o in 0..2 {
            let dl_ds = p[o] - (o == 1) as u8 as f64;
            let sg = surrogate_grad(st.membrane[0][o], 1.0, 2.0);
            for (i, &xi) in [1.0, 0.0, 0.5].iter().enumerate() {
                assert!((g[0][o * 3 + i] - dl_ds * sg * xi).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn learns_small_toy_set() {
        let (data, n) = toy_data(20, 3);
        let net = SnnNetwork::toy(n, 4, 5).unwrap();
        let cfg = TrainConfig {
            epochs: 15,
            ..TrainConfig::default()
        };
        let out = train_toy(&net, &data, &cfg).unwrap();
        let r = &out.report;
        assert!(*r.accuracies.last().unwrap() >= 0.9, "{r:?}");
        assert!(r.losses.last().unwrap() < &r.initial_loss);
    }

    #[test]
    fn divergence_rule() {
        assert!(!diverged(1.0, 1.0));
        assert!(!diverged(10.0, 1.0));
        assert!(diverged(10.5, 1.0));
        assert!(diverged(f64::NAN, 1.0));
    }
}
