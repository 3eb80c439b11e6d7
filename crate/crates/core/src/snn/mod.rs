//! Leaky integrate-and-fire network engine.
//!
//! Every layer is a dense synapse matrix feeding LIF units:
//!
//! ```text
//! U[m] = beta * U[m-1] + W X[m] - S[m-1] * zeta
//! S[m] = 1 if U[m] >= zeta
//! ```
//!
//! The reset is subtractive and lands one step after the spike. The first
//! layer is driven by an input slice, deeper layers by the spikes of the
//! layer below in the same step. Classification is by output spike count.

mod encode;
mod estimator;
mod toy;
mod train;
mod weights;

pub use encode::{encode_analog, encode_analog_with, encode_digital, sigmoid, AnalogInput};
pub use estimator::LearnedEstimator;
pub use toy::{bundled_test, bundled_train, generate_toy, Sample, ToyDataset, TOY_CLASSES};
pub use train::{
    evaluate, surrogate_grad, train_toy, Optimizer, TrainConfig, TrainOutcome, TrainReport,
};
pub use weights::{decode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{domain, substream};

/// Dense synapses, row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
}

impl DenseLayer {
    pub fn new(outputs: usize, inputs: usize, weights: Vec<f64>) -> Result<Self> {
        if outputs == 0 || inputs == 0 {
            return Err(Error::Structure(format!("empty layer {outputs}x{inputs}")));
        }
        if weights.len() != outputs * inputs {
            return Err(Error::Structure(format!(
                "layer {outputs}x{inputs} needs {} weights, got {}",
                outputs * inputs,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("non-finite weight".into()));
        }
        Ok(DenseLayer {
            inputs,
            outputs,
            weights,
        })
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; outputs * inputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.outputs)
            .map(|o| self.row(o).iter().map(|w| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Synaptic current `W x`, skipping silent inputs.
    pub fn drive(&self, x: &[f64]) -> Vec<f64> {
        let active: Vec<(usize, f64)> = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        (0..self.outputs)
            .map(|o| {
                let row = self.row(o);
                active.iter().map(|&(i, v)| row[i] * v).sum()
            })
            .collect()
    }
}

/// Stack of LIF layers sharing one decay and one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnNetwork {
    layers: Vec<DenseLayer>,
    beta: f64,
    threshold: f64,
}

impl SnnNetwork {
    pub fn new(layers: Vec<DenseLayer>, beta: f64, threshold: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structure("network has no layers".into()));
        }
        for (d, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Structure(format!(
                    "layer {d} emits {} spikes but layer {} takes {} inputs",
                    pair[0].outputs,
                    d + 1,
                    pair[1].inputs
                )));
            }
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!(
                "decay {beta} must lie strictly inside (0, 1)"
            )));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::Config(format!(
                "threshold {threshold} must be positive"
            )));
        }
        Ok(SnnNetwork {
            layers,
            beta,
            threshold,
        })
    }

    /// Uniform `+-scale/sqrt(fan_in)` initialisation; `sizes` lists the
    /// input width followed by every layer width.
    pub fn random(
        sizes: &[usize],
        beta: f64,
        threshold: f64,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Structure(
                "need an input width and at least one layer".into(),
            ));
        }
        let mut rng = substream(seed, &[domain::SNN_INIT]);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let a = scale / (n_in.max(1) as f64).sqrt();
            let w = (0..n_in * n_out)
                .map(|_| rng.random_range(-a..=a))
                .collect();
            layers.push(DenseLayer::new(n_out, n_in, w)?);
        }
        SnnNetwork::new(layers, beta, threshold)
    }

    /// flatten -> 64 LIF -> `classes` LIF.
    pub fn toy(inputs: usize, classes: usize, seed: u64) -> Result<Self> {
        SnnNetwork::random(&[inputs, 64, classes], 0.9, 1.0, 1.0, seed)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Swap two output neurons (rows of the last layer).
    pub fn swap_outputs(&mut self, a: usize, b: usize) {
        let last = self.layers.len() - 1;
        let layer = &mut self.layers[last];
        let n = layer.inputs;
        for i in 0..n {
            layer.weights.swap(a * n + i, b * n + i);
        }
    }
}

/// Membranes and last spikes of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnState {
    pub membrane: Vec<Vec<f64>>,
    pub spikes: Vec<Vec<u8>>,
    pub step: usize,
}

impl SnnState {
    pub fn new(net: &SnnNetwork) -> Self {
        SnnState {
            membrane: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            spikes: net.layers.iter().map(|l| vec![0; l.outputs]).collect(),
            step: 0,
        }
    }

    /// Run all layers for one time step and return the output spikes.
    pub fn advance(&mut self, net: &SnnNetwork, x: &[f64]) -> Result<&[u8]> {
        lif_step(self, net, x, 0)?;
        for d in 1..net.depth() {
            let below: Vec<f64> = self.spikes[d - 1].iter().map(|&s| s as f64).collect();
            lif_step(self, net, &below, d)?;
        }
        self.step += 1;
        Ok(&self.spikes[net.depth() - 1])
    }
}

/// One membrane update of layer `d` with synaptic input `x`.
pub fn lif_step<'a>(
    state: &'a mut SnnState,
    net: &SnnNetwork,
    x: &[f64],
    d: usize,
) -> Result<&'a [u8]> {
    let layer = net
        .layers
        .get(d)
        .ok_or_else(|| Error::Structure(format!("no layer {d}")))?;
    if x.len() != layer.inputs {
        return Err(Error::Structure(format!(
            "layer {d} takes {} inputs, got {}",
            layer.inputs,
            x.len()
        )));
    }
    if state.membrane.len() != net.depth() || state.membrane[d].len() != layer.outputs {
        return Err(Error::Structure("state does not match the network".into()));
    }
    let current = layer.drive(x);
    let u = &mut state.membrane[d];
    let s = &mut state.spikes[d];
    for o in 0..layer.outputs {
        u[o] = net.beta * u[o] + current[o] - s[o] as f64 * net.threshold;
        s[o] = (u[o] >= net.threshold) as u8;
    }
    Ok(&state.spikes[d])
}

/// How input slices map to time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Presentation {
    /// Slice `j` drives `T` consecutive steps.
    #[default]
    Block,
    /// Slices cycle every step.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub steps_per_slice: usize,
    pub presentation: Presentation,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            steps_per_slice: 2,
            presentation: Presentation::Block,
        }
    }
}

impl Schedule {
    pub fn total_steps(&self, slices: usize) -> usize {
        self.steps_per_slice * slices
    }

    pub fn slice_at(&self, m: usize, slices: usize) -> usize {
        match self.presentation {
            Presentation::Block => m / self.steps_per_slice,
            Presentation::Interleaved => m % slices,
        }
    }
}

/// Input drive split into slices along the repetition axis.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    dim: usize,
    slices: Vec<Vec<f64>>,
}

impl NetInput {
    pub fn new(slices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = slices
            .first()
            .map(|s| s.len())
            .ok_or_else(|| Error::Structure("input has no slices".into()))?;
        if slices.iter().any(|s| s.len() != dim) {
            return Err(Error::Structure("input slices differ in length".into()));
        }
        Ok(NetInput { dim, slices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slices(&self) -> usize {
        self.slices.len()
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        &self.slices[j]
    }
}

/// Output spike counts over one presentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassScores {
    pub counts: Vec<u32>,
    pub steps: usize,
}

impl ClassScores {
    /// Argmax, lowest index wins ties.
    pub fn label(&self) -> usize {
        let mut best = 0;
        for (c, &n) in self.counts.iter().enumerate() {
            if n > self.counts[best] {
                best = c;
            }
        }
        best
    }
}

/// Present `input` and count output spikes.
pub fn forward(net: &SnnNetwork, input: &NetInput, schedule: &Schedule) -> Result<ClassScores> {
    if input.dim != net.inputs() {
        return Err(Error::Structure(format!(
            "network takes {} inputs, got {}",
            net.inputs(),
            input.dim
        )));
    }
    if schedule.steps_per_slice == 0 {
        return Err(Error::Config("steps per slice must be positive".into()));
    }
    let steps = schedule.total_steps(input.slices());
    let mut state = SnnState::new(net);
    let mut counts = vec![0u32; net.classes()];
    for m in 0..steps {
        let x = input.slice(schedule.slice_at(m, input.slices()));
        for (c, &s) in state.advance(net, x)?.iter().enumerate() {
            counts[c] += s as u32;
        }
    }
    Ok(ClassScores { counts, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn single(weights: Vec<f64>, outputs: usize, inputs: usize, beta: f64) -> SnnNetwork {
        SnnNetwork::new(
            vec![DenseLayer::new(outputs, inputs, weights).unwrap()],
            beta,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn hand_trajectory() {
        let net = single(vec![0.6], 1, 1, 0.5);
        let mut st = SnnState::new(&net);
        let mut trace = Vec::new();
        for _ in 0..4 {
            let s = lif_step(&mut st, &net, &[1.0], 0).unwrap()[0];
            trace.push((st.membrane[0][0], s));
        }
        let want = [(0.6, 0), (0.9, 0), (1.05, 1), (0.125, 0)];
        for (got, want) in trace.iter().zip(want) {
            assert!((got.0 - want.0).abs() < 1e-12, "{trace:?}");
            assert_eq!(got.1, want.1);
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let net = SnnNetwork::toy(8, 3, 1).unwrap();
        let mut st = SnnState::new(&net);
        for _ in 0..20 {
            st.advance(&net, &[0.0; 8]).unwrap();
        }
        assert_eq!(
            st,
            SnnState {
                step: 20,
                ..SnnState::new(&net)
            }
        );
    }

    #[test]
    fn subthreshold_drive_converges() {
        let (a, beta) = (0.05, 0.9);
        let net = single(vec![a], 1, 1, beta);
        let mut st = SnnState::new(&net);
        for _ in 0..400 {
            assert_eq!(lif_step(&mut st, &net, &[1.0], 0).unwrap()[0], 0);
        }
        assert!((st.membrane[0][0] - a / (1.0 - beta)).abs() < 1e-12);
    }

    #[test]
    fn recurrence_matches_reference_loop() {
        // Independent scalar loop, three seeded instances.
        for seed in 0..3u64 {
            let net = SnnNetwork::random(&[5, 4, 3], 0.8, 1.0, 3.0, seed).unwrap();
            let mut rng = substream(seed, &[99]);
            let xs: Vec<Vec<f64>> = (0..30)
                .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut st = SnnState::new(&net);
            let mut u = [vec![0.0; 4], vec![0.0; 3]];
            let mut s = [vec![0.0; 4], vec![0.0; 3]];
            for x in &xs {
                st.advance(&net, x).unwrap();
                let mut input = x.clone();
                for d in 0..2 {
                    let l = &net.layers()[d];
                    for o in 0..l.outputs() {
                        let mut acc = 0.0;
                        for i in 0..l.inputs() {
                            acc += l.row(o)[i] * input[i];
                        }
                        u[d][o] = 0.8 * u[d][o] + acc - s[d][o];
                        s[d][o] = if u[d][o] >= 1.0 { 1.0 } else { 0.0 };
                    }
                    input = s[d].clone();
                    for o in 0..l.outputs() {
                        assert!((st.membrane[d][o] - u[d][o]).abs() < 1e-12);
                        assert_eq!(st.spikes[d][o] as f64, s[d][o]);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_input_gives_label_zero() {
        let net = SnnNetwork::toy(6, 4, 3).unwrap();
        let input = NetInput::new(vec![vec![0.0; 6]; 3]).unwrap();
        let sc = forward(&net, &input, &Schedule::default()).unwrap();
        assert_eq!(sc.counts, vec![0; 4]);
        assert_eq!(sc.label(), 0);
        assert_eq!(sc.steps, 6);
    }

    #[test]
    fn saturating_drive_fires_every_step() {
        // With drive 2 and reset 1 the membrane climbs, so it spikes each step.
        let net = single(vec![2.0, 0.0], 2, 1, 0.5);
        let input = NetInput::new(vec![vec![1.0]; 3]).unwrap();
        let sched = Schedule {
            steps_per_slice: 4,
            presentation: Presentation::Block,
        };
        let sc = forward(&net, &input, &sched).unwrap();
        assert_eq!(sc.counts, vec![12, 0]);
    }

    #[test]
    fn swapping_outputs_swaps_counts() {
        let mut net = SnnNetwork::random(&[10, 16, 3], 0.9, 1.0, 2.0, 5).unwrap();
        let input =
            NetInput::new(vec![(0..10).map(|i| (i % 3) as f64 * 0.7).collect(); 2]).unwrap();
        let sched = Schedule::default();
        let a = forward(&net, &input, &sched).unwrap();
        net.swap_outputs(0, 2);
        let b = forward(&net, &input, &sched).unwrap();
        assert_eq!(a.counts, vec![b.counts[2], b.counts[1], b.counts[0]]);
    }

    #[test]
    fn interleaved_visits_slices_cyclically() {
        let s = Schedule {
            steps_per_slice: 2,
            presentation: Presentation::Interleaved,
        };
        let order: Vec<usize> = (0..6).map(|m| s.slice_at(m, 3)).collect();
        assert_eq!(order, vec![0, 1, 2, 0, 1, 2]);
        let b = Schedule {
            presentation: Presentation::Block,
            ..s
        };
        let order: Vec<usize> = (0..6).map(|m| b.slice_at(m, 3)).collect();
        assert_eq!(order, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn shape_mismatch_is_structural() {
        let net = SnnNetwork::toy(6, 2, 0).unwrap();
        let input = NetInput::new(vec![vec![0.0; 5]]).unwrap();
        assert!(matches!(
            forward(&net, &input, &Schedule::default()),
            Err(Error::Structure(_))
        ));
        let bad = vec![DenseLayer::zeros(3, 4), DenseLayer::zeros(2, 5)];
        assert!(SnnNetwork::new(bad, 0.5, 1.0).is_err());
        assert!(SnnNetwork::new(vec![DenseLayer::zeros(1, 1)], 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn membrane_stays_bounded(seed in 0u64..1000, beta in 0.05f64..0.95, x_max in 0.1f64..3.0) {
            let net = SnnNetwork::random(&[7, 5, 3], beta, 1.0, 2.5, seed).unwrap();
            let mut rng = substream(seed, &[1234]);
            let mut st = SnnState::new(&net);
            let bounds: Vec<f64> = net
                .layers()
                .iter()
                .enumerate()
                .map(|(d, l)| {
                    let xm = if d == 0 { x_max } else { 1.0 };
                    (xm * l.inf_norm() + net.threshold()) / (1.0 - beta)
                })
                .collect();
            for _ in 0..60 {
                let x: Vec<f64> = (0..7).map(|_| rng.random_range(-x_max..=x_max)).collect();
                st.advance(&net, &x).unwrap();
                for d in 0..net.depth() {
                    for &u in &st.membrane[d] {
                        prop_assert!(u.abs() <= bounds[d] + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn forward_is_deterministic(seed in 0u64..1000) {
            let net = SnnNetwork::random(&[12, 8, 4], 0.85, 1.0, 2.0, seed).unwrap();
            let mut rng = substream(seed, &[77]);
            let slices = (0..3).map(|_| (0..12).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
            let input = NetInput::new(slices).unwrap();
            let s = Schedule::default();
            prop_assert_eq!(forward(&net, &input, &s).unwrap(), forward(&net, &input, &s).unwrap());
        }
    }
}
