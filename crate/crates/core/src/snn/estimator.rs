use super::{forward, sigmoid, NetInput, Schedule, SnnNetwork};
use crate::detect::{clamp_prior, SparsityEstimate, SparsityEstimator, SparsityMethod};
use crate::error::{Error, Result};
use crate::rake::FrameStatistics;

/// Activation-rate estimator backed by a spiking network.
///
/// The network sees one user's soft values `sigmoid((Y - mu/2)/sigma)`, one
/// slice per frame repetition, and the estimate is the firing rate of its
/// single output neuron.
#[derive(Debug, Clone)]
pub struct LearnedEstimator {
    pub network: SnnNetwork,
    pub schedule: Schedule,
}

impl LearnedEstimator {
    pub fn new(network: SnnNetwork, schedule: Schedule) -> Result<Self> {
        if network.classes() != 1 {
            return Err(Error::Structure(format!(
                "rate estimator needs one output neuron, network has {}",
                network.classes()
            )));
        }
        Ok(LearnedEstimator { network, schedule })
    }
}

impl SparsityEstimator for LearnedEstimator {
    fn estimate(&self, stats: &FrameStatistics, user: usize) -> Result<SparsityEstimate> {
        if stats.bits != self.network.inputs() {
            return Err(Error::Structure(format!(
                "estimator takes {} bits per user, stream has {}",
                self.network.inputs(),
                stats.bits
            )));
        }
        let m = stats.moments[user];
        let slices = (0..stats.frames)
            .map(|j| {
                (0..stats.bits)
                    .map(|n| sigmoid((stats.get(user, n, j) - m.mu / 2.0) / m.sigma))
                    .collect()
            })
            .collect();
        let scores = forward(&self.network, &NetInput::new(slices)?, &self.schedule)?;
        Ok(SparsityEstimate {
            p: clamp_prior(scores.counts[0] as f64 / scores.steps as f64),
            method: SparsityMethod::Learned,
            samples: stats.bits,
        })
    }
}
