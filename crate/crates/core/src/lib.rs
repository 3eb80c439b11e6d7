//! Link-level simulation of multi-user impulse-radio UWB transport for
//! sparse event-camera frames.
//!
//! The pipeline runs frame -> tiles -> per-user bit streams -> TH-OOK
//! pulses with two-timescale repetition -> multipath channel -> selective
//! RAKE with MRC -> either sparsity-adapted MAP detection (digital spike
//! encoding) or sigmoid soft values (analog spike encoding) -> a LIF
//! spiking network with rate decoding.
//!
//! | module      | role |
//! |-------------|------|
//! | [`events`]  | event records, frames, tiling and bit streams |
//! | [`tx`]      | hop codes, monocycle, OOK / PPM modulation |
//! | [`channel`] | cluster/ray multipath realizations, propagation |
//! | [`rake`]    | finger selection, correlation, MRC, link moments |
//! | [`detect`]  | MAP threshold, voting, analytic BER, bias search |
//! | [`snn`]     | LIF engine, spike encoders, toy training |
//! | [`sim`]     | configuration, Monte Carlo sweeps, result files |

pub mod channel;
pub mod detect;
pub mod error;
pub mod events;
pub mod rake;
pub mod rng;
pub mod sim;
pub mod snn;
pub mod tx;

pub use error::{Error, Result};
