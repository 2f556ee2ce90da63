//! Neuromorphic split computing over a simulated optical inter-satellite
//! link: event-camera synthesis, a spiking token-mixer encoder with learned
//! time-hopping output, a stochastic free-space optical channel, a spiking
//! vision-transformer decoder, surrogate-gradient training and energy
//! accounting.

pub mod channel;
pub mod energy;
pub mod error;
pub mod events;
pub mod grad;
pub mod harness;
pub mod modem;
pub mod rng;
pub mod snn;

pub use error::{Error, Result};
