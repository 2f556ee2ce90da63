//! Minimal reverse-mode automatic differentiation with surrogate-gradient
//! spike nodes, straight-through Bernoulli sampling, Adam, and checkpoints.

mod adam;
pub mod checkpoint;
mod params;
mod surrogate;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use params::{Param, ParamId, ParamStore};
pub use surrogate::{SurrogateKind, SurrogateSpec};
pub use tape::{BatchStats, Gradients, SpikeMode, Tape, Var, BN_EPS};
pub use tensor::Tensor;
