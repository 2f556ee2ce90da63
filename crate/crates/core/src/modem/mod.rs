//! Symbol-level coding between spike tensors and on-off optical streams.

mod lth;
mod ppm;
mod serial;

pub use lth::{lth_encode, lth_relaxed, LthParams};
pub use ppm::{ppm_demodulate, ppm_modulate, PpmConfig};
pub use serial::{deserialize, deserialize_bits, serialize, SpikeSeq};
