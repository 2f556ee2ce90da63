//! Spiking encoder and decoder networks.

mod config;
mod decoder;
mod encoder;
mod graph;
mod lif;
mod model;
mod weights;

pub use config::{DecoderConfig, EncoderConfig, LifConfig, LifGroups, ModelConfig};
pub use decoder::{
    decoder_forward, embed, pool_classify, ssa_attention, stochastic_attention, svit_layer,
    DecoderState, SvitState,
};
pub use encoder::{encoder_forward, patch_split, patch_tokens, stmixer_block, EncoderState};
pub use graph::{Graph, PassOptions, Recording, Stage, Trace};
pub use lif::{LifNeurons, LifState};
pub use model::{predict, ChannelUse, Forward, Model, ReceiveMode};
pub use weights::{
    BnUpdate, BnWeights, DecoderWeights, MixerWeights, ModelWeights, PatchSplitWeights,
    SvitWeights, BN_MOMENTUM,
};
