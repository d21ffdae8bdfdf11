//! Model parameters and the forward pass.

mod forward;
mod params;

pub use forward::{
    attention_fuse, attention_fuse_masked, channel_forward, classify, common_forward, full_forward,
    gcn_layer, softmax_in_place, AttentionTrace, Channel, ChannelSet, ChannelTrace, DropoutMask,
    ForwardOptions, ForwardState, GcnLayerOutput, Mode, ModelInputs,
};
pub use params::{
    AttentionParams, AttentionProjection, ClassifierParams, GcnChannelParams, Gradients, ModelDims,
    ModelParams, TensorKind,
};
