//! Hand-derived gradients, their finite-difference check, Adam and the
//! full-batch training loop.

mod adam;
pub mod backward;
mod config;
pub mod gradcheck;
mod train;

pub use adam::{adam_step, AdamState};
pub use backward::{
    backward, backward_detailed, channel_backward, loss_breakdown, BackwardOutput, Objective,
};
pub use config::{parse_config_map, scalar_value, DecayScope, TrainConfig, Variant};
pub use gradcheck::{
    check_gradients, finite_difference_check, relu_margin, GradcheckConfig, GradcheckInstance,
    GradcheckReport, TensorCheck, KINK_MARGIN,
};
pub use train::{
    prepare_inputs, train, train_with_inputs, EpochRecord, TrainHistory, TrainOutcome, DROPOUT_STREAM,
    INIT_STREAM,
};
