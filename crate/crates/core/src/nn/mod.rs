//! Dense feed-forward nets with exact first- and second-order passes.

mod activation;
mod adam;
pub mod gradcheck;
mod net;
mod penalty;

pub use activation::{parse_squashing, Activation, DEFAULT_SLOPE};
pub use adam::{adam_step, AdamState};
pub use net::{
    add_scaled, backward, flatten, forward, init_net, Dense, DenseNet, ForwardCache, NetSpec,
    ParamGrads,
};
pub use penalty::{
    input_grad_norm_and_hvp, input_gradients, penalty_value, PenaltyMode, PenaltyOutput,
    PenaltyVariant,
};
