//! Dense tensors, a reverse-mode tape, SGD and checkpointing.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub(crate) use checkpoint::Reader;
pub use gradcheck::{finite_difference_gradient, max_relative_error, param_gradient_error, relative_error};
pub use optim::{Adam, Optimizer, OptimizerKind, Sgd};
pub use params::{uniform, Bound, ParamId, ParamSet};
pub use scalar::Scalar;
pub use tape::{sigmoid_scalar, softmax_in_place, Tape, Var, PROB_FLOOR};
pub use tensor::Tensor;
