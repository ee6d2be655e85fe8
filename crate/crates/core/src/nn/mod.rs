//! Dense network substrate: tensors, MLP forward/backward, losses, checkpoints.

mod checkpoint;
mod loss;
mod mlp;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use loss::{cross_entropy, distillation_loss, softmax};
pub use mlp::{DropoutSpec, ForwardCache, Gradients, Mlp};
pub use tensor::Tensor2;

pub(crate) use loss::{cross_entropy_row, distillation_row, softmax_unchecked};
