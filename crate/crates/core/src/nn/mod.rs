//! Numeric substrate: tensors with gradient buffers, tanh MLPs with
//! hand-written reverse-mode passes, the Gaussian policy head and Adam.

mod adam;
pub mod checkpoint;
mod mlp;
mod policy;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use mlp::{Linear, Mlp, Trace};
pub use policy::{GaussianPolicy, DEFAULT_HIDDEN, HALF_LN_2PI, LOG_STD_MAX, LOG_STD_MIN};
pub use tensor::{Parameters, Tensor};
