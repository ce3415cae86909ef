//! Differentiable layer primitives, written out by hand.
//!
//! Every forward op has a matching `*_backward` that returns gradients
//! for its inputs and parameters. Layouts:
//! - feature maps: `H × W × C`
//! - convolution kernels: `kh × kw × Cin × Cout`
//! - dense weights: `n × m` with `out = Wᵀx + b`
//! - LSTM: `W: n × 4m`, `U: m × 4m`, `b: 4m`, gate blocks ordered (i, f, g, o)

mod adam;
mod conv;
mod dense;
mod dropout;
pub mod init;
mod loss;
mod lstm;
mod pool;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use conv::{conv2d_valid, conv2d_valid_backward, Conv2dGrads};
pub use dense::{dense, dense_backward, relu, relu_backward, Activation, DenseGrads};
pub use dropout::{dropout, Dropout};
pub use loss::{bce_loss, softmax, LOSS_CLAMP};
pub use lstm::{
    bilstm_forward, lstm_cell_step, lstm_sequence_backward, lstm_sequence_forward, LstmParams,
    LstmStepCache, LstmTrace,
};
pub use pool::{maxpool2x2, maxpool2x2_backward, Pooled};
pub use tensor::Tensor;
