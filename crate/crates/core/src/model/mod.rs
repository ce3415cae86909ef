//! The CNN-BiLSTM: conv → relu → pool → conv → relu → pool → dense(relu)
//! per image, then a (bi)directional LSTM across images and a two-way
//! softmax per timestep.

mod config;
mod io;
mod network;
mod params;

pub use config::{count_params, LayerShapes, ModelConfig};
pub use io::{load_model, read_model, save_model, write_model, MODEL_VERSION};
pub use network::{
    forward, image_tensor, sequence_gradients, sequence_loss, sequence_posteriors, Posterior,
    SequenceGrads, CLASS_NON_SPEECH, CLASS_SPEECH,
};
pub use params::{build_model, ModelGrads, ModelParams};
