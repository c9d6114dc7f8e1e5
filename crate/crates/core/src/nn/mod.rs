//! Inference runtime for the hybrid global-local SPP network.

pub mod format;
pub mod golden;
pub mod layers;
pub mod model;
pub mod reference;
mod tensor;

pub use format::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use golden::{golden_fixture, load_golden, random_bundle, write_golden, GoldenFixture};
pub use model::{
    forward_normalized, model_forward, param_count, ModelBundle, ModelDescriptor, ModelVariant, FORMAT_VERSION,
};
pub use tensor::{Activations, Element, Tensor};
