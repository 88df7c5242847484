//! Small from-scratch neural engine: 1D convolution, dense layers, ReLU,
//! softmax cross-entropy, reverse-mode gradients and Adam, all in `f64`.

pub mod activation;
pub mod adam;
pub mod layers;
pub mod model;
pub mod tensor;

pub use activation::{argmax, cross_entropy, relu, softmax};
pub use adam::AdamState;
pub use layers::{Conv1dLayer, DenseLayer};
pub use model::{Classifier, CnnArch, CnnModel, DenseStack, Gradients, MlpModel};
pub use tensor::Tensor2;
