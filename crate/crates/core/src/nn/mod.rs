//! Convolutional network with a range-regression head and a two-class
//! detection head, trained jointly by momentum SGD.

mod gradcheck;
mod layers;
mod linalg;
mod model;
mod train;

pub use gradcheck::gradient_check;
pub use layers::{conv_valid, conv_valid_grad, dropout, fc, fc_grad, relu, relu_grad, ConvGrads, ConvShape, DropoutMode, Tensor};
pub use linalg::Real;
pub use model::{joint_loss, Checkpoint, Label, ModelConfig, NetworkModel, Prediction, CNNM_MAGIC, CNNM_VERSION, PARAM_NAMES};
pub use train::{deviation_notes, evaluate, sgd_step, train, train_from, EpochRecord, Sample, TrainConfig, TrainLog};
