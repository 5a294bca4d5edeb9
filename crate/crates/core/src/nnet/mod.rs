//! Multi-branch CNN classifier: one convolutional branch per look direction,
//! concatenated into a dense softmax head, trained with Adam.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod model;
pub mod scalar;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use model::{argmax, CnnArch, CnnModel, TensorSpec};
pub use scalar::Scalar;
pub use train::{evaluate, fit, stratified_split, train, Evaluation, Split, TrainConfig, TrainOutcome};

use crate::activity::ActivityClass;
use crate::tensor::Tensor3;

/// One detected event: the crop of every beam over the event interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub images: Vec<Tensor3>,
    pub label: ActivityClass,
}
