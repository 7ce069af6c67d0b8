//! SELDnet: convolutional recurrent network with hand-written gradients.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod layers;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod train;

pub use adam::{adam_step, AdamParams, AdamState};
pub use config::{GruMerge, SeldnetConfig};
pub use loss::seld_loss;
pub use model::{threshold_predictions, Batch, OutputGrad, Prediction, SeldModel};
pub use train::{evaluate_model, history_csv, predict_recordings, EpochRecord, Outcome, Recording, TrainOptions, TrainState, Trainer};
