//! Neural compression of the baked corpus: a self-contained MLP with exact
//! backprop, the Adam trainer, dataset generation from bakes, and the three
//! networks (sample / eval / pdf) bundled as a drop-in BSDF.

mod bsdf_nets;
mod mlp;
mod train;

pub use bsdf_nets::{NeuralBsdf, NeuralScratch};
pub use mlp::{finite_difference_worst_error, Activation, Gradients, Layer, MlpWeights, NetKind, Scratch};
pub use train::{
    encode_input, evaluate, generate_dataset, overfit_one_record, train, BakeRecord, FeatureExtra,
    Loss, TrainConfig, TrainReport, TrainingSet,
};
