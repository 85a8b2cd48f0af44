//! Dense reverse-mode differentiation, GIN networks with optional random
//! node values, and their training loop.

mod gradcheck;
mod model;
mod tape;
mod tensor;
mod train;

pub use gradcheck::{grad_check, grad_check_matrix, grad_check_with, GradCheckCase, GradCheckReport};
pub use model::{
    degree_features, gin_forward, random_column, rgin_forward, Aggregation, Arch, Dropout, GinModel, Layer, Linear,
    Norm, Pass, Recorded, CHECKPOINT_VERSION, NORM_MOMENTUM,
};
pub use tape::{sigmoid, Adjacency, Gradients, Tape, Var, NORM_EPS};
pub use tensor::Matrix;
pub use train::{predict, target_matrix, task_arch, train, train_with_progress, Optimizer, TrainConfig, TrainOutcome};
