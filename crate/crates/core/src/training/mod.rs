//! Pair construction, the contrastive objective, augmentation and the
//! epoch loop.

mod augment;
pub(crate) mod loss;
mod pairs;
mod trainer;

pub use augment::{augment, rotate_scale, AugParams};
pub use loss::contrastive_loss;
pub use pairs::{make_pairs, PairSample};
pub use trainer::{pair_gradients, train, TrainConfig, TrainHistory, TRAIN_KEYS};
