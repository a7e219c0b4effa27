//! Semi-supervised classification by surrogate learning.
//!
//! When the features of a two-class problem split into blocks `x1` and `x2`
//! that are independent given the class, the posterior `P(y|x1, x2)` can be
//! rebuilt from two much cheaper pieces: a predictor of `x1` from `x2`,
//! trainable on unlabeled data alone, and the class-conditional distribution
//! of `x1`, a pair of scalars when `x1` is binary. The crate implements that
//! reconstruction, its 100%-recall special case, an exact discrete oracle to
//! verify both, base learners for the `x1`-from-`x2` task, seeded synthetic
//! generators, and a record-linkage pipeline that uses graduation-year
//! equality as the surrogate feature.

pub mod datagen;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod linkage;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod predictor;
pub mod text;

pub use eval::{compute_pr, threshold_sweep, EvalReport};
pub use model::{SurrogateMode, SurrogateModel};
pub use oracle::{CIJointSpec, DiscreteJoint};
pub use posterior::{
    posterior_general, score_missing_x1, score_special, select_threshold, ClassConditionalX1,
    Probability, Threshold, ThresholdObjective, DEFAULT_CLAMP_EPSILON,
};
pub use predictor::{
    fit_histogram, fit_logistic, FeatureVector, HistogramModel, LogisticModel, TrainConfig,
};
