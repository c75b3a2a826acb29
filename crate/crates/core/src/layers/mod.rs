//! Layer types of the crater network with hand-derived backward passes.

mod conv;
mod dense;
mod softmax;

pub use conv::ConvLayer;
pub use dense::{Activation, DenseLayer};
pub use softmax::{cross_entropy, softmax, CrossEntropy, PROB_FLOOR};
