//! Density estimates: the mixture proposal in parameter space and k-NN
//! radii in output space.

mod knn;
mod mixture;

pub use knn::{knn_density, knn_radii, BRUTE_FORCE_LIMIT};
pub use mixture::{MixtureDensity, TruncatedMixture};
