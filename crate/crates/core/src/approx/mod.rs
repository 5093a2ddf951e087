//! Linear function approximation over tile-coded features, with a logistic
//! head for E-values, used on the continuous mountain car task.

mod agent;
mod heads;
mod tiles;

pub use agent::{LinearAgent, LinearEpisode};
pub use heads::{LinearQHead, LogisticEHead};
pub use tiles::{SparseFeatures, TileCoder};
