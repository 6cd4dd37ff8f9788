//! Isotropic network primitives, SVD layer diagonalisation and
//! function-preserving neuron growth and pruning.

pub mod data;
pub mod dyntopo;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod network;
pub mod optim;
pub mod primitives;
pub mod reparam;
pub mod rng;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, SvdTriple, Vector};
pub use network::{Activation, AffineLayer, DiagonalLayer, Layer, Network, Trace};
pub use primitives::{IsoBlock, RadialNormalizer, RadialProfile};
pub use dyntopo::{AdaptationPlan, GrowthPolicy, Schedule, SurgeryKind, SurgeryRecord};
pub use optim::{AdamState, Optimizer, Sgd};
pub use reparam::{DiagonalizedPair, SparsityReport};
