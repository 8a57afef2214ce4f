//! Quantum state reconstruction from incomplete POVM data.
//!
//! Four estimators are provided: maximum entropy (Lagrange multipliers fitted
//! by Levenberg-Marquardt) and the variational family VQT, VQT-infinity and
//! the parametrized PVQT(alpha, beta), all compiled to small dense
//! semidefinite programs and solved by the interior-point solver in [`sdp`].
//! [`harness`] runs randomized sweeps over the number of measured effects and
//! aggregates the comparison metrics.

pub mod cxmat;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod measure;
pub mod metrics;
pub mod povm;
pub mod rng;
pub mod sdp;
pub mod states;

pub use cxmat::{CMatrix, HermEig, RMatrix, C64};
pub use error::{Error, Result};
pub use estimators::{Method, PvqtParams, Reconstruction};
pub use harness::{AggregateRow, ExperimentConfig, Metric, TrialResult};
pub use measure::FrequencyVector;
pub use metrics::UnmeasuredVector;
pub use povm::{Povm, SubsetPlan};
pub use rng::RngSeed;
pub use sdp::{SdpOptions, SdpProblem, SdpSolution, SdpStatus};
pub use states::DensityMatrix;
