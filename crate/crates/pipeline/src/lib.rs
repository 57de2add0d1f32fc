//! Orchestration of a decision run, from scenario text to a selected action.
//!
//! [`Pipeline::run_decisionflow`] executes the four steps in order:
//!
//! 1. extract information and summarize it into an action-attribute table
//!    (info model);
//! 2. weigh every mentioned cell and sparsify the weights;
//! 3. ground the surviving cells to scores in `[0, 1]`;
//! 4. solve the constrained argmax in the kernel and ask for a rationale.
//!
//! Baselines (zero-shot, chain-of-thought, self-consistency, chain-of-thought
//! with the symbolic solver), the single-prompt joint variant and the
//! filtering/scoring ablations share the same gateway and trace format.
//! Dataset and prediction files live in [`dataset`] and [`predictions`].

pub mod config;
pub mod dataset;
pub mod error;
pub mod predictions;
pub mod record;
pub mod runner;
pub mod vote;

pub use config::{FilterTarget, Mode, PipelineConfig};
pub use dataset::{
    Alignment, Dataset, DatasetError, DatasetKind, DellmaRecord, Dma, Domain, Group, MtaRecord,
};
pub use error::{RunError, RunErrorKind};
pub use predictions::{write_predictions, PredictionFile, PredictionRow};
pub use record::{Abstention, RunRecord};
pub use runner::{Ablation, Artifacts, Pipeline};
pub use vote::majority_vote;
