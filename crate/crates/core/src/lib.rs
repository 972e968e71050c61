//! Metamorphic-testing laboratory for a crowdfunding campaign contract.
//!
//! The contract lives in [`contract`] as a logical-time state machine whose
//! operator points are mutation sites ([`mutation`], [`sites`]). The
//! relations in [`relations`] run source and follow-up scenarios against it;
//! [`harness`] runs them against every mutant and [`report`] serializes the
//! outcome.

pub mod config;
pub mod contract;
pub mod harness;
pub mod mutation;
pub mod relations;
pub mod report;
pub mod sites;
pub mod types;

pub use config::{CampaignParams, TestEnv};
pub use contract::{Campaign, CampaignConfig, Observation, Phase, RevertReason, TxResult};
pub use harness::{run_baseline, run_matrix, KillMatrix, Outcome};
pub use mutation::{contract_mutants, Mutant, Operator};
pub use relations::{run_mr, MrResult, MrVerdict};
pub use types::{Address, Amount, BlockContext, Clock};
