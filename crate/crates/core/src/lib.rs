//! Fault-tolerant control through meta-initialized policy optimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: fixed-topology MLPs over flat parameter vectors, reverse-mode
//!   gradients, exact Hessian-vector products and Adam.
//! - [`env`]: cart-pole and 6-tank fuel-transfer simulators whose faults are
//!   edits to process parameters.
//! - [`ppo`]: experience memory, discounted returns, the clipped surrogate
//!   objective and the PPO training loop.
//! - [`meta`]: expected-return scoring of stored policies, rank selection,
//!   the outer-loop update rules, the memory-driven meta-update, the MAML
//!   baseline and Jensen-Shannon curation of the policy library.
//! - [`store`]: on-disk persistence of policies, libraries and runs.
//! - [`harness`]: the end-to-end experiment protocol driven by the CLI.

pub mod env;
pub mod error;
pub mod harness;
pub mod meta;
pub mod nn;
pub mod ppo;
pub mod seed;
pub mod store;

pub use env::{Action, CartPoleParams, EnvKind, EnvState, FaultSpec, FuelTankParams, ProcessParams, StepResult};
pub use error::{Error, Result};
pub use meta::{ComplementEntry, MetaConfig, MetaVariant, PolicyComplement, ReturnBaseline};
pub use nn::{AdamState, Direction, NetworkSpec, OutputHead, ParameterVector};
pub use ppo::{Memory, PpoConfig, RewardLog};
pub use store::PolicyStore;
