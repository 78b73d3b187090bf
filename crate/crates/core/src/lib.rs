//! Risk-averse model uncertainty (RAMU) for safe reinforcement learning.
//!
//! The library is organized around a single idea: instead of trusting one
//! transition model, keep a distribution over models and apply a coherent
//! distortion risk measure over that distribution at every Bellman backup.
//! Exact tabular solvers, sample-based estimators, and brute-force oracles
//! all share the same risk primitives so they can be checked against each
//! other.
//!
//! - [`risk`]: distortion functions, exact Choquet evaluation on
//!   finite-support random variables, sample weights, and a capacity-core
//!   dual oracle.
//! - [`cmdp`]: tabular constrained MDPs, policies, and standard
//!   (single-model) policy evaluation.
//! - [`ramu`]: risk-averse Bellman operators over model mixtures, fixed-point
//!   solvers, the distributionally robust oracle, and contraction probes.
//! - [`perturb`]: generative transition-model distributions via latent
//!   perturbations of observed transitions.
//! - [`envs`]: desk-scale environments with a perturbable dynamics parameter
//!   plus rollout machinery.
//! - [`learn`]: replay-buffer training with risk-weighted TD targets and
//!   constraint-rectified (CRPO-style) policy updates, plus an exact solver.
//! - [`experiment`]: config-driven train/sweep/aggregate experiment protocol.

pub mod cmdp;
pub mod envs;
pub mod experiment;
pub mod learn;
pub mod perturb;
pub mod ramu;
pub mod risk;

pub use cmdp::{ModelMixture, Policy, QTable, TabularCmdp, ValueKind};
pub use risk::{DiscreteRv, DistortionSpec, RiskSide};
