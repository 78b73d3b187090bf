//! Risk-averse Bellman operators over model mixtures.
//!
//! At every (s,a) the standard Bellman target is a random variable with
//! respect to the transition row drawn from the mixture mu_{s,a}; the
//! risk-averse operator applies a coherent distortion risk measure to that
//! variable (reward side through rho+, cost side through rho). The exact
//! path evaluates finite mixtures by the Choquet sum; the sampled path uses
//! the weighted-estimator form used during learning. A dual-representation
//! oracle over the capacity core realizes the equivalent distributionally
//! robust operator so the two routes can be checked against each other.

use crate::cmdp::{standard_bellman, CmdpError, ModelMixture, Policy, QTable, TabularCmdp, ValueKind};
use crate::risk::{
    capacity_core_oracle, exact_risk, sample_weights, weighted_estimate, DiscreteRv,
    DistortionSpec, RiskError,
};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RamuError {
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Cmdp(#[from] CmdpError),
    #[error("sample count mismatch: expected {expected}, element carries {got}")]
    SampleCountMismatch { expected: usize, got: usize },
}

/// Builds the finite-support random variable of standard Bellman targets at
/// (s,a) under the mixture.
fn target_rv(
    q: &QTable,
    cmdp: &TabularCmdp,
    pi: &Policy,
    mix: &ModelMixture,
    s: usize,
    a: usize,
) -> Result<DiscreteRv, RamuError> {
    let atoms = mix
        .at(s, a)
        .iter()
        .map(|(row, prob)| Ok((standard_bellman(q, cmdp, pi, s, a, row)?, *prob)))
        .collect::<Result<Vec<_>, CmdpError>>()?;
    Ok(DiscreteRv::new(atoms)?)
}

/// Exact risk-averse Bellman backup at (s,a): the distortion risk measure of
/// the standard Bellman targets over the mixture, on the side matching the
/// table's kind.
pub fn ramu_bellman_exact(
    q: &QTable,
    cmdp: &TabularCmdp,
    pi: &Policy,
    mix: &ModelMixture,
    spec: DistortionSpec,
    s: usize,
    a: usize,
) -> Result<f64, RamuError> {
    let rv = target_rv(q, cmdp, pi, mix, s, a)?;
    Ok(exact_risk(&rv, spec, q.kind.risk_side())?)
}

/// One full sweep of the risk-averse operator.
pub fn apply_ramu_operator(
    q: &QTable,
    cmdp: &TabularCmdp,
    pi: &Policy,
    mix: &ModelMixture,
    spec: DistortionSpec,
) -> Result<QTable, RamuError> {
    let mut next = QTable::zeros(cmdp.num_states, cmdp.num_actions, q.kind);
    for s in 0..cmdp.num_states {
        for a in 0..cmdp.num_actions {
            next.values[s][a] = ramu_bellman_exact(q, cmdp, pi, mix, spec, s, a)?;
        }
    }
    Ok(next)
}

/// Fixed-point iteration of the risk-averse operator from Q = 0, using the
/// same a-posteriori stopping rule as standard policy evaluation. The
/// operator is a gamma-contraction, so this converges.
pub fn ramu_policy_evaluation(
    cmdp: &TabularCmdp,
    pi: &Policy,
    mix: &ModelMixture,
    spec: DistortionSpec,
    kind: ValueKind,
    tol: f64,
) -> Result<QTable, RamuError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let threshold = crate::cmdp::stopping_threshold(cmdp.gamma, tol);
    let mut q = QTable::zeros(cmdp.num_states, cmdp.num_actions, kind);
    loop {
        let next = apply_ramu_operator(&q, cmdp, pi, mix, spec)?;
        let delta = q.sup_distance(&next);
        q = next;
        if delta <= threshold {
            return Ok(q);
        }
    }
}

/// Distributionally robust backup at (s,a) via the capacity-core dual:
/// the sup (cost) or inf (reward) over core-feasible reweightings of the
/// mixture of the expected standard Bellman target. Equals
/// [`ramu_bellman_exact`]; kept as an independent verification route.
pub fn dr_bellman_oracle(
    q: &QTable,
    cmdp: &TabularCmdp,
    pi: &Policy,
    mix: &ModelMixture,
    spec: DistortionSpec,
    s: usize,
    a: usize,
) -> Result<f64, RamuError> {
    let rv = target_rv(q, cmdp, pi, mix, s, a)?;
    Ok(capacity_core_oracle(&rv, spec, q.kind.risk_side())?)
}

/// One batch element for the sample-based target path: an observed (s,a)
/// with n next-state samples, one per model drawn from the mixture.
#[derive(Debug, Clone)]
pub struct SampledTransition {
    pub state: usize,
    pub action: usize,
    pub next_states: Vec<usize>,
}

/// Sample-based risk-weighted target from per-model one-sample standard
/// targets: sorts them (ascending for reward, descending for cost) and dots
/// with the estimator weights.
pub fn risk_weighted_target(
    base: f64,
    gamma: f64,
    next_values: &[f64],
    spec: DistortionSpec,
    kind: ValueKind,
) -> Result<f64, RiskError> {
    let targets: Vec<f64> = next_values.iter().map(|v| base + gamma * v).collect();
    weighted_estimate(&targets, spec, kind.risk_side())
}

/// Sample-based targets for a batch of tabular transitions, one target per
/// batch element. Every element must carry exactly `n` next-state samples.
pub fn sampled_targets(
    batch: &[SampledTransition],
    q: &QTable,
    cmdp: &TabularCmdp,
    pi: &Policy,
    spec: DistortionSpec,
    n: usize,
) -> Result<Vec<f64>, RamuError> {
    // Validate the weight construction once up front.
    sample_weights(n, spec)?;
    batch
        .iter()
        .map(|element| {
            if element.next_states.len() != n {
                return Err(RamuError::SampleCountMismatch {
                    expected: n,
                    got: element.next_states.len(),
                });
            }
            let next_values: Vec<f64> = element
                .next_states
                .iter()
                .map(|&next| q.state_value(pi, next))
                .collect();
            let base = cmdp.stage_value(q.kind, element.state, element.action);
            Ok(risk_weighted_target(base, cmdp.gamma, &next_values, spec, q.kind)?)
        })
        .collect()
}

/// Draws n transition models from the mixture at (s,a) and one next state
/// from each.
pub fn sample_mixture_next_states(
    mix: &ModelMixture,
    s: usize,
    a: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let row = sample_categorical(mix.at(s, a).iter().map(|(_, p)| *p), rng);
            let model = &mix.at(s, a)[row].0;
            sample_categorical(model.iter().copied(), rng)
        })
        .collect()
}

pub fn sample_categorical(
    probs: impl IntoIterator<Item = f64>,
    rng: &mut (impl Rng + ?Sized),
) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        cumulative += p;
        last = i;
        if u <= cumulative {
            return i;
        }
    }
    last
}

/// Empirical contraction ratio ||T Q1 - T Q2||_inf / ||Q1 - Q2||_inf of an
/// operator sweep; 0 when Q1 = Q2. Must not exceed gamma for the standard
/// and risk-averse operators.
pub fn contraction_probe(
    operator: impl Fn(&QTable) -> QTable,
    q1: &QTable,
    q2: &QTable,
) -> f64 {
    let denominator = q1.sup_distance(q2);
    if denominator == 0.0 {
        return 0.0;
    }
    operator(q1).sup_distance(&operator(q2)) / denominator
}
