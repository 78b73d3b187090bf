//! Replay-buffer training with risk-weighted TD targets and
//! constraint-rectified policy updates, plus an exact tabular solver.
//!
//! The training loop interleaves data collection into a FIFO replay buffer
//! with K tabular critic updates and one policy update per iteration. Critic
//! targets are the sample-based risk-weighted targets over n perturbed next
//! states; the policy update switches between a reward-improvement step and
//! a cost-reduction step depending on whether the batch estimate of the
//! constraint is within budget.
//!
//! With the expectation risk measure, epsilon = 0, and n = 1, the whole
//! path reduces bit-for-bit to plain safe RL with one-sample TD(0) targets;
//! that reduction is kept as an explicit `Baseline` algorithm.

use crate::cmdp::{initial_value, ModelMixture, Policy, QTable, TabularCmdp, ValueKind};
use crate::envs::{EnvError, Environment};
use crate::perturb::{LatentPerturbation, PerturbError, Transition};
use crate::ramu::{ramu_policy_evaluation, risk_weighted_target, sample_categorical, RamuError};
use crate::risk::{DistortionSpec, RiskError};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
    #[error("empty replay buffer")]
    EmptyBuffer,
    #[error("batch size {requested} exceeds buffer occupancy {available}")]
    BatchTooLarge { requested: usize, available: usize },
    #[error("instance too large for the exact solver: {0} state-action pairs (cap 400)")]
    TooLarge(usize),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Ramu(#[from] RamuError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Training path selector. `Baseline` is plain safe RL with one-sample TD(0)
/// targets; `Ramu` uses risk-weighted targets over perturbed models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainAlgo {
    Baseline,
    Ramu,
}

/// FIFO ring buffer of observed transitions with uniform batch sampling
/// without replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Uniform sample of `k` distinct buffer entries (partial Fisher-Yates).
    pub fn sample(&self, k: usize, rng: &mut impl Rng) -> Result<Vec<Transition>, LearnError> {
        if self.items.is_empty() {
            return Err(LearnError::EmptyBuffer);
        }
        if k > self.items.len() {
            return Err(LearnError::BatchTooLarge {
                requested: k,
                available: self.items.len(),
            });
        }
        let mut indices: Vec<usize> = (0..self.items.len()).collect();
        for i in 0..k {
            let j = rng.gen_range(i..indices.len());
            indices.swap(i, j);
        }
        Ok(indices[..k].iter().map(|&i| self.items[i].clone()).collect())
    }
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub algo: TrainAlgo,
    /// Risk measure applied to reward targets (through rho+).
    pub objective: DistortionSpec,
    /// Risk measure applied to cost targets.
    pub constraint: DistortionSpec,
    /// Number of model samples per target (n).
    #[serde(default = "default_models_per_target")]
    pub models_per_target: usize,
    /// Average perturbation magnitude (epsilon).
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub gamma: f64,
    /// Budget on the discounted constraint estimate used by the policy
    /// update (distinct from the episodic evaluation budget).
    pub train_budget: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_critic_lr")]
    pub critic_lr: f64,
    /// Critic updates per iteration (K).
    #[serde(default = "default_updates_per_iter")]
    pub updates_per_iter: usize,
    /// Total environment steps collected over training.
    pub total_steps: usize,
    /// Environment steps collected per iteration.
    #[serde(default = "default_steps_per_iter")]
    pub steps_per_iter: usize,
    /// Target-critic exponential moving average coefficient (tau).
    #[serde(default = "default_target_tau")]
    pub target_tau: f64,
    /// Interpolation step size of the policy update.
    #[serde(default = "default_policy_step")]
    pub policy_step: f64,
    /// Softmax temperature of the policy update.
    #[serde(default = "default_policy_temperature")]
    pub policy_temperature: f64,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity: usize,
    pub seed: u64,
}

fn default_models_per_target() -> usize {
    5
}
fn default_epsilon() -> f64 {
    0.10
}
fn default_batch_size() -> usize {
    64
}
fn default_critic_lr() -> f64 {
    0.1
}
fn default_updates_per_iter() -> usize {
    8
}
fn default_steps_per_iter() -> usize {
    64
}
fn default_target_tau() -> f64 {
    5e-3
}
fn default_policy_step() -> f64 {
    0.1
}
fn default_policy_temperature() -> f64 {
    0.1
}
fn default_buffer_capacity() -> usize {
    20_000
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        self.objective.validate()?;
        self.constraint.validate()?;
        let positive = [
            ("models_per_target", self.models_per_target as f64),
            ("batch_size", self.batch_size as f64),
            ("updates_per_iter", self.updates_per_iter as f64),
            ("steps_per_iter", self.steps_per_iter as f64),
            ("buffer_capacity", self.buffer_capacity as f64),
            ("policy_temperature", self.policy_temperature),
        ];
        for (name, value) in positive {
            if value.is_nan() || value <= 0.0 {
                return Err(LearnError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(LearnError::InvalidConfig(format!("epsilon {}", self.epsilon)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(LearnError::InvalidConfig(format!("gamma {}", self.gamma)));
        }
        if self.train_budget.is_nan() || self.train_budget < 0.0 {
            return Err(LearnError::InvalidConfig("train_budget negative".into()));
        }
        for (name, value) in [
            ("critic_lr", self.critic_lr),
            ("target_tau", self.target_tau),
            ("policy_step", self.policy_step),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(LearnError::InvalidConfig(format!(
                    "{name} must be in [0,1], got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Tabular value table with a target copy maintained as an exponential
/// moving average of the online table.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub online: QTable,
    pub target: QTable,
}

impl Critic {
    pub fn new(num_cells: usize, num_actions: usize, kind: ValueKind) -> Self {
        Self {
            online: QTable::zeros(num_cells, num_actions, kind),
            target: QTable::zeros(num_cells, num_actions, kind),
        }
    }

    /// target <- tau * online + (1 - tau) * target
    pub fn update_target(&mut self, tau: f64) {
        for (t_row, o_row) in self.target.values.iter_mut().zip(&self.online.values) {
            for (t, o) in t_row.iter_mut().zip(o_row) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critics {
    pub reward: Critic,
    pub cost: Critic,
}

impl Critics {
    pub fn new(num_cells: usize, num_actions: usize) -> Self {
        Self {
            reward: Critic::new(num_cells, num_actions, ValueKind::Reward),
            cost: Critic::new(num_cells, num_actions, ValueKind::Cost),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticLosses {
    pub reward: f64,
    pub cost: f64,
}

/// One squared-error step of both critics on a batch: expands each element
/// into n perturbed next states, forms risk-weighted targets against the
/// target critics, and interpolates the online table entries toward them.
/// Returns the mean squared residuals before the step.
pub fn critic_update(
    batch: &[Transition],
    critics: &mut Critics,
    pi: &Policy,
    cfg: &LearnerConfig,
    env: &dyn Environment,
    rng: &mut dyn RngCore,
) -> Result<CriticLosses, LearnError> {
    if batch.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let perturbation = LatentPerturbation::new(
        cfg.epsilon,
        env.state_dim(),
        Some(env.state_bounds()),
    )?;
    let mut sum_sq = [0.0f64; 2];
    for t in batch {
        let cell = env.state_index(&t.state);
        let (target_r, target_c) = match cfg.algo {
            TrainAlgo::Baseline => {
                let next = env.state_index(&t.next_state);
                (
                    t.reward + cfg.gamma * critics.reward.target.state_value(pi, next),
                    t.cost + cfg.gamma * critics.cost.target.state_value(pi, next),
                )
            }
            TrainAlgo::Ramu => {
                let next_cells: Vec<usize> = perturbation
                    .expand_transition(t, cfg.models_per_target, rng)?
                    .iter()
                    .map(|s| env.state_index(s))
                    .collect();
                let values_r: Vec<f64> = next_cells
                    .iter()
                    .map(|&next| critics.reward.target.state_value(pi, next))
                    .collect();
                let values_c: Vec<f64> = next_cells
                    .iter()
                    .map(|&next| critics.cost.target.state_value(pi, next))
                    .collect();
                (
                    risk_weighted_target(
                        t.reward,
                        cfg.gamma,
                        &values_r,
                        cfg.objective,
                        ValueKind::Reward,
                    )?,
                    risk_weighted_target(
                        t.cost,
                        cfg.gamma,
                        &values_c,
                        cfg.constraint,
                        ValueKind::Cost,
                    )?,
                )
            }
        };
        let residual_r = target_r - critics.reward.online.values[cell][t.action];
        let residual_c = target_c - critics.cost.online.values[cell][t.action];
        critics.reward.online.values[cell][t.action] += cfg.critic_lr * residual_r;
        critics.cost.online.values[cell][t.action] += cfg.critic_lr * residual_c;
        sum_sq[0] += residual_r * residual_r;
        sum_sq[1] += residual_c * residual_c;
    }
    critics.reward.update_target(cfg.target_tau);
    critics.cost.update_target(cfg.target_tau);
    Ok(CriticLosses {
        reward: sum_sq[0] / batch.len() as f64,
        cost: sum_sq[1] / batch.len() as f64,
    })
}

/// Which objective the policy update pursued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Reward,
    Cost,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Reward => "reward",
            Branch::Cost => "cost",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrpoOutcome {
    pub policy: Policy,
    pub branch: Branch,
    /// Batch average of the reward critic under the current policy.
    pub reward_estimate: f64,
    /// Batch average of the cost critic under the current policy; compared
    /// against the training budget to pick the branch.
    pub cost_estimate: f64,
}

/// Constraint-rectified policy update: estimates the constraint from the
/// batch via the cost critic; within budget it interpolates every policy row
/// toward the softmax-greedy improvement of the reward critic, otherwise
/// toward lower cost. Rows are renormalized.
pub fn crpo_update(
    critics: &Critics,
    pi: &Policy,
    cfg: &LearnerConfig,
    batch: &[Transition],
    env: &dyn Environment,
) -> Result<CrpoOutcome, LearnError> {
    if batch.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let mut reward_estimate = 0.0;
    let mut cost_estimate = 0.0;
    for t in batch {
        let cell = env.state_index(&t.state);
        reward_estimate += critics.reward.online.state_value(pi, cell);
        cost_estimate += critics.cost.online.state_value(pi, cell);
    }
    reward_estimate /= batch.len() as f64;
    cost_estimate /= batch.len() as f64;

    let branch = if cost_estimate <= cfg.train_budget {
        Branch::Reward
    } else {
        Branch::Cost
    };
    let q = match branch {
        Branch::Reward => &critics.reward.online,
        Branch::Cost => &critics.cost.online,
    };
    let sign = match branch {
        Branch::Reward => 1.0,
        Branch::Cost => -1.0,
    };
    let policy = policy_step(pi, q, sign, cfg.policy_step, cfg.policy_temperature);
    Ok(CrpoOutcome {
        policy,
        branch,
        reward_estimate,
        cost_estimate,
    })
}

/// new_pi = (1 - step) * pi + step * softmax(sign * Q / temperature), row-wise.
fn policy_step(pi: &Policy, q: &QTable, sign: f64, step: f64, temperature: f64) -> Policy {
    let probs = pi
        .probs
        .iter()
        .zip(&q.values)
        .map(|(row, q_row)| {
            let soft = softmax(q_row.iter().map(|v| sign * v / temperature));
            let mut mixed: Vec<f64> = row
                .iter()
                .zip(&soft)
                .map(|(p, s)| (1.0 - step) * p + step * s)
                .collect();
            let total: f64 = mixed.iter().sum();
            for p in &mut mixed {
                *p /= total;
            }
            // Pin the row sum to exactly 1 so downstream validation holds.
            let drift = 1.0 - mixed.iter().sum::<f64>();
            *mixed.last_mut().unwrap() += drift;
            mixed
        })
        .collect();
    Policy { probs }
}

fn softmax(logits: impl Iterator<Item = f64>) -> Vec<f64> {
    let logits: Vec<f64> = logits.collect();
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-iteration training log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub env_steps: usize,
    pub reward_estimate: f64,
    pub cost_estimate: f64,
    pub branch: Branch,
    pub reward_loss: f64,
    pub cost_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub log: Vec<IterationRecord>,
}

/// Full training loop: per iteration, collect environment steps into the
/// buffer, run K critic updates, and take one policy update. Deterministic
/// given the seed: environment stepping, batch sampling, and model sampling
/// run on separate seeded streams.
pub fn train(env: &dyn Environment, cfg: &LearnerConfig) -> Result<TrainOutcome, LearnError> {
    cfg.validate()?;
    let mut env_rng = stream_rng(cfg.seed, 0);
    let mut batch_rng = stream_rng(cfg.seed, 1);
    let mut model_rng = stream_rng(cfg.seed, 2);

    let mut pi = Policy::uniform(env.num_cells(), env.num_actions());
    let mut critics = Critics::new(env.num_cells(), env.num_actions());
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = Vec::new();

    let mut state = env.reset();
    let mut steps_in_episode = 0usize;
    let mut steps_taken = 0usize;
    let mut iteration = 0usize;

    while steps_taken < cfg.total_steps {
        iteration += 1;
        let collect = cfg.steps_per_iter.min(cfg.total_steps - steps_taken);
        for _ in 0..collect {
            let cell = env.state_index(&state);
            let action = sample_categorical(pi.probs[cell].iter().copied(), &mut env_rng);
            let outcome = env.step(&state, action, &mut env_rng)?;
            buffer.push(Transition {
                state: state.clone(),
                action,
                reward: outcome.reward,
                cost: outcome.cost,
                next_state: outcome.next_state.clone(),
            });
            state = outcome.next_state;
            steps_in_episode += 1;
            if steps_in_episode == env.horizon() {
                state = env.reset();
                steps_in_episode = 0;
            }
        }
        steps_taken += collect;

        if buffer.len() < cfg.batch_size {
            continue; // warmup: no update, no log entry
        }
        let mut losses = CriticLosses {
            reward: 0.0,
            cost: 0.0,
        };
        for _ in 0..cfg.updates_per_iter {
            let batch = buffer.sample(cfg.batch_size, &mut batch_rng)?;
            losses = critic_update(&batch, &mut critics, &pi, cfg, env, &mut model_rng)?;
        }
        let batch = buffer.sample(cfg.batch_size, &mut batch_rng)?;
        let outcome = crpo_update(&critics, &pi, cfg, &batch, env)?;
        pi = outcome.policy;
        log.push(IterationRecord {
            iteration,
            env_steps: steps_taken,
            reward_estimate: outcome.reward_estimate,
            cost_estimate: outcome.cost_estimate,
            branch: outcome.branch,
            reward_loss: losses.reward,
            cost_loss: losses.cost,
        });
    }
    Ok(TrainOutcome { policy: pi, log })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Exact tabular solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactSolverConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub temperature: f64,
    pub tol: f64,
}

impl Default for ExactSolverConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            step_size: 0.3,
            temperature: 0.05,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub policy: Policy,
    /// Exact risk-averse reward value of the returned policy.
    pub objective: f64,
    /// Exact risk-averse constraint value of the returned policy.
    pub constraint: f64,
    /// False when no iterate satisfied the budget; the returned policy then
    /// minimizes the constraint among iterates.
    pub feasible: bool,
}

const FEASIBILITY_SLACK: f64 = 1e-6;

/// Constraint-rectified exact iteration on a small tabular instance: both Q
/// functions are computed exactly each step, the policy interpolates toward
/// the softmax-greedy improvement of whichever objective the budget selects,
/// and the best exactly-feasible candidate seen (stochastic iterates plus
/// their greedy deterministic roundings) is returned.
pub fn solve_exact(
    cmdp: &TabularCmdp,
    mix: &ModelMixture,
    objective: DistortionSpec,
    constraint: DistortionSpec,
    cfg: &ExactSolverConfig,
) -> Result<ExactSolution, LearnError> {
    let pairs = cmdp.num_states * cmdp.num_actions;
    if pairs > 400 {
        return Err(LearnError::TooLarge(pairs));
    }
    let evaluate = |pi: &Policy| -> Result<(f64, f64), LearnError> {
        let qr = ramu_policy_evaluation(cmdp, pi, mix, objective, ValueKind::Reward, cfg.tol)?;
        let qc = ramu_policy_evaluation(cmdp, pi, mix, constraint, ValueKind::Cost, cfg.tol)?;
        Ok((initial_value(cmdp, pi, &qr), initial_value(cmdp, pi, &qc)))
    };

    let mut pi = Policy::uniform(cmdp.num_states, cmdp.num_actions);
    let mut best: Option<(Policy, f64, f64)> = None; // feasible with max objective
    let mut safest: Option<(Policy, f64, f64)> = None; // min constraint fallback
    let mut det_cache: HashMap<Vec<usize>, (f64, f64)> = HashMap::new();

    let consider = |pi: &Policy,
                        jr: f64,
                        jc: f64,
                        best: &mut Option<(Policy, f64, f64)>,
                        safest: &mut Option<(Policy, f64, f64)>| {
        if jc <= cmdp.budget + FEASIBILITY_SLACK
            && best.as_ref().is_none_or(|(_, b, _)| jr > *b)
        {
            *best = Some((pi.clone(), jr, jc));
        }
        if safest.as_ref().is_none_or(|(_, _, c)| jc < *c) {
            *safest = Some((pi.clone(), jr, jc));
        }
    };

    for _ in 0..cfg.iterations {
        let qr = ramu_policy_evaluation(cmdp, &pi, mix, objective, ValueKind::Reward, cfg.tol)?;
        let qc = ramu_policy_evaluation(cmdp, &pi, mix, constraint, ValueKind::Cost, cfg.tol)?;
        let jr = initial_value(cmdp, &pi, &qr);
        let jc = initial_value(cmdp, &pi, &qc);
        consider(&pi, jr, jc, &mut best, &mut safest);

        // Greedy deterministic roundings of the current critics are cheap
        // candidates that the stochastic path may only approach.
        for (q, sign) in [(&qr, 1.0), (&qc, -1.0)] {
            let actions: Vec<usize> = q
                .values
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .max_by(|a, b| (sign * a.1).partial_cmp(&(sign * b.1)).unwrap())
                        .map(|(i, _)| i)
                        .unwrap()
                })
                .collect();
            let candidate = Policy::deterministic(&actions, cmdp.num_actions);
            let (djr, djc) = match det_cache.get(&actions) {
                Some(&cached) => cached,
                None => {
                    let values = evaluate(&candidate)?;
                    det_cache.insert(actions, values);
                    values
                }
            };
            consider(&candidate, djr, djc, &mut best, &mut safest);
        }

        let (q, sign) = if jc <= cmdp.budget {
            (&qr, 1.0)
        } else {
            (&qc, -1.0)
        };
        pi = policy_step(&pi, q, sign, cfg.step_size, cfg.temperature);
    }

    // The converged iterate randomizes only where the constraint binds; its
    // support is a small deterministic-policy family worth checking exactly.
    const SUPPORT_PROB: f64 = 0.01;
    const SUPPORT_COMBO_CAP: usize = 1024;
    let supports: Vec<Vec<usize>> = pi
        .probs
        .iter()
        .map(|row| {
            let kept: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > SUPPORT_PROB)
                .map(|(a, _)| a)
                .collect();
            if kept.is_empty() {
                vec![0]
            } else {
                kept
            }
        })
        .collect();
    let combos: usize = supports.iter().map(Vec::len).product();
    if combos <= SUPPORT_COMBO_CAP {
        let mut index = vec![0usize; cmdp.num_states];
        'combos: loop {
            let actions: Vec<usize> = index
                .iter()
                .zip(&supports)
                .map(|(&i, support)| support[i])
                .collect();
            let candidate = Policy::deterministic(&actions, cmdp.num_actions);
            let (jr, jc) = match det_cache.get(&actions) {
                Some(&cached) => cached,
                None => {
                    let values = evaluate(&candidate)?;
                    det_cache.insert(actions, values);
                    values
                }
            };
            consider(&candidate, jr, jc, &mut best, &mut safest);
            // Mixed-radix increment over the support sizes.
            let mut digit = 0;
            loop {
                if digit == cmdp.num_states {
                    break 'combos;
                }
                index[digit] += 1;
                if index[digit] < supports[digit].len() {
                    break;
                }
                index[digit] = 0;
                digit += 1;
            }
        }
    }

    let (policy, objective_value, constraint_value, feasible) = match best {
        Some((p, jr, jc)) => (p, jr, jc, true),
        None => {
            let (p, jr, jc) = safest.expect("at least one iterate was evaluated");
            (p, jr, jc, false)
        }
    };
    Ok(ExactSolution {
        policy,
        objective: objective_value,
        constraint: constraint_value,
        feasible,
    })
}
