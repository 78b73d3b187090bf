//! Tabular constrained MDPs, model mixtures, and exact single-model
//! policy evaluation.
//!
//! A constrained MDP is the tuple (S, A, p, r, c, d0, gamma) plus a safety
//! budget B on expected total discounted costs. Reward and cost Q functions
//! are the fixed points of the standard Bellman operators
//!
//! ```text
//! T Q(s,a) = r(s,a) + gamma * E_{s'~p(.|s,a)} E_{a'~pi(.|s')} [ Q(s',a') ]
//! ```
//!
//! and are computed here by fixed-point iteration with the a-posteriori
//! contraction stopping rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CmdpError {
    #[error("invalid CMDP: {0}")]
    Invalid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

const ROW_SUM_TOL: f64 = 1e-12;

fn check_distribution(row: &[f64], what: &str) -> Result<(), CmdpError> {
    let mut total = 0.0;
    for &p in row {
        if !p.is_finite() || p < 0.0 {
            return Err(CmdpError::Invalid(format!("{what} has entry {p}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > ROW_SUM_TOL {
        return Err(CmdpError::Invalid(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Finite constrained MDP with dense transition rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularCmdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// transitions[s][a] is a probability row over next states.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// rewards[s][a]
    pub rewards: Vec<Vec<f64>>,
    /// costs[s][a]
    pub costs: Vec<Vec<f64>>,
    /// Initial state distribution d0.
    pub initial: Vec<f64>,
    pub gamma: f64,
    /// Safety budget B on expected total discounted costs.
    pub budget: f64,
}

impl TabularCmdp {
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        costs: Vec<Vec<f64>>,
        initial: Vec<f64>,
        gamma: f64,
        budget: f64,
    ) -> Result<Self, CmdpError> {
        let num_states = transitions.len();
        if num_states == 0 {
            return Err(CmdpError::Invalid("no states".into()));
        }
        let num_actions = transitions[0].len();
        if num_actions == 0 {
            return Err(CmdpError::Invalid("no actions".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(CmdpError::Invalid(format!("gamma {gamma} outside [0,1)")));
        }
        if budget.is_nan() || budget < 0.0 {
            return Err(CmdpError::Invalid(format!("budget {budget} negative")));
        }
        if rewards.len() != num_states || costs.len() != num_states {
            return Err(CmdpError::ShapeMismatch("reward/cost table height".into()));
        }
        for s in 0..num_states {
            if transitions[s].len() != num_actions
                || rewards[s].len() != num_actions
                || costs[s].len() != num_actions
            {
                return Err(CmdpError::ShapeMismatch(format!("state {s} row width")));
            }
            for a in 0..num_actions {
                if transitions[s][a].len() != num_states {
                    return Err(CmdpError::ShapeMismatch(format!("p[{s}][{a}] length")));
                }
                check_distribution(&transitions[s][a], &format!("p[{s}][{a}]"))?;
                if !rewards[s][a].is_finite() || !costs[s][a].is_finite() {
                    return Err(CmdpError::Invalid(format!("non-finite r/c at ({s},{a})")));
                }
            }
        }
        if initial.len() != num_states {
            return Err(CmdpError::ShapeMismatch("d0 length".into()));
        }
        check_distribution(&initial, "d0")?;
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            rewards,
            costs,
            initial,
            gamma,
            budget,
        })
    }

    pub fn stage_value(&self, kind: ValueKind, s: usize, a: usize) -> f64 {
        match kind {
            ValueKind::Reward => self.rewards[s][a],
            ValueKind::Cost => self.costs[s][a],
        }
    }

    /// Structured-text serialization with round-trip guarantee.
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("CMDP serializes")
    }

    pub fn from_text(text: &str) -> Result<Self, CmdpError> {
        let cmdp: TabularCmdp =
            serde_json::from_str(text).map_err(|e| CmdpError::Serialization(e.to_string()))?;
        // Re-validate: the wire format carries no invariants of its own.
        TabularCmdp::new(
            cmdp.transitions,
            cmdp.rewards,
            cmdp.costs,
            cmdp.initial,
            cmdp.gamma,
            cmdp.budget,
        )
    }
}

/// Stationary stochastic policy as a table of action distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub probs: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self, CmdpError> {
        for (s, row) in probs.iter().enumerate() {
            check_distribution(row, &format!("pi[{s}]"))?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: vec![vec![1.0 / num_actions as f64; num_actions]; num_states],
        }
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Self {
        let probs = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Self { probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn action_prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Reward,
    Cost,
}

impl ValueKind {
    /// Sign convention used when a risk measure is applied to this kind.
    pub fn risk_side(self) -> crate::risk::RiskSide {
        match self {
            ValueKind::Reward => crate::risk::RiskSide::Reward,
            ValueKind::Cost => crate::risk::RiskSide::Cost,
        }
    }
}

/// State-action value table tagged with the quantity it estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub values: Vec<Vec<f64>>,
    pub kind: ValueKind,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize, kind: ValueKind) -> Self {
        Self {
            values: vec![vec![0.0; num_actions]; num_states],
            kind,
        }
    }

    /// E_{a ~ pi(.|s)} [ Q(s,a) ]
    pub fn state_value(&self, pi: &Policy, s: usize) -> f64 {
        self.values[s]
            .iter()
            .zip(&pi.probs[s])
            .map(|(q, p)| q * p)
            .sum()
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One application of the standard Bellman operator at (s,a) under an
/// explicit transition row.
pub fn standard_bellman(
    q: &QTable,
    cmdp: &TabularCmdp,
    pi: &Policy,
    s: usize,
    a: usize,
    row: &[f64],
) -> Result<f64, CmdpError> {
    if row.len() != cmdp.num_states {
        return Err(CmdpError::ShapeMismatch(format!(
            "transition row length {} != {}",
            row.len(),
            cmdp.num_states
        )));
    }
    let continuation: f64 = row
        .iter()
        .enumerate()
        .map(|(next, &p)| p * q.state_value(pi, next))
        .sum();
    Ok(cmdp.stage_value(q.kind, s, a) + cmdp.gamma * continuation)
}

/// Stopping threshold guaranteeing ||Q - Q*||_inf <= tol after a sup-norm
/// change of at most this much.
pub fn stopping_threshold(gamma: f64, tol: f64) -> f64 {
    if gamma == 0.0 {
        // A single sweep is exact; any positive threshold terminates it.
        tol
    } else {
        tol * (1.0 - gamma) / gamma
    }
}

/// Fixed-point iteration of the standard Bellman operator from Q = 0.
pub fn policy_evaluation(
    cmdp: &TabularCmdp,
    pi: &Policy,
    kind: ValueKind,
    tol: f64,
) -> QTable {
    assert!(tol > 0.0, "tolerance must be positive");
    let threshold = stopping_threshold(cmdp.gamma, tol);
    let mut q = QTable::zeros(cmdp.num_states, cmdp.num_actions, kind);
    loop {
        let next = apply_standard_operator(&q, cmdp, pi);
        let delta = q.sup_distance(&next);
        q = next;
        if delta <= threshold {
            return q;
        }
    }
}

pub fn apply_standard_operator(q: &QTable, cmdp: &TabularCmdp, pi: &Policy) -> QTable {
    let mut next = QTable::zeros(cmdp.num_states, cmdp.num_actions, q.kind);
    for s in 0..cmdp.num_states {
        for a in 0..cmdp.num_actions {
            next.values[s][a] =
                standard_bellman(q, cmdp, pi, s, a, &cmdp.transitions[s][a]).expect("shapes agree");
        }
    }
    next
}

/// J_{p,.}(pi) = E_{s ~ d0} E_{a ~ pi} [ Q(s,a) ] for the converged Q.
pub fn exact_return(cmdp: &TabularCmdp, pi: &Policy, kind: ValueKind, tol: f64) -> f64 {
    let q = policy_evaluation(cmdp, pi, kind, tol);
    initial_value(cmdp, pi, &q)
}

pub fn initial_value(cmdp: &TabularCmdp, pi: &Policy, q: &QTable) -> f64 {
    cmdp.initial
        .iter()
        .enumerate()
        .map(|(s, &d)| d * q.state_value(pi, s))
        .sum()
}

/// Mixture support table: atoms[s][a] is a list of (transition row,
/// probability) pairs.
pub type MixtureAtoms = Vec<Vec<Vec<(Vec<f64>, f64)>>>;

/// Finite-support distribution over transition rows at every (s,a); the
/// product over pairs is the rectangular model distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMixture {
    atoms: MixtureAtoms,
}

impl ModelMixture {
    pub fn new(
        atoms: MixtureAtoms,
        num_states: usize,
        num_actions: usize,
    ) -> Result<Self, CmdpError> {
        if atoms.len() != num_states {
            return Err(CmdpError::ShapeMismatch("mixture height".into()));
        }
        for (s, per_state) in atoms.iter().enumerate() {
            if per_state.len() != num_actions {
                return Err(CmdpError::ShapeMismatch(format!("mixture width at {s}")));
            }
            for (a, support) in per_state.iter().enumerate() {
                if support.is_empty() {
                    return Err(CmdpError::Invalid(format!("empty mixture at ({s},{a})")));
                }
                let mut total = 0.0;
                for (row, prob) in support {
                    if row.len() != num_states {
                        return Err(CmdpError::ShapeMismatch(format!(
                            "mixture row length at ({s},{a})"
                        )));
                    }
                    check_distribution(row, &format!("mixture row at ({s},{a})"))?;
                    if prob.is_nan() || *prob <= 0.0 {
                        return Err(CmdpError::Invalid(format!(
                            "non-positive mixture prob at ({s},{a})"
                        )));
                    }
                    total += prob;
                }
                if (total - 1.0).abs() > ROW_SUM_TOL {
                    return Err(CmdpError::Invalid(format!(
                        "mixture probs at ({s},{a}) sum to {total}"
                    )));
                }
            }
        }
        Ok(Self { atoms })
    }

    /// Point mass on the CMDP's own transition model.
    pub fn degenerate(cmdp: &TabularCmdp) -> Self {
        let atoms = cmdp
            .transitions
            .iter()
            .map(|rows| rows.iter().map(|row| vec![(row.clone(), 1.0)]).collect())
            .collect();
        Self { atoms }
    }

    pub fn at(&self, s: usize, a: usize) -> &[(Vec<f64>, f64)] {
        &self.atoms[s][a]
    }

    pub fn support_size(&self, s: usize, a: usize) -> usize {
        self.atoms[s][a].len()
    }

    /// Probability-weighted average row at (s,a).
    pub fn mean_row(&self, s: usize, a: usize) -> Vec<f64> {
        let num_states = self.atoms[s][a][0].0.len();
        let mut mean = vec![0.0; num_states];
        for (row, prob) in &self.atoms[s][a] {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += prob * x;
            }
        }
        mean
    }

    /// The CMDP obtained by replacing every row with the mixture mean.
    pub fn mean_model(&self, cmdp: &TabularCmdp) -> TabularCmdp {
        let mut out = cmdp.clone();
        for s in 0..cmdp.num_states {
            for a in 0..cmdp.num_actions {
                out.transitions[s][a] = self.mean_row(s, a);
            }
        }
        out
    }
}
