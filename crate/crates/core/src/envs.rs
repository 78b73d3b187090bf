//! Desk-scale environments with a perturbable dynamics parameter, plus
//! rollout machinery for robustness sweeps.
//!
//! Both environments expose a continuous state embedding (so the latent
//! perturbation model applies) together with a finite cell index (so
//! tabular critics and policies apply). `GridHazardEnv` maps exactly onto a
//! tabular CMDP; `PointMassEnv` is discretized on a uniform grid.
//!
//! Evaluation uses undiscounted episodic reward/cost totals against the
//! safety budget, while training optimizes discounted objectives; both views
//! are kept and configured separately.

use crate::cmdp::{Policy, TabularCmdp};
use crate::ramu::sample_categorical;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Invalid(String),
    #[error("invalid action {action} (environment has {num_actions})")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("unknown sweep parameter '{0}'")]
    UnknownParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
}

/// Common surface shared by the desk-scale environments.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Number of discretized state cells (tabular critic / policy size).
    fn num_cells(&self) -> usize;
    /// Maps a continuous state (possibly perturbed off-manifold) to a cell.
    fn state_index(&self, state: &[f64]) -> usize;
    /// Valid state box, used to clip perturbed states.
    fn state_bounds(&self) -> Vec<(f64, f64)>;
    fn horizon(&self) -> usize;
    fn reset(&self) -> Vec<f64>;
    fn step(&self, state: &[f64], action: usize, rng: &mut dyn RngCore)
        -> Result<StepOutcome, EnvError>;
}

// ---------------------------------------------------------------------------
// Gridworld with hazard cells
// ---------------------------------------------------------------------------

/// Gridworld with hazard cells (cost 1 on entry), an absorbing goal
/// (reward 1 on entry), and lateral slip. Maps exactly to a tabular CMDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHazardEnv {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub hazards: Vec<(usize, usize)>,
    /// Probability that a move slips to one of the two lateral directions
    /// (slip/2 each).
    pub slip: f64,
    pub horizon: usize,
}

/// Actions: 0 = up (y-1), 1 = down (y+1), 2 = left (x-1), 3 = right (x+1).
pub const GRID_ACTIONS: usize = 4;
const GRID_DELTAS: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

impl GridHazardEnv {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.width == 0 || self.height == 0 {
            return Err(EnvError::Invalid("empty grid".into()));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(EnvError::Invalid(format!("slip {}", self.slip)));
        }
        if self.horizon == 0 {
            return Err(EnvError::Invalid("zero horizon".into()));
        }
        for &(x, y) in [self.start, self.goal].iter().chain(&self.hazards) {
            if x >= self.width || y >= self.height {
                return Err(EnvError::Invalid(format!("cell ({x},{y}) out of bounds")));
            }
        }
        if self.hazards.contains(&self.goal) {
            return Err(EnvError::Invalid("goal overlaps a hazard".into()));
        }
        Ok(())
    }

    pub fn cell_index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    fn is_hazard(&self, cell: (usize, usize)) -> bool {
        self.hazards.contains(&cell)
    }

    fn move_from(&self, (x, y): (usize, usize), direction: usize) -> (usize, usize) {
        let (dx, dy) = GRID_DELTAS[direction];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            (x, y) // bumping a wall stays in place
        } else {
            (nx as usize, ny as usize)
        }
    }

    /// Exact transition row over cells for (s, a), including slip.
    pub fn transition_row(&self, cell: (usize, usize), action: usize) -> Vec<f64> {
        let n = self.width * self.height;
        let mut row = vec![0.0; n];
        if cell == self.goal {
            row[self.cell_index(cell.0, cell.1)] = 1.0; // absorbing
            return row;
        }
        let lateral = match action {
            0 | 1 => [2, 3],
            _ => [0, 1],
        };
        let intended = self.move_from(cell, action);
        row[self.cell_index(intended.0, intended.1)] += 1.0 - self.slip;
        for direction in lateral {
            let target = self.move_from(cell, direction);
            row[self.cell_index(target.0, target.1)] += self.slip / 2.0;
        }
        row
    }

    /// Exact tabular CMDP: reward is the entry probability of the goal, cost
    /// the entry probability of a hazard cell.
    pub fn build_tabular(&self, gamma: f64, budget: f64) -> Result<TabularCmdp, EnvError> {
        self.validate()?;
        let n = self.width * self.height;
        let mut transitions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut state_rows = Vec::with_capacity(GRID_ACTIONS);
                let mut state_rewards = Vec::with_capacity(GRID_ACTIONS);
                let mut state_costs = Vec::with_capacity(GRID_ACTIONS);
                for a in 0..GRID_ACTIONS {
                    let row = self.transition_row((x, y), a);
                    let goal_prob = if (x, y) == self.goal {
                        0.0
                    } else {
                        row[self.cell_index(self.goal.0, self.goal.1)]
                    };
                    let hazard_prob: f64 = self
                        .hazards
                        .iter()
                        .map(|&(hx, hy)| row[self.cell_index(hx, hy)])
                        .sum();
                    state_rows.push(row);
                    state_rewards.push(goal_prob);
                    state_costs.push(if (x, y) == self.goal { 0.0 } else { hazard_prob });
                }
                transitions.push(state_rows);
                rewards.push(state_rewards);
                costs.push(state_costs);
            }
        }
        let mut initial = vec![0.0; n];
        initial[self.cell_index(self.start.0, self.start.1)] = 1.0;
        TabularCmdp::new(transitions, rewards, costs, initial, gamma, budget)
            .map_err(|e| EnvError::Invalid(e.to_string()))
    }
}

impl Environment for GridHazardEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        GRID_ACTIONS
    }

    fn num_cells(&self) -> usize {
        self.width * self.height
    }

    fn state_index(&self, state: &[f64]) -> usize {
        let x = state[0].round().clamp(0.0, (self.width - 1) as f64) as usize;
        let y = state[1].round().clamp(0.0, (self.height - 1) as f64) as usize;
        self.cell_index(x, y)
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        vec![
            (0.0, (self.width - 1) as f64),
            (0.0, (self.height - 1) as f64),
        ]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self) -> Vec<f64> {
        vec![self.start.0 as f64, self.start.1 as f64]
    }

    fn step(
        &self,
        state: &[f64],
        action: usize,
        rng: &mut dyn RngCore,
    ) -> Result<StepOutcome, EnvError> {
        if action >= GRID_ACTIONS {
            return Err(EnvError::InvalidAction {
                action,
                num_actions: GRID_ACTIONS,
            });
        }
        let x = state[0].round() as usize;
        let y = state[1].round() as usize;
        let row = self.transition_row((x, y), action);
        let next = sample_categorical(row.iter().copied(), rng);
        let next_cell = (next % self.width, next / self.width);
        let entered_goal = (x, y) != self.goal && next_cell == self.goal;
        Ok(StepOutcome {
            next_state: vec![next_cell.0 as f64, next_cell.1 as f64],
            reward: if entered_goal { 1.0 } else { 0.0 },
            cost: if (x, y) != self.goal && self.is_hazard(next_cell) {
                1.0
            } else {
                0.0
            },
        })
    }
}

// ---------------------------------------------------------------------------
// Point mass
// ---------------------------------------------------------------------------

/// Point mass in a box: position/velocity state, bounded accelerations,
/// reward for progress toward the target, cost 1 inside the hazard region.
/// Explicit Euler integration with a damping physics parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassEnv {
    /// Position dimensions; the state is [position, velocity] of length 2*dim.
    pub dim: usize,
    pub damping: f64,
    pub dt: f64,
    pub horizon: usize,
    /// Per-axis acceleration magnitude; actions are {-a, 0, +a}^dim.
    pub accel: f64,
    pub start: Vec<f64>,
    pub target: Vec<f64>,
    pub hazard_center: Vec<f64>,
    pub hazard_radius: f64,
    pub pos_bound: f64,
    pub vel_bound: f64,
    /// Discretization bins per state dimension for tabular critics.
    pub bins_per_dim: usize,
}

impl PointMassEnv {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.dim == 0 || self.horizon == 0 || self.bins_per_dim == 0 {
            return Err(EnvError::Invalid("zero dim/horizon/bins".into()));
        }
        if self.dt.is_nan() || self.dt <= 0.0 || self.damping.is_nan() || self.damping < 0.0 {
            return Err(EnvError::Invalid("dt must be > 0 and damping >= 0".into()));
        }
        if self.start.len() != self.dim
            || self.target.len() != self.dim
            || self.hazard_center.len() != self.dim
        {
            return Err(EnvError::Invalid("vector lengths must equal dim".into()));
        }
        let bad_bound = |b: f64| b.is_nan() || b <= 0.0;
        if bad_bound(self.pos_bound)
            || bad_bound(self.vel_bound)
            || self.hazard_radius.is_nan()
            || self.hazard_radius < 0.0
        {
            return Err(EnvError::Invalid("bounds must be positive".into()));
        }
        Ok(())
    }

    fn action_accel(&self, action: usize) -> Vec<f64> {
        // Base-3 digits map the action index to {-a, 0, +a} per axis.
        let mut digits = action;
        (0..self.dim)
            .map(|_| {
                let digit = digits % 3;
                digits /= 3;
                (digit as f64 - 1.0) * self.accel
            })
            .collect()
    }

    fn distance_to_target(&self, position: &[f64]) -> f64 {
        position
            .iter()
            .zip(&self.target)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn in_hazard(&self, position: &[f64]) -> bool {
        let d2: f64 = position
            .iter()
            .zip(&self.hazard_center)
            .map(|(p, c)| (p - c).powi(2))
            .sum();
        d2.sqrt() <= self.hazard_radius
    }
}

impl Environment for PointMassEnv {
    fn state_dim(&self) -> usize {
        2 * self.dim
    }

    fn num_actions(&self) -> usize {
        3usize.pow(self.dim as u32)
    }

    fn num_cells(&self) -> usize {
        self.bins_per_dim.pow(2 * self.dim as u32)
    }

    fn state_index(&self, state: &[f64]) -> usize {
        let bounds = self.state_bounds();
        let mut index = 0;
        for (value, &(lo, hi)) in state.iter().zip(&bounds) {
            let frac = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
            let bin = ((frac * self.bins_per_dim as f64) as usize).min(self.bins_per_dim - 1);
            index = index * self.bins_per_dim + bin;
        }
        index
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(-self.pos_bound, self.pos_bound); self.dim];
        bounds.extend(vec![(-self.vel_bound, self.vel_bound); self.dim]);
        bounds
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self) -> Vec<f64> {
        let mut state = self.start.clone();
        state.extend(vec![0.0; self.dim]);
        state
    }

    fn step(
        &self,
        state: &[f64],
        action: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<StepOutcome, EnvError> {
        if action >= self.num_actions() {
            return Err(EnvError::InvalidAction {
                action,
                num_actions: self.num_actions(),
            });
        }
        let (position, velocity) = state.split_at(self.dim);
        let accel = self.action_accel(action);
        let mut next_velocity: Vec<f64> = velocity
            .iter()
            .zip(&accel)
            .map(|(v, u)| v + self.dt * (u - self.damping * v))
            .collect();
        for v in &mut next_velocity {
            *v = v.clamp(-self.vel_bound, self.vel_bound);
        }
        let mut next_position: Vec<f64> = position
            .iter()
            .zip(&next_velocity)
            .map(|(p, v)| p + self.dt * v)
            .collect();
        for p in &mut next_position {
            *p = p.clamp(-self.pos_bound, self.pos_bound);
        }
        let reward = self.distance_to_target(position) - self.distance_to_target(&next_position);
        let cost = if self.in_hazard(&next_position) { 1.0 } else { 0.0 };
        let mut next_state = next_position;
        next_state.extend(next_velocity);
        Ok(StepOutcome {
            next_state,
            reward,
            cost,
        })
    }
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub cost: f64,
    pub next_state: Vec<f64>,
}

/// Episode record with undiscounted reward and cost sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub total_reward: f64,
    pub total_cost: f64,
}

impl Trajectory {
    /// Safety indicator used everywhere downstream: episodic total cost
    /// within the budget.
    pub fn is_safe(&self, budget: f64) -> bool {
        self.total_cost <= budget
    }
}

/// Runs one episode under a tabular policy over environment cells.
pub fn rollout(
    env: &dyn Environment,
    pi: &Policy,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<Trajectory, EnvError> {
    assert!(horizon >= 1, "horizon must be >= 1");
    let mut state = env.reset();
    let mut records = Vec::with_capacity(horizon);
    let mut total_reward = 0.0;
    let mut total_cost = 0.0;
    for _ in 0..horizon {
        let cell = env.state_index(&state);
        let action = sample_categorical(pi.probs[cell].iter().copied(), rng);
        let outcome = env.step(&state, action, rng)?;
        total_reward += outcome.reward;
        total_cost += outcome.cost;
        records.push(StepRecord {
            state: state.clone(),
            action,
            reward: outcome.reward,
            cost: outcome.cost,
            next_state: outcome.next_state.clone(),
        });
        state = outcome.next_state;
    }
    Ok(Trajectory {
        records,
        total_reward,
        total_cost,
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Environment family declared in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Grid(GridHazardEnv),
    PointMass(PointMassEnv),
}

impl EnvSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            EnvSpec::Grid(env) => env.validate(),
            EnvSpec::PointMass(env) => env.validate(),
        }
    }

    pub fn build(&self) -> Box<dyn Environment + Send + Sync> {
        match self {
            EnvSpec::Grid(env) => Box::new(env.clone()),
            EnvSpec::PointMass(env) => Box::new(env.clone()),
        }
    }

    /// Returns a copy with the named dynamics parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<EnvSpec, EnvError> {
        let mut out = self.clone();
        match (&mut out, name) {
            (EnvSpec::Grid(env), "slip") => env.slip = value,
            (EnvSpec::PointMass(env), "damping") => env.damping = value,
            (EnvSpec::PointMass(env), "accel") => env.accel = value,
            _ => return Err(EnvError::UnknownParameter(name.to_string())),
        }
        out.validate()?;
        Ok(out)
    }
}

/// One swept dynamics parameter: nominal value and an evenly spaced test
/// range containing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub nominal: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub is_nominal: bool,
    pub env: EnvSpec,
}

/// Evenly spaced parameter grid over [min, max]; the nominal point is
/// flagged. A range that excludes the nominal value is a config error.
pub fn make_sweep(family: &EnvSpec, sweep: &SweepSpec) -> Result<Vec<SweepPoint>, EnvError> {
    if sweep.count == 0 {
        return Err(EnvError::Invalid("sweep count must be >= 1".into()));
    }
    if sweep.nominal < sweep.min || sweep.nominal > sweep.max {
        return Err(EnvError::Invalid(format!(
            "sweep range [{}, {}] excludes nominal {}",
            sweep.min, sweep.max, sweep.nominal
        )));
    }
    let values: Vec<f64> = if sweep.count == 1 {
        vec![sweep.nominal]
    } else {
        (0..sweep.count)
            .map(|i| {
                sweep.min + (sweep.max - sweep.min) * i as f64 / (sweep.count - 1) as f64
            })
            .collect()
    };
    values
        .into_iter()
        .map(|value| {
            Ok(SweepPoint {
                value,
                is_nominal: (value - sweep.nominal).abs() <= 1e-9,
                env: family.with_parameter(&sweep.parameter, value)?,
            })
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::test_fixtures::demo_grid;
    use super::*;
    use crate::cmdp::{QTable, ValueKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn grid_validation() {
        let mut env = demo_grid(0.2);
        env.validate().unwrap();
        env.hazards.push((4, 0)); // overlaps goal
        assert!(env.validate().is_err());
        let mut env = demo_grid(1.5);
        assert!(env.validate().is_err());
        env.slip = 0.2;
        env.goal = (9, 9);
        assert!(env.validate().is_err());
    }

    #[test]
    fn deterministic_rows_are_one_hot() {
        let env = demo_grid(0.0);
        let cmdp = env.build_tabular(0.95, 15.0).unwrap();
        for s in 0..cmdp.num_states {
            for a in 0..cmdp.num_actions {
                let row = &cmdp.transitions[s][a];
                assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 1);
                assert_eq!(row.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn slip_rows_split_probability() {
        let env = demo_grid(0.2);
        // From (2,2) moving up: intended (2,1) with 0.8, laterals (1,2) and
        // (3,2) with 0.1 each.
        let row = env.transition_row((2, 2), 0);
        assert!((row[env.cell_index(2, 1)] - 0.8).abs() < 1e-15);
        assert!((row[env.cell_index(1, 2)] - 0.1).abs() < 1e-15);
        assert!((row[env.cell_index(3, 2)] - 0.1).abs() < 1e-15);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hazard_entry_costs_and_goal_absorbing() {
        let env = demo_grid(0.0);
        let cmdp = env.build_tabular(0.95, 15.0).unwrap();
        // Moving down from (1,0) deterministically enters hazard (1,1).
        let s = env.cell_index(1, 0);
        assert_eq!(cmdp.costs[s][1], 1.0);
        // Entering the goal from (3,0) moving right earns reward 1.
        let s = env.cell_index(3, 0);
        assert_eq!(cmdp.rewards[s][3], 1.0);
        // Goal self-loops with zero reward and cost.
        let g = env.cell_index(4, 0);
        for a in 0..GRID_ACTIONS {
            assert_eq!(cmdp.transitions[g][a][g], 1.0);
            assert_eq!(cmdp.rewards[g][a], 0.0);
            assert_eq!(cmdp.costs[g][a], 0.0);
        }
    }

    #[test]
    fn step_matches_tabular_rows_chi_square() {
        let env = GridHazardEnv {
            width: 3,
            height: 3,
            start: (0, 0),
            goal: (2, 2),
            hazards: vec![(1, 1)],
            slip: 0.25,
            horizon: 20,
        };
        let cmdp = env.build_tabular(0.95, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let samples = 100_000usize;
        for y in 0..3 {
            for x in 0..3 {
                for a in 0..GRID_ACTIONS {
                    let expected = &cmdp.transitions[env.cell_index(x, y)][a];
                    let mut counts = vec![0usize; expected.len()];
                    let state = vec![x as f64, y as f64];
                    for _ in 0..samples {
                        let outcome = env.step(&state, a, &mut rng).unwrap();
                        counts[env.state_index(&outcome.next_state)] += 1;
                    }
                    let support: Vec<usize> =
                        (0..expected.len()).filter(|&i| expected[i] > 0.0).collect();
                    if support.len() < 2 {
                        assert_eq!(counts[support[0]], samples);
                        continue;
                    }
                    let statistic: f64 = support
                        .iter()
                        .map(|&i| {
                            let expect = expected[i] * samples as f64;
                            (counts[i] as f64 - expect).powi(2) / expect
                        })
                        .sum();
                    let df = (support.len() - 1) as f64;
                    let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
                    assert!(
                        statistic < critical,
                        "({x},{y},{a}): chi2 {statistic} >= {critical}"
                    );
                }
            }
        }
    }

    #[test]
    fn rollout_sums_and_determinism() {
        let env = demo_grid(0.2);
        let pi = Policy::uniform(env.num_cells(), env.num_actions());
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rollout(&env, &pi, env.horizon(), &mut rng).unwrap()
        };
        let t = run(5);
        assert_eq!(t.records.len(), env.horizon());
        assert_eq!(
            t.total_cost,
            t.records.iter().map(|r| r.cost).sum::<f64>()
        );
        // {0,1} step costs make episode cost sums integral.
        assert_eq!(t.total_cost, t.total_cost.round());
        assert_eq!(run(5), run(5));

        // Horizon 1 equals a single step's sums.
        let t1 = run_horizon_one(&env);
        assert_eq!(t1.records.len(), 1);
        assert_eq!(t1.total_reward, t1.records[0].reward);

        // A hazard-free grid is always safe.
        let mut clean = demo_grid(0.3);
        clean.hazards.clear();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = rollout(&clean, &pi, clean.horizon(), &mut rng).unwrap();
        assert_eq!(t.total_cost, 0.0);
        assert!(t.is_safe(0.0));
    }

    fn run_horizon_one(env: &GridHazardEnv) -> Trajectory {
        let pi = Policy::uniform(env.num_cells(), env.num_actions());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        rollout(env, &pi, 1, &mut rng).unwrap()
    }

    #[test]
    fn point_mass_basics() {
        let env = PointMassEnv {
            dim: 2,
            damping: 0.5,
            dt: 0.1,
            horizon: 100,
            accel: 1.0,
            start: vec![-2.0, -2.0],
            target: vec![2.0, 2.0],
            hazard_center: vec![0.0, 0.0],
            hazard_radius: 0.8,
            pos_bound: 3.0,
            vel_bound: 2.0,
            bins_per_dim: 5,
        };
        env.validate().unwrap();
        assert_eq!(env.num_actions(), 9);
        assert_eq!(env.num_cells(), 625);

        // Zero action and zero velocity stays put.
        let state = env.reset();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zero_action = 4; // digits (1,1) -> (0,0)
        let outcome = env.step(&state, zero_action, &mut rng).unwrap();
        assert_eq!(outcome.next_state, state);
        assert_eq!(outcome.reward, 0.0);

        // Inside the hazard region the step cost is 1.
        let hazard_state = vec![0.0, 0.0, 0.0, 0.0];
        let outcome = env.step(&hazard_state, zero_action, &mut rng).unwrap();
        assert_eq!(outcome.cost, 1.0);

        // Invalid action errors.
        assert!(env.step(&state, 9, &mut rng).is_err());

        // State stays in the box under saturating control.
        let mut state = env.reset();
        for _ in 0..500 {
            state = env.step(&state, 8, &mut rng).unwrap().next_state;
        }
        for (v, (lo, hi)) in state.iter().zip(env.state_bounds()) {
            assert!(*v >= lo && *v <= hi);
        }
    }

    #[test]
    fn sweep_construction() {
        let family = EnvSpec::Grid(demo_grid(0.2));
        let sweep = SweepSpec {
            parameter: "slip".into(),
            nominal: 0.2,
            min: 0.0,
            max: 0.4,
            count: 5,
        };
        let points = make_sweep(&family, &sweep).unwrap();
        let values: Vec<f64> = points.iter().map(|p| p.value).collect();
        for (got, want) in values.iter().zip([0.0, 0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(
            points.iter().filter(|p| p.is_nominal).count(),
            1
        );
        assert!(points[2].is_nominal);
        // Symmetric about the nominal value.
        for (low, high) in values.iter().zip(values.iter().rev()) {
            assert!((low + high - 2.0 * sweep.nominal).abs() < 1e-12);
        }

        // count = 1 yields the nominal env only.
        let single = make_sweep(
            &family,
            &SweepSpec {
                count: 1,
                ..sweep.clone()
            },
        )
        .unwrap();
        assert_eq!(single.len(), 1);
        assert!(single[0].is_nominal);

        // Range excluding the nominal value is a config error.
        assert!(make_sweep(
            &family,
            &SweepSpec {
                nominal: 0.5,
                ..sweep.clone()
            }
        )
        .is_err());
        // Unknown parameter name is an error.
        assert!(matches!(
            make_sweep(
                &family,
                &SweepSpec {
                    parameter: "gravity".into(),
                    ..sweep
                }
            ),
            Err(EnvError::UnknownParameter(_))
        ));
    }

    #[test]
    fn more_slip_weakly_hurts_the_optimal_return() {
        // Greedy value iteration on the reward objective per slip level.
        let mut previous = f64::INFINITY;
        for slip in [0.0, 0.1, 0.2, 0.3, 0.4] {
            let cmdp = demo_grid(slip).build_tabular(0.95, 15.0).unwrap();
            let value = optimal_return(&cmdp);
            assert!(
                value <= previous + 1e-9,
                "slip {slip}: {value} > {previous}"
            );
            previous = value;
        }
    }

    fn optimal_return(cmdp: &TabularCmdp) -> f64 {
        let mut q = QTable::zeros(cmdp.num_states, cmdp.num_actions, ValueKind::Reward);
        loop {
            let mut next = q.clone();
            let mut delta: f64 = 0.0;
            for s in 0..cmdp.num_states {
                for a in 0..cmdp.num_actions {
                    let continuation: f64 = cmdp.transitions[s][a]
                        .iter()
                        .enumerate()
                        .map(|(ns, &p)| {
                            p * q.values[ns]
                                .iter()
                                .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
                        })
                        .sum();
                    let value = cmdp.rewards[s][a] + cmdp.gamma * continuation;
                    delta = delta.max((value - q.values[s][a]).abs());
                    next.values[s][a] = value;
                }
            }
            q = next;
            if delta < 1e-10 {
                break;
            }
        }
        let best_first: Vec<f64> = q
            .values
            .iter()
            .map(|row| row.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v)))
            .collect();
        cmdp.initial
            .iter()
            .zip(&best_first)
            .map(|(d, v)| d * v)
            .sum()
    }
}
