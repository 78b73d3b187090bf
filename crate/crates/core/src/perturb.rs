//! Generative distribution over transition models for continuous states.
//!
//! A latent variable x ~ U([-2e, 2e]^d) is interpreted as a per-coordinate
//! percentage change of an observed state transition:
//!
//! ```text
//! f_x(s, s') = s + (s' - s)(1 + x)     (per coordinate)
//! ```
//!
//! so the average magnitude of the percentage change is e. Each latent draw
//! defines one perturbed transition model; applying f_x to an observed
//! transition yields the corresponding next-state sample.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("invalid perturbation: {0}")]
    Invalid(String),
    #[error("state length {got} does not match dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// One observed environment transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub cost: f64,
    pub next_state: Vec<f64>,
}

/// Latent perturbation model: epsilon, state dimension, and an optional
/// state box the perturbed output is clipped into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPerturbation {
    pub epsilon: f64,
    pub dim: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl LatentPerturbation {
    pub fn new(
        epsilon: f64,
        dim: usize,
        bounds: Option<Vec<(f64, f64)>>,
    ) -> Result<Self, PerturbError> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(PerturbError::Invalid(format!("epsilon {epsilon}")));
        }
        if dim == 0 {
            return Err(PerturbError::Invalid("zero dimension".into()));
        }
        if let Some(ref b) = bounds {
            if b.len() != dim {
                return Err(PerturbError::LengthMismatch {
                    expected: dim,
                    got: b.len(),
                });
            }
            for &(lo, hi) in b {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(PerturbError::Invalid(format!("bounds ({lo}, {hi})")));
                }
            }
        }
        Ok(Self { epsilon, dim, bounds })
    }

    /// Draws x ~ U([-2e, 2e]^d). Epsilon zero short-circuits to the zero
    /// vector without consuming the RNG.
    pub fn sample_latent(&self, rng: &mut (impl Rng + ?Sized)) -> Vec<f64> {
        if self.epsilon == 0.0 {
            return vec![0.0; self.dim];
        }
        let half_width = 2.0 * self.epsilon;
        (0..self.dim)
            .map(|_| rng.gen_range(-half_width..half_width))
            .collect()
    }

    /// f_x(s, s') per coordinate, clipped into the state box when one is
    /// declared.
    pub fn perturb_next_state(
        &self,
        state: &[f64],
        next_state: &[f64],
        latent: &[f64],
    ) -> Result<Vec<f64>, PerturbError> {
        if state.len() != self.dim {
            return Err(PerturbError::LengthMismatch {
                expected: self.dim,
                got: state.len(),
            });
        }
        if next_state.len() != self.dim || latent.len() != self.dim {
            return Err(PerturbError::LengthMismatch {
                expected: self.dim,
                got: next_state.len().min(latent.len()),
            });
        }
        let mut out: Vec<f64> = state
            .iter()
            .zip(next_state)
            .zip(latent)
            .map(|((s, sn), x)| s + (sn - s) * (1.0 + x))
            .collect();
        if let Some(ref bounds) = self.bounds {
            for (v, &(lo, hi)) in out.iter_mut().zip(bounds) {
                *v = v.clamp(lo, hi);
            }
        }
        Ok(out)
    }

    /// n independent latent draws applied to one observed transition.
    pub fn expand_transition(
        &self,
        transition: &Transition,
        n: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Result<Vec<Vec<f64>>, PerturbError> {
        (0..n)
            .map(|_| {
                let latent = self.sample_latent(rng);
                self.perturb_next_state(&transition.state, &transition.next_state, &latent)
            })
            .collect()
    }
}
