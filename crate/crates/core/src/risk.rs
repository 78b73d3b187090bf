//! Coherent distortion risk measures on finite-support random variables.
//!
//! A distortion risk measure is defined by a non-decreasing function
//! g: [0,1] -> [0,1] with g(0) = 0 and g(1) = 1, applied through the
//! quantile integral
//!
//! ```text
//! rho(Z) = ∫_0^1 F_Z^{-1}(u) d g~(u),    g~(u) = 1 - g(1 - u),
//! ```
//!
//! which for a finite-support cost variable reduces to a Choquet sum over
//! sorted atoms. The measure is coherent iff g is concave; all three kinds
//! implemented here (expectation, CVaR, Wang transform) are concave.
//!
//! Reward variables are handled through the sign identity
//! `rho+(Z) = -rho(-Z)`; no separate distortion function is stored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("distortion argument {0} outside [0,1]")]
    DomainError(f64),
    #[error("invalid risk parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid random variable: {0}")]
    InvalidRv(String),
    #[error("empty sample sequence")]
    EmptySamples,
    #[error("atom count {0} exceeds oracle cap of {1}")]
    TooManyAtoms(usize, usize),
}

/// A coherent distortion risk measure identified by its distortion function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionSpec {
    /// g(u) = u. Risk-neutral; recovers the mean.
    Expectation,
    /// g(u) = min(u / alpha, 1). Cost-side CVaR is the mean of the worst
    /// alpha-tail. Requires alpha in (0, 1].
    Cvar { alpha: f64 },
    /// g(u) = Phi(Phi^{-1}(u) + eta) with Phi the standard Normal CDF.
    /// Requires eta >= 0; eta = 0 recovers the expectation.
    Wang { eta: f64 },
}

/// Which side of the sign convention a random variable lives on.
///
/// `Cost`: lower is better, rho applied directly. `Reward`: higher is
/// better, evaluated as -rho(-Z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskSide {
    Cost,
    Reward,
}

impl DistortionSpec {
    pub fn validate(&self) -> Result<(), RiskError> {
        match *self {
            DistortionSpec::Expectation => Ok(()),
            DistortionSpec::Cvar { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(RiskError::InvalidParameter(format!(
                        "CVaR alpha must be in (0,1], got {alpha}"
                    )))
                }
            }
            DistortionSpec::Wang { eta } => {
                if eta >= 0.0 && eta.is_finite() {
                    Ok(())
                } else {
                    Err(RiskError::InvalidParameter(format!(
                        "Wang eta must be >= 0, got {eta}"
                    )))
                }
            }
        }
    }

    /// Evaluates the distortion function g(u).
    pub fn distortion(&self, u: f64) -> Result<f64, RiskError> {
        self.validate()?;
        if !(0.0..=1.0).contains(&u) {
            return Err(RiskError::DomainError(u));
        }
        Ok(self.distortion_unchecked(u))
    }

    /// g(u) without argument validation. Callers guarantee u in [0,1] and a
    /// valid parameter.
    fn distortion_unchecked(&self, u: f64) -> f64 {
        match *self {
            DistortionSpec::Expectation => u,
            DistortionSpec::Cvar { alpha } => (u / alpha).min(1.0),
            DistortionSpec::Wang { eta } => {
                // Endpoints short-circuit to avoid +-inf from Phi^{-1}.
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    std_normal_cdf(std_normal_quantile(u) + eta)
                }
            }
        }
    }

    /// The dual distortion g~(u) = 1 - g(1 - u).
    fn dual_distortion(&self, u: f64) -> f64 {
        1.0 - self.distortion_unchecked(1.0 - u)
    }
}

/// Standard Normal CDF via the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard Normal quantile. Acklam's rational approximation refined by one
/// Halley step against the CDF above; relative error well below 1e-10 on
/// (0, 1).
pub fn std_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0,1)");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley refinement.
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Finite-support random variable as (value, probability) atoms.
///
/// Atoms need not be sorted or distinct; probabilities must be positive and
/// sum to 1 within 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRv {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteRv {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, RiskError> {
        if atoms.is_empty() {
            return Err(RiskError::InvalidRv("no atoms".into()));
        }
        let mut total = 0.0;
        for &(value, prob) in &atoms {
            if !value.is_finite() {
                return Err(RiskError::InvalidRv(format!("non-finite value {value}")));
            }
            if !prob.is_finite() || prob <= 0.0 {
                return Err(RiskError::InvalidRv(format!("non-positive prob {prob}")));
            }
            total += prob;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(RiskError::InvalidRv(format!("probs sum to {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn degenerate(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(z, p)| z * p).sum()
    }

    /// The variable -Z on the same sample space.
    pub fn negate(&self) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(z, p)| (-z, p)).collect(),
        }
    }
}

/// Exact evaluation of the distortion risk measure by the Choquet sum.
///
/// Cost side: atoms are sorted ascending and weighted by increments of the
/// dual distortion of the cumulative probabilities. Reward side returns
/// `-exact_risk(-Z, Cost)`. The expectation spec returns the mean directly
/// on both sides.
pub fn exact_risk(
    rv: &DiscreteRv,
    spec: DistortionSpec,
    side: RiskSide,
) -> Result<f64, RiskError> {
    spec.validate()?;
    if let DistortionSpec::Expectation = spec {
        return Ok(rv.mean());
    }
    if side == RiskSide::Reward {
        return Ok(-exact_risk(&rv.negate(), spec, RiskSide::Cost)?);
    }

    let mut atoms = rv.atoms.clone();
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let last = atoms.len() - 1;
    let mut cumulative = 0.0;
    let mut prev_dual = 0.0;
    let mut total = 0.0;
    for (i, &(value, prob)) in atoms.iter().enumerate() {
        cumulative += prob;
        // Pin the final cumulative to exactly 1 so the weights telescope.
        let f = if i == last { 1.0 } else { cumulative.min(1.0) };
        let dual = spec.dual_distortion(f);
        total += value * (dual - prev_dual);
        prev_dual = dual;
    }
    Ok(total)
}

/// Weights for the sample-based (Jones) estimator: w_i = g(i/n) - g((i-1)/n).
///
/// Non-negative, sum to 1, and non-increasing for concave g.
pub fn sample_weights(n: usize, spec: DistortionSpec) -> Result<Vec<f64>, RiskError> {
    spec.validate()?;
    if n == 0 {
        return Err(RiskError::InvalidParameter("sample count n must be >= 1".into()));
    }
    let mut weights = Vec::with_capacity(n);
    let mut prev = 0.0;
    for i in 1..=n {
        let g = spec.distortion_unchecked(i as f64 / n as f64);
        weights.push((g - prev).max(0.0));
        prev = g;
    }
    Ok(weights)
}

/// Sample-based risk estimate: sorts the values (ascending for Reward,
/// descending for Cost; ties keep input order) and dots them with
/// [`sample_weights`].
pub fn weighted_estimate(
    values: &[f64],
    spec: DistortionSpec,
    side: RiskSide,
) -> Result<f64, RiskError> {
    if values.is_empty() {
        return Err(RiskError::EmptySamples);
    }
    let weights = sample_weights(values.len(), spec)?;
    let mut sorted = values.to_vec();
    match side {
        RiskSide::Reward => sorted.sort_by(|a, b| a.partial_cmp(b).unwrap()),
        RiskSide::Cost => sorted.sort_by(|a, b| b.partial_cmp(a).unwrap()),
    }
    Ok(sorted.iter().zip(&weights).map(|(v, w)| v * w).sum())
}

const ORACLE_ATOM_CAP: usize = 12;
// Exhaustive extreme-point enumeration is affordable up to 8! permutations;
// beyond that the comonotone vertex is used with a subset feasibility check.
const PERMUTATION_CAP: usize = 8;

/// Dual-representation oracle: optimizes the expected value over the core of
/// the distortion capacity, `{beta >= 0, sum beta = 1, beta(S) <= g(mu(S))
/// for every atom subset S}`.
///
/// Cost side takes the supremum, Reward side the infimum. For <= 8 atoms the
/// optimum is found by enumerating all permutation (greedy) vertices of the
/// core; for 9..=12 atoms the comonotone vertex is used after verifying core
/// feasibility against all 2^n subsets. Must agree with [`exact_risk`] to
/// 1e-9.
pub fn capacity_core_oracle(
    rv: &DiscreteRv,
    spec: DistortionSpec,
    side: RiskSide,
) -> Result<f64, RiskError> {
    spec.validate()?;
    let n = rv.atoms.len();
    if n > ORACLE_ATOM_CAP {
        return Err(RiskError::TooManyAtoms(n, ORACLE_ATOM_CAP));
    }
    if side == RiskSide::Reward {
        return Ok(-capacity_core_oracle(&rv.negate(), spec, RiskSide::Cost)?);
    }

    if n <= PERMUTATION_CAP {
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::NEG_INFINITY;
        permute(&mut order, 0, &mut |perm| {
            best = best.max(greedy_vertex_value(rv, spec, perm));
        });
        Ok(best)
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| rv.atoms[j].0.partial_cmp(&rv.atoms[i].0).unwrap());
        let beta = greedy_vertex(rv, spec, &order);
        check_core_feasible(rv, spec, &beta);
        Ok(beta
            .iter()
            .zip(&rv.atoms)
            .map(|(b, &(z, _))| b * z)
            .sum())
    }
}

/// Expected value at the greedy core vertex induced by a visit order.
fn greedy_vertex_value(rv: &DiscreteRv, spec: DistortionSpec, order: &[usize]) -> f64 {
    let mut cumulative = 0.0;
    let mut prev_g = 0.0;
    let mut value = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumulative += rv.atoms[i].1;
        let f = if k == order.len() - 1 {
            1.0
        } else {
            cumulative.min(1.0)
        };
        let g = spec.distortion_unchecked(f);
        value += rv.atoms[i].0 * (g - prev_g);
        prev_g = g;
    }
    value
}

fn greedy_vertex(rv: &DiscreteRv, spec: DistortionSpec, order: &[usize]) -> Vec<f64> {
    let mut beta = vec![0.0; rv.atoms.len()];
    let mut cumulative = 0.0;
    let mut prev_g = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumulative += rv.atoms[i].1;
        let f = if k == order.len() - 1 {
            1.0
        } else {
            cumulative.min(1.0)
        };
        let g = spec.distortion_unchecked(f);
        beta[i] = g - prev_g;
        prev_g = g;
    }
    beta
}

/// Asserts `beta(S) <= g(mu(S))` over every atom subset.
fn check_core_feasible(rv: &DiscreteRv, spec: DistortionSpec, beta: &[f64]) {
    let n = rv.atoms.len();
    for mask in 1u32..(1 << n) {
        let mut beta_mass = 0.0;
        let mut mu_mass = 0.0;
        for (i, (b, atom)) in beta.iter().zip(&rv.atoms).enumerate() {
            if mask & (1 << i) != 0 {
                beta_mass += b;
                mu_mass += atom.1;
            }
        }
        let cap = spec.distortion_unchecked(mu_mass.min(1.0));
        debug_assert!(
            beta_mass <= cap + 1e-9,
            "core vertex infeasible on subset {mask:b}: {beta_mass} > {cap}"
        );
    }
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wang75() -> DistortionSpec {
        DistortionSpec::Wang { eta: 0.75 }
    }

    pub(crate) fn random_rv(rng: &mut impl Rng, max_atoms: usize) -> DiscreteRv {
        let n = rng.gen_range(1..=max_atoms);
        let mut probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        // Renormalize exactly: absorb rounding into the last atom.
        let adjust: f64 = 1.0 - probs.iter().sum::<f64>();
        *probs.last_mut().unwrap() += adjust;
        let atoms = probs
            .into_iter()
            .map(|p| (rng.gen_range(-10.0..10.0), p))
            .collect();
        DiscreteRv::new(atoms).unwrap()
    }

    #[test]
    fn distortion_identity_and_endpoints() {
        let specs = [
            DistortionSpec::Expectation,
            DistortionSpec::Cvar { alpha: 0.2 },
            wang75(),
        ];
        for spec in specs {
            assert_eq!(spec.distortion(0.0).unwrap(), 0.0);
            assert_eq!(spec.distortion(1.0).unwrap(), 1.0);
        }
        assert_eq!(
            DistortionSpec::Expectation.distortion(0.3).unwrap(),
            0.3
        );
    }

    #[test]
    fn wang_distortion_matches_normal_cdf() {
        // g(0.5) = Phi(0.75)
        let got = wang75().distortion(0.5).unwrap();
        assert!((got - 0.7733726476231317).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn cvar_distortion_saturates() {
        let spec = DistortionSpec::Cvar { alpha: 0.2 };
        assert!((spec.distortion(0.1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(spec.distortion(0.3).unwrap(), 1.0);
    }

    #[test]
    fn distortion_domain_and_parameter_errors() {
        assert!(matches!(
            DistortionSpec::Expectation.distortion(1.5),
            Err(RiskError::DomainError(_))
        ));
        assert!(matches!(
            DistortionSpec::Cvar { alpha: 0.0 }.distortion(0.5),
            Err(RiskError::InvalidParameter(_))
        ));
        assert!(matches!(
            DistortionSpec::Cvar { alpha: 1.5 }.distortion(0.5),
            Err(RiskError::InvalidParameter(_))
        ));
        assert!(matches!(
            DistortionSpec::Wang { eta: -0.1 }.distortion(0.5),
            Err(RiskError::InvalidParameter(_))
        ));
    }

    #[test]
    fn distortion_monotone_and_midpoint_concave_on_grid() {
        let specs = [
            DistortionSpec::Expectation,
            DistortionSpec::Cvar { alpha: 0.25 },
            DistortionSpec::Cvar { alpha: 0.7 },
            DistortionSpec::Wang { eta: 0.25 },
            wang75(),
            DistortionSpec::Wang { eta: 1.5 },
        ];
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        for spec in specs {
            let mut prev = 0.0;
            for &u in &grid {
                let g = spec.distortion(u).unwrap();
                assert!(g >= prev - 1e-12, "{spec:?} not monotone at {u}");
                prev = g;
            }
            for pair in grid.windows(2) {
                let mid = spec.distortion((pair[0] + pair[1]) / 2.0).unwrap();
                let chord = (spec.distortion(pair[0]).unwrap()
                    + spec.distortion(pair[1]).unwrap())
                    / 2.0;
                assert!(mid >= chord - 1e-12, "{spec:?} not midpoint-concave");
            }
        }
    }

    #[test]
    fn normal_quantile_round_trips() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-12, "p={p}");
        }
        // Tail checks against high-precision reference values.
        assert!((std_normal_quantile(1e-6) + 4.753424308822899).abs() < 1e-9);
        assert!((std_normal_quantile(0.975) - 1.9599639845400545).abs() < 1e-9);
    }

    #[test]
    fn exact_risk_degenerate_and_mean() {
        let rv = DiscreteRv::degenerate(5.0);
        for spec in [DistortionSpec::Expectation, DistortionSpec::Cvar { alpha: 0.5 }, wang75()] {
            assert!((exact_risk(&rv, spec, RiskSide::Cost).unwrap() - 5.0).abs() < 1e-12);
        }
        let rv = DiscreteRv::new(vec![(0.0, 0.5), (10.0, 0.5)]).unwrap();
        assert_eq!(
            exact_risk(&rv, DistortionSpec::Expectation, RiskSide::Cost).unwrap(),
            5.0
        );
        assert_eq!(
            exact_risk(&rv, DistortionSpec::Expectation, RiskSide::Reward).unwrap(),
            5.0
        );
    }

    #[test]
    fn exact_risk_two_atom_cvar_and_wang() {
        let rv = DiscreteRv::new(vec![(0.0, 0.5), (10.0, 0.5)]).unwrap();
        let cvar = exact_risk(&rv, DistortionSpec::Cvar { alpha: 0.5 }, RiskSide::Cost).unwrap();
        assert!((cvar - 10.0).abs() < 1e-12);
        // Two-atom closed form: 10 * g(0.5).
        let wang = exact_risk(&rv, wang75(), RiskSide::Cost).unwrap();
        assert!((wang - 10.0 * wang75().distortion(0.5).unwrap()).abs() < 1e-12);
        assert!((wang - 7.733726476231317).abs() < 1e-9);
    }

    #[test]
    fn invalid_rv_rejected() {
        assert!(DiscreteRv::new(vec![]).is_err());
        assert!(DiscreteRv::new(vec![(1.0, 0.5)]).is_err());
        assert!(DiscreteRv::new(vec![(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(DiscreteRv::new(vec![(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn sample_weights_known_tables() {
        let w = sample_weights(5, DistortionSpec::Expectation).unwrap();
        for wi in &w {
            assert!((wi - 0.2).abs() < 1e-15);
        }

        let w = sample_weights(5, wang75()).unwrap();
        // Frozen from the erf-based oracle: w_i = g(i/5) - g((i-1)/5).
        let expected = [0.46349949, 0.22678359, 0.15187021, 0.10211179, 0.05573492];
        for (wi, ei) in w.iter().zip(expected) {
            assert!((wi - ei).abs() < 1e-3, "{w:?}");
        }

        let w = sample_weights(5, DistortionSpec::Cvar { alpha: 0.2 }).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        for wi in &w[1..] {
            assert!(wi.abs() < 1e-12);
        }

        assert!(sample_weights(0, DistortionSpec::Expectation).is_err());
    }

    #[test]
    fn sample_weights_sum_and_monotone() {
        let specs = [
            DistortionSpec::Expectation,
            DistortionSpec::Cvar { alpha: 0.3 },
            wang75(),
        ];
        for spec in specs {
            for n in [1, 2, 7, 50] {
                let w = sample_weights(n, spec).unwrap();
                let total: f64 = w.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                for pair in w.windows(2) {
                    assert!(pair[1] <= pair[0] + 1e-12, "not non-increasing: {w:?}");
                }
            }
        }
    }

    #[test]
    fn weighted_estimate_examples() {
        let est = weighted_estimate(&[3.0, 1.0, 2.0], DistortionSpec::Expectation, RiskSide::Cost)
            .unwrap();
        assert!((est - 2.0).abs() < 1e-15);

        let spec = DistortionSpec::Cvar { alpha: 0.5 };
        let cost = weighted_estimate(&[0.0, 10.0], spec, RiskSide::Cost).unwrap();
        assert!((cost - 10.0).abs() < 1e-12);
        let reward = weighted_estimate(&[0.0, 10.0], spec, RiskSide::Reward).unwrap();
        assert!(reward.abs() < 1e-12);

        assert!(matches!(
            weighted_estimate(&[], DistortionSpec::Expectation, RiskSide::Cost),
            Err(RiskError::EmptySamples)
        ));
    }

    #[test]
    fn weighted_estimate_converges_to_exact_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rv = DiscreteRv::new(vec![(0.0, 0.3), (2.0, 0.4), (9.0, 0.3)]).unwrap();
        let m = 100_000;
        let cumulative: Vec<f64> = rv
            .atoms()
            .iter()
            .scan(0.0, |acc, &(_, p)| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let samples: Vec<f64> = (0..m)
            .map(|_| {
                let u: f64 = rng.gen();
                let idx = cumulative.iter().position(|&c| u <= c).unwrap_or(2);
                rv.atoms()[idx].0
            })
            .collect();
        let std = {
            let mean = rv.mean();
            rv.atoms()
                .iter()
                .map(|&(z, p)| p * (z - mean).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let range = 9.0;
        let bound = 5.0 * std / (m as f64).sqrt() + 2.0 / m as f64 * range;
        for spec in [DistortionSpec::Expectation, DistortionSpec::Cvar { alpha: 0.25 }, wang75()] {
            for side in [RiskSide::Cost, RiskSide::Reward] {
                let est = weighted_estimate(&samples, spec, side).unwrap();
                let exact = exact_risk(&rv, spec, side).unwrap();
                assert!(
                    (est - exact).abs() <= bound,
                    "{spec:?} {side:?}: |{est} - {exact}| > {bound}"
                );
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let rv = DiscreteRv::new(vec![(0.0, 0.5), (10.0, 0.5)]).unwrap();
        let got = capacity_core_oracle(&rv, wang75(), RiskSide::Cost).unwrap();
        assert!((got - 7.733726476231317).abs() < 1e-9);
        let exact = exact_risk(&rv, wang75(), RiskSide::Cost).unwrap();
        assert!((got - exact).abs() < 1e-9);

        let rv = DiscreteRv::new(vec![(0.0, 0.5), (10.0, 0.5)]).unwrap();
        let cvar = capacity_core_oracle(&rv, DistortionSpec::Cvar { alpha: 0.5 }, RiskSide::Cost)
            .unwrap();
        assert!((cvar - 10.0).abs() < 1e-9);

        let single = DiscreteRv::degenerate(-3.25);
        for spec in [DistortionSpec::Expectation, DistortionSpec::Cvar { alpha: 0.1 }, wang75()] {
            assert!(
                (capacity_core_oracle(&single, spec, RiskSide::Cost).unwrap() + 3.25).abs()
                    < 1e-12
            );
        }

        let third = 1.0 / 3.0;
        let uniform =
            DiscreteRv::new(vec![(1.0, third), (2.0, third), (3.0, 1.0 - 2.0 * third)]).unwrap();
        let got =
            capacity_core_oracle(&uniform, DistortionSpec::Expectation, RiskSide::Cost).unwrap();
        assert!((got - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_atom_cap() {
        let n = 13;
        let atoms: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, 1.0 / n as f64)).collect();
        let mut atoms = atoms;
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        atoms.last_mut().unwrap().1 += 1.0 - total;
        let rv = DiscreteRv::new(atoms).unwrap();
        assert!(matches!(
            capacity_core_oracle(&rv, wang75(), RiskSide::Cost),
            Err(RiskError::TooManyAtoms(13, 12))
        ));
    }

    #[test]
    fn oracle_matches_exact_risk_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let specs = [
            DistortionSpec::Expectation,
            DistortionSpec::Cvar { alpha: 0.25 },
            DistortionSpec::Cvar { alpha: 0.5 },
            wang75(),
            DistortionSpec::Wang { eta: 1.5 },
        ];
        for _ in 0..200 {
            let rv = random_rv(&mut rng, 7);
            for spec in specs {
                for side in [RiskSide::Cost, RiskSide::Reward] {
                    let oracle = capacity_core_oracle(&rv, spec, side).unwrap();
                    let exact = exact_risk(&rv, spec, side).unwrap();
                    assert!(
                        (oracle - exact).abs() < 1e-9,
                        "{spec:?} {side:?}: {oracle} vs {exact} on {rv:?}"
                    );
                }
            }
        }
        // A few larger instances exercise the greedy + subset-check path.
        for _ in 0..10 {
            let mut probs: Vec<f64> = (0..10).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = probs.iter().sum();
            for p in &mut probs {
                *p /= total;
            }
            let adjust = 1.0 - probs.iter().sum::<f64>();
            *probs.last_mut().unwrap() += adjust;
            let atoms = probs
                .into_iter()
                .map(|p| (rng.gen_range(-5.0..5.0), p))
                .collect();
            let rv = DiscreteRv::new(atoms).unwrap();
            for spec in specs {
                let oracle = capacity_core_oracle(&rv, spec, RiskSide::Cost).unwrap();
                let exact = exact_risk(&rv, spec, RiskSide::Cost).unwrap();
                assert!((oracle - exact).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reward_is_negated_cost_of_negation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rv = random_rv(&mut rng, 8);
            for spec in [DistortionSpec::Expectation, DistortionSpec::Cvar { alpha: 0.3 }, wang75()]
            {
                let reward = exact_risk(&rv, spec, RiskSide::Reward).unwrap();
                let negated = exact_risk(&rv.negate(), spec, RiskSide::Cost).unwrap();
                assert!((reward + negated).abs() < 1e-12);
            }
        }
    }
}
