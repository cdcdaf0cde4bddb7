//! Gradient-free optimizers for noisy, box-constrained, mixed
//! integer/continuous problems: mixed-variable SPSA and a particle swarm
//! baseline, plus replicated convergence comparison.

mod compare;
mod mspsa;
mod pso;

pub use compare::{compare_replicated, evaluation_grid, Comparison, ConvergenceCurve, OptimizerSpec, ReplicateOutcome};
pub use mspsa::{
    eval_point, gradient_estimate, perturbation_sizes, run_mspsa, GainSchedule, GradientSample,
    IterateRecord, MspsaConfig, MspsaResult, StopReason,
};
pub use pso::{run_pso, GenerationRecord, PsoConfig, PsoResult};

use rand::Rng;
use thiserror::Error;

/// A loss that may depend on a set of scenario seeds. Deterministic losses
/// simply ignore the seeds.
pub trait Objective: Sync {
    type Error: std::error::Error + Send + Sync + 'static;

    fn evaluate(&self, point: &[f64], seeds: &[u64]) -> Result<f64, Self::Error>;
}

/// Adapts a plain deterministic function.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    type Error = std::convert::Infallible;

    fn evaluate(&self, point: &[f64], _seeds: &[u64]) -> Result<f64, Self::Error> {
        Ok((self.0)(point))
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError<E: std::error::Error + 'static> {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("loss evaluation failed at iteration {k}, theta = {theta:?}: {source}")]
    Evaluation {
        k: usize,
        theta: Vec<f64>,
        #[source]
        source: E,
    },
}

/// Nearest point of the box (per-coordinate clip).
pub fn project(theta: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    theta
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
        .collect()
}

/// Independent symmetric Bernoulli ±1 draws.
pub fn perturbation<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> Vec<f64> {
    (0..dimension)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect()
}

/// Rounds the discrete coordinates half-up, leaving the rest unchanged.
pub fn round_discrete(theta: &[f64], discrete: &[bool]) -> Vec<f64> {
    theta
        .iter()
        .zip(discrete)
        .map(|(&x, &d)| {
            if d {
                (x + 0.5).floor()
            } else {
                x
            }
        })
        .collect()
}

pub(crate) fn validate_box<E: std::error::Error>(
    bounds: &[(f64, f64)],
    discrete: &[bool],
    initial: &[f64],
) -> Result<(), OptimizeError<E>> {
    if bounds.is_empty() {
        return Err(OptimizeError::InvalidConfig("bounds must be nonempty".into()));
    }
    if discrete.len() != bounds.len() || initial.len() != bounds.len() {
        return Err(OptimizeError::InvalidConfig(format!(
            "dimension mismatch: {} bounds, {} discrete flags, {} initial values",
            bounds.len(),
            discrete.len(),
            initial.len()
        )));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(OptimizeError::InvalidConfig(format!(
                "coordinate {i}: bounds [{lo}, {hi}] are not ordered and finite"
            )));
        }
    }
    if initial.iter().any(|x| !x.is_finite()) {
        return Err(OptimizeError::InvalidConfig("initial point must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn projection_examples() {
        let b = [(0.0, 10.0), (0.0, 1.0)];
        assert_eq!(project(&[3.0, 0.5], &b), vec![3.0, 0.5]);
        assert_eq!(project(&[12.0, 0.5], &b), vec![10.0, 0.5]);
        assert_eq!(project(&[-5.0, 0.5], &b), vec![0.0, 0.5]);
    }

    #[test]
    fn perturbation_support_mean_and_correlation() {
        let mut rng = stream_rng(5, Stream::Perturbation);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| perturbation(3, &mut rng)).collect();
        assert!(draws.iter().flatten().all(|&d| d == 1.0 || d == -1.0));
        for i in 0..3 {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.02, "coordinate {i} mean {mean}");
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            // unit variance, zero mean: correlation is the mean product
            let corr = draws.iter().map(|d| d[i] * d[j]).sum::<f64>() / n as f64;
            assert!(corr.abs() < 0.02, "corr({i},{j}) = {corr}");
        }
    }

    #[test]
    fn discrete_rounding_is_half_up() {
        let r = round_discrete(&[2.5, 2.5, 3.49, -0.7], &[true, false, true, true]);
        assert_eq!(r, vec![3.0, 2.5, 3.0, -1.0]);
    }
}
