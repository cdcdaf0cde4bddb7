//! Mixed-variable simultaneous perturbation stochastic approximation.
//!
//! Continuous coordinates follow standard SPSA. A discrete coordinate is
//! measured at the lattice midpoint `floor(θᵢ) + 0.5` with a fixed
//! perturbation of 0.5, so both measurement points are adjacent integers.
//! The working iterate stays continuous; rounding happens only when a point
//! is reported.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{perturbation, project, round_discrete, validate_box, Objective, OptimizeError};
use crate::rng::{derive_seed, stream_rng, tag, Stream};

/// Perturbation magnitude of a discrete coordinate.
const DISCRETE_HALF_STEP: f64 = 0.5;

/// Gain sequences `a_k = a / (k + 1 + A)^α` and `c_k = c / (k + 1)^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSchedule {
    pub a: f64,
    pub c: f64,
    #[serde(rename = "big_a")]
    pub big_a: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for GainSchedule {
    fn default() -> Self {
        GainSchedule {
            a: 0.25,
            c: 0.7,
            big_a: 500.0,
            alpha: 0.602,
            gamma: 0.101,
        }
    }
}

impl GainSchedule {
    pub fn a_k(&self, k: usize) -> f64 {
        self.a / (k as f64 + 1.0 + self.big_a).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }

    /// Hard errors for unusable gains; a warning when outside the usual
    /// convergence range 0 < γ < α ≤ 1.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(format!("gain a = {} must be >= 0", self.a));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(format!("gain c = {} must be > 0", self.c));
        }
        if self.big_a.is_nan() || self.big_a < 0.0 {
            return Err(format!("gain A = {} must be >= 0", self.big_a));
        }
        if !(self.alpha >= 0.0 && self.gamma >= 0.0) {
            return Err("gain exponents must be >= 0".into());
        }
        if !(0.0 < self.gamma && self.gamma < self.alpha && self.alpha <= 1.0) {
            log::warn!(
                "gain exponents alpha = {}, gamma = {} fall outside 0 < gamma < alpha <= 1",
                self.alpha,
                self.gamma
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspsaConfig {
    pub gains: GainSchedule,
    pub bounds: Vec<(f64, f64)>,
    pub discrete: Vec<bool>,
    pub initial: Vec<f64>,
    pub max_iterations: usize,
    /// Scenario seeds per loss measurement.
    pub replicates_per_eval: usize,
    pub seed: u64,
    /// Share scenario seeds between the two measurements of an iteration.
    pub common_random_numbers: bool,
    /// Relative best-so-far improvement below which the run counts as stalled.
    pub stall_tolerance: f64,
    /// Iterations over which stalling is judged; 0 disables early stopping.
    pub stall_window: usize,
    /// Also evaluate the loss at the rounded iterate every iteration.
    pub track_loss: bool,
}

impl MspsaConfig {
    /// A configuration with the default gains and no early stopping.
    pub fn new(bounds: Vec<(f64, f64)>, discrete: Vec<bool>, initial: Vec<f64>) -> Self {
        MspsaConfig {
            gains: GainSchedule::default(),
            bounds,
            discrete,
            initial,
            max_iterations: 500,
            replicates_per_eval: 1,
            seed: 0,
            common_random_numbers: true,
            stall_tolerance: 1e-6,
            stall_window: 50,
            track_loss: false,
        }
    }

    pub fn validate<E: std::error::Error>(&self) -> Result<(), OptimizeError<E>> {
        self.gains.validate().map_err(OptimizeError::InvalidConfig)?;
        validate_box(&self.bounds, &self.discrete, &self.initial)?;
        if self.replicates_per_eval == 0 {
            return Err(OptimizeError::InvalidConfig(
                "replicates_per_eval must be >= 1".into(),
            ));
        }
        if self.stall_tolerance.is_nan() || self.stall_tolerance < 0.0 {
            return Err(OptimizeError::InvalidConfig(
                "stall_tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Scenario seeds of the two measurements of iteration `k`.
    pub fn measurement_seeds(&self, k: usize) -> (Vec<u64>, Vec<u64>) {
        let plus_base = derive_seed(self.seed, tag::ITERATION, k as u64);
        let plus: Vec<u64> = (0..self.replicates_per_eval)
            .map(|j| derive_seed(plus_base, tag::SCENARIO, j as u64))
            .collect();
        if self.common_random_numbers {
            return (plus.clone(), plus);
        }
        let minus_base = derive_seed(self.seed, tag::MEASUREMENT_MINUS, k as u64);
        let minus = (0..self.replicates_per_eval)
            .map(|j| derive_seed(minus_base, tag::SCENARIO, j as u64))
            .collect();
        (plus, minus)
    }
}

/// Everything observed in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    /// Working (continuous) iterate before the update.
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub a_k: f64,
    pub c_k: f64,
    pub loss_plus: f64,
    pub loss_minus: f64,
    pub gradient_estimate: Vec<f64>,
    /// Loss at the rounded iterate, when tracking is on.
    pub loss_current: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspsaResult {
    /// Final iterate with discrete coordinates rounded.
    pub theta: Vec<f64>,
    /// Final working iterate.
    pub working: Vec<f64>,
    pub records: Vec<IterateRecord>,
    /// Loss measurements used by the algorithm (tracking excluded).
    pub evaluations: usize,
    pub stop: StopReason,
}

impl MspsaResult {
    /// `(evaluations used, rounded iterate)` after every iteration,
    /// starting with the initial point at zero evaluations.
    pub fn incumbents(&self, discrete: &[bool]) -> Vec<(usize, Vec<f64>)> {
        let mut out: Vec<(usize, Vec<f64>)> = self
            .records
            .iter()
            .map(|r| (2 * r.k, round_discrete(&r.theta, discrete)))
            .collect();
        out.push((self.evaluations, self.theta.clone()));
        out
    }
}

/// Point at which a working iterate is measured.
pub fn eval_point(theta: &[f64], discrete: &[bool]) -> Vec<f64> {
    theta
        .iter()
        .zip(discrete)
        .map(|(&x, &d)| if d { x.floor() + DISCRETE_HALF_STEP } else { x })
        .collect()
}

/// Perturbation magnitudes `C_k`: 0.5 for discrete coordinates, `c_k`
/// otherwise.
pub fn perturbation_sizes(discrete: &[bool], c_k: f64) -> Vec<f64> {
    discrete
        .iter()
        .map(|&d| if d { DISCRETE_HALF_STEP } else { c_k })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub gradient: Vec<f64>,
    pub loss_plus: f64,
    pub loss_minus: f64,
}

/// Simultaneous-perturbation gradient estimate
/// `(y⁺ − y⁻) / (2 C ⊙ Δ)` around `eval_point(theta)`. Both measurement
/// points are projected into `bounds`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_estimate<O: Objective>(
    objective: &O,
    theta: &[f64],
    delta: &[f64],
    sizes: &[f64],
    discrete: &[bool],
    bounds: &[(f64, f64)],
    seeds_plus: &[u64],
    seeds_minus: &[u64],
) -> Result<GradientSample, O::Error> {
    let center = eval_point(theta, discrete);
    let shifted = |sign: f64| -> Vec<f64> {
        let raw: Vec<f64> = center
            .iter()
            .zip(sizes.iter().zip(delta))
            .map(|(&x, (&c, &d))| x + sign * c * d)
            .collect();
        project(&raw, bounds)
    };
    let loss_plus = objective.evaluate(&shifted(1.0), seeds_plus)?;
    let loss_minus = objective.evaluate(&shifted(-1.0), seeds_minus)?;
    let diff = loss_plus - loss_minus;
    let gradient = sizes
        .iter()
        .zip(delta)
        .map(|(&c, &d)| diff / (2.0 * c * d))
        .collect();
    Ok(GradientSample {
        gradient,
        loss_plus,
        loss_minus,
    })
}

/// Runs projected MSPSA from `config.initial`.
pub fn run_mspsa<O: Objective>(
    config: &MspsaConfig,
    objective: &O,
) -> Result<MspsaResult, OptimizeError<O::Error>> {
    config.validate()?;
    let dim = config.bounds.len();
    let mut rng: ChaCha8Rng = stream_rng(config.seed, Stream::Perturbation);
    let mut theta = project(&config.initial, &config.bounds);
    let mut records = Vec::with_capacity(config.max_iterations);
    let mut best_history: Vec<f64> = Vec::with_capacity(config.max_iterations);
    let mut stop = StopReason::Budget;

    for k in 0..config.max_iterations {
        let a_k = config.gains.a_k(k);
        let c_k = config.gains.c_k(k);
        let delta = perturbation(dim, &mut rng);
        let sizes = perturbation_sizes(&config.discrete, c_k);
        let (seeds_plus, seeds_minus) = config.measurement_seeds(k);

        let wrap = |source| OptimizeError::Evaluation {
            k,
            theta: theta.clone(),
            source,
        };
        let sample = gradient_estimate(
            objective,
            &theta,
            &delta,
            &sizes,
            &config.discrete,
            &config.bounds,
            &seeds_plus,
            &seeds_minus,
        )
        .map_err(wrap)?;

        let loss_current = if config.track_loss {
            let here = round_discrete(&theta, &config.discrete);
            Some(objective.evaluate(&here, &seeds_plus).map_err(wrap)?)
        } else {
            None
        };

        let next: Vec<f64> = theta
            .iter()
            .zip(&sample.gradient)
            .map(|(&x, &g)| x - a_k * g)
            .collect();
        let next = project(&next, &config.bounds);

        let observed = loss_current.unwrap_or(0.5 * (sample.loss_plus + sample.loss_minus));
        let best = best_history.last().map_or(observed, |&b: &f64| b.min(observed));
        best_history.push(best);

        records.push(IterateRecord {
            k,
            theta: std::mem::replace(&mut theta, next),
            delta,
            a_k,
            c_k,
            loss_plus: sample.loss_plus,
            loss_minus: sample.loss_minus,
            gradient_estimate: sample.gradient,
            loss_current,
        });

        let w = config.stall_window;
        if w > 0 && best_history.len() > w {
            let then = best_history[best_history.len() - 1 - w];
            let improvement = then - best;
            if improvement < config.stall_tolerance * then.abs() {
                stop = StopReason::Stalled;
                break;
            }
        }
    }

    let evaluations = 2 * records.len();
    Ok(MspsaResult {
        theta: round_discrete(&theta, &config.discrete),
        working: theta,
        records,
        evaluations,
        stop,
    })
}
