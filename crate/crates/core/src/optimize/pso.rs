//! Global-best particle swarm baseline for mixed problems.
//!
//! Particles move continuously; discrete coordinates are rounded only when a
//! position is evaluated. Positions leaving the box are clipped and the
//! offending velocity component is zeroed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{project, round_discrete, validate_box, Objective, OptimizeError};
use crate::rng::{derive_seed, stream_rng, tag, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub c1: f64,
    pub c2: f64,
    pub w: f64,
    pub population: usize,
    /// Initial velocities are uniform on this interval in every coordinate.
    pub v0_range: (f64, f64),
    pub bounds: Vec<(f64, f64)>,
    pub discrete: Vec<bool>,
    pub initial: Vec<f64>,
    /// Total loss evaluations, the initial swarm included. Only whole
    /// generations are run.
    pub max_evaluations: usize,
    pub replicates_per_eval: usize,
    pub seed: u64,
    /// Per-coordinate speed limit as a fraction of the box width.
    pub v_max_fraction: Option<f64>,
    /// Particles other than the first start uniformly within this fraction of
    /// the box width around `initial`. Zero starts every particle at `initial`.
    pub init_spread: f64,
}

impl PsoConfig {
    pub fn new(bounds: Vec<(f64, f64)>, discrete: Vec<bool>, initial: Vec<f64>) -> Self {
        PsoConfig {
            c1: 2.3,
            c2: 2.3,
            w: 1.0,
            population: 20,
            v0_range: (-1.0, 1.0),
            bounds,
            discrete,
            initial,
            max_evaluations: 1000,
            replicates_per_eval: 1,
            seed: 0,
            v_max_fraction: None,
            init_spread: 0.0,
        }
    }

    pub fn validate<E: std::error::Error>(&self) -> Result<(), OptimizeError<E>> {
        validate_box(&self.bounds, &self.discrete, &self.initial)?;
        let bad = |msg: &str| Err(OptimizeError::InvalidConfig(msg.to_string()));
        if self.population < 2 {
            return bad("population must be >= 2");
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.w >= 0.0) {
            return bad("c1, c2 and w must be >= 0");
        }
        let (lo, hi) = self.v0_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("v0_range must be finite and ordered");
        }
        if self.replicates_per_eval == 0 {
            return bad("replicates_per_eval must be >= 1");
        }
        if let Some(f) = self.v_max_fraction {
            if !(f > 0.0 && f.is_finite()) {
                return bad("v_max_fraction must be > 0");
            }
        }
        if !(self.init_spread >= 0.0 && self.init_spread.is_finite()) {
            return bad("init_spread must be >= 0");
        }
        Ok(())
    }

    /// Scenario seeds shared by every particle of generation `g`.
    pub fn generation_seeds(&self, g: usize) -> Vec<u64> {
        let base = derive_seed(self.seed, tag::GENERATION, g as u64);
        (0..self.replicates_per_eval)
            .map(|j| derive_seed(base, tag::SCENARIO, j as u64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Cumulative evaluations after this generation.
    pub evaluations: usize,
    pub gbest_loss: f64,
    /// Global best with discrete coordinates rounded.
    pub gbest: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub theta: Vec<f64>,
    pub best_loss: Option<f64>,
    pub records: Vec<GenerationRecord>,
    pub evaluations: usize,
}

impl PsoResult {
    /// `(evaluations used, global best)` after every generation, starting
    /// with the initial point at zero evaluations.
    pub fn incumbents(&self, initial: &[f64], discrete: &[bool]) -> Vec<(usize, Vec<f64>)> {
        std::iter::once((0, round_discrete(initial, discrete)))
            .chain(self.records.iter().map(|r| (r.evaluations, r.gbest.clone())))
            .collect()
    }
}

pub fn run_pso<O: Objective>(
    config: &PsoConfig,
    objective: &O,
) -> Result<PsoResult, OptimizeError<O::Error>> {
    config.validate()?;
    let dim = config.bounds.len();
    let m = config.population;
    let widths: Vec<f64> = config.bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let start = project(&config.initial, &config.bounds);

    if config.max_evaluations < m {
        return Ok(PsoResult {
            theta: round_discrete(&start, &config.discrete),
            best_loss: None,
            records: Vec::new(),
            evaluations: 0,
        });
    }

    let mut rng = stream_rng(config.seed, Stream::Swarm);
    let mut positions: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            if i == 0 || config.init_spread == 0.0 {
                return start.clone();
            }
            let raw: Vec<f64> = start
                .iter()
                .zip(&widths)
                .map(|(&x, &w)| x + config.init_spread * w * (rng.random::<f64>() - 0.5))
                .collect();
            project(&raw, &config.bounds)
        })
        .collect();
    let (v_lo, v_hi) = config.v0_range;
    let mut velocities: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..dim)
                .map(|_| v_lo + (v_hi - v_lo) * rng.random::<f64>())
                .collect()
        })
        .collect();

    let evaluate_swarm = |positions: &[Vec<f64>], g: usize| -> Result<Vec<f64>, OptimizeError<O::Error>> {
        let seeds = config.generation_seeds(g);
        positions
            .iter()
            .map(|x| {
                let point = round_discrete(x, &config.discrete);
                objective
                    .evaluate(&point, &seeds)
                    .map_err(|source| OptimizeError::Evaluation {
                        k: g,
                        theta: x.clone(),
                        source,
                    })
            })
            .collect()
    };

    let losses = evaluate_swarm(&positions, 0)?;
    let mut pbest = positions.clone();
    let mut pbest_loss = losses;
    let mut g_idx = argmin(&pbest_loss);
    let mut gbest = pbest[g_idx].clone();
    let mut gbest_loss = pbest_loss[g_idx];
    let mut evaluations = m;
    let mut records = vec![GenerationRecord {
        generation: 0,
        evaluations,
        gbest_loss,
        gbest: round_discrete(&gbest, &config.discrete),
    }];

    let mut generation = 0;
    while evaluations + m <= config.max_evaluations {
        generation += 1;
        for i in 0..m {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let mut v = config.w * velocities[i][d]
                    + config.c1 * r1 * (pbest[i][d] - positions[i][d])
                    + config.c2 * r2 * (gbest[d] - positions[i][d]);
                if let Some(f) = config.v_max_fraction {
                    let cap = f * widths[d];
                    v = v.clamp(-cap, cap);
                }
                let (lo, hi) = config.bounds[d];
                let x = positions[i][d] + v;
                if x < lo || x > hi {
                    positions[i][d] = x.clamp(lo, hi);
                    velocities[i][d] = 0.0;
                } else {
                    positions[i][d] = x;
                    velocities[i][d] = v;
                }
            }
        }
        let losses = evaluate_swarm(&positions, generation)?;
        evaluations += m;
        for (i, &loss) in losses.iter().enumerate() {
            if loss < pbest_loss[i] {
                pbest_loss[i] = loss;
                pbest[i] = positions[i].clone();
            }
        }
        g_idx = argmin(&pbest_loss);
        if pbest_loss[g_idx] < gbest_loss {
            gbest_loss = pbest_loss[g_idx];
            gbest = pbest[g_idx].clone();
        }
        records.push(GenerationRecord {
            generation,
            evaluations,
            gbest_loss,
            gbest: round_discrete(&gbest, &config.discrete),
        });
    }

    Ok(PsoResult {
        theta: round_discrete(&gbest, &config.discrete),
        best_loss: Some(gbest_loss),
        records,
        evaluations,
    })
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v < values[best] { i } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::FnObjective;

    fn mixed_quadratic(x: &[f64]) -> f64 {
        (x[0] - 3.0).powi(2) + (x[1] - 0.25).powi(2)
    }

    #[test]
    fn paper_defaults() {
        let c = PsoConfig::new(vec![(0.0, 1.0)], vec![false], vec![0.5]);
        assert_eq!((c.c1, c.c2, c.w, c.population), (2.3, 2.3, 1.0, 20));
        assert_eq!(c.v0_range, (-1.0, 1.0));
    }

    #[test]
    fn swarm_started_at_optimum_keeps_it() {
        let mut cfg = PsoConfig::new(
            vec![(-10.0, 10.0), (-10.0, 10.0)],
            vec![true, false],
            vec![3.0, 0.25],
        );
        cfg.max_evaluations = 400;
        let r = run_pso(&cfg, &FnObjective(mixed_quadratic)).unwrap();
        assert_eq!(r.theta, vec![3.0, 0.25]);
        assert_eq!(r.best_loss, Some(0.0));
        assert_eq!(r.evaluations, 400);
        assert_eq!(r.records.len(), 20);
    }

    #[test]
    fn converges_on_mixed_quadratic_with_stable_coefficients() {
        let mut hits = 0;
        for seed in 0..20 {
            let mut cfg = PsoConfig::new(
                vec![(-10.0, 10.0), (-10.0, 10.0)],
                vec![true, false],
                vec![-6.0, 7.0],
            );
            cfg.c1 = 1.49;
            cfg.c2 = 1.49;
            cfg.w = 0.72;
            cfg.init_spread = 1.0;
            cfg.max_evaluations = 40_000;
            cfg.seed = seed;
            let r = run_pso(&cfg, &FnObjective(mixed_quadratic)).unwrap();
            if r.theta[0] == 3.0 && (r.theta[1] - 0.25).abs() < 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}/20");
    }

    #[test]
    fn positions_are_clipped_and_evaluated_rounded() {
        let seen = std::sync::Mutex::new(Vec::new());
        let f = FnObjective(|x: &[f64]| {
            seen.lock().unwrap().push(x.to_vec());
            -x[0] - x[1]
        });
        let mut cfg = PsoConfig::new(vec![(0.0, 4.0), (0.0, 1.0)], vec![true, false], vec![1.0, 0.5]);
        cfg.v0_range = (-3.0, 3.0);
        cfg.max_evaluations = 200;
        run_pso(&cfg, &f).unwrap();
        for x in seen.into_inner().unwrap() {
            assert_eq!(x[0].fract(), 0.0);
            assert!((0.0..=4.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]));
        }
    }

    #[test]
    fn gbest_loss_never_increases() {
        let mut cfg = PsoConfig::new(vec![(-5.0, 5.0); 2], vec![false; 2], vec![4.0, 4.0]);
        cfg.max_evaluations = 1000;
        cfg.seed = 3;
        let r = run_pso(&cfg, &FnObjective(|x: &[f64]| x[0] * x[0] + x[1] * x[1])).unwrap();
        assert!(r.records.windows(2).all(|w| w[1].gbest_loss <= w[0].gbest_loss));
    }

    #[test]
    fn budget_below_population_evaluates_nothing() {
        let mut cfg = PsoConfig::new(vec![(0.0, 9.0)], vec![true], vec![2.5]);
        cfg.max_evaluations = 5;
        let r = run_pso(&cfg, &FnObjective(|x: &[f64]| x[0])).unwrap();
        assert_eq!(r.theta, vec![3.0]);
        assert_eq!(r.evaluations, 0);
    }

    #[test]
    fn rejects_tiny_population() {
        let mut cfg = PsoConfig::new(vec![(0.0, 9.0)], vec![true], vec![2.5]);
        cfg.population = 1;
        assert!(matches!(
            run_pso(&cfg, &FnObjective(|x: &[f64]| x[0])),
            Err(OptimizeError::InvalidConfig(_))
        ));
    }

    #[test]
    fn reproducible() {
        let mut cfg = PsoConfig::new(vec![(-5.0, 5.0); 3], vec![true, false, false], vec![1.0; 3]);
        cfg.seed = 11;
        cfg.init_spread = 0.5;
        let f = FnObjective(|x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>());
        assert_eq!(run_pso(&cfg, &f).unwrap(), run_pso(&cfg, &f).unwrap());
    }
}
