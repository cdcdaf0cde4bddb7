//! Replicated runs of several optimizers against a shared evaluation budget.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_mspsa, run_pso, MspsaConfig, Objective, OptimizeError, PsoConfig};
use crate::rng::{derive_seed, tag};

/// `(evaluations spent, incumbent)` checkpoints of one run.
pub type Incumbents = Vec<(usize, Vec<f64>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Mspsa(MspsaConfig),
    Pso(PsoConfig),
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::Mspsa(_) => "mspsa",
            OptimizerSpec::Pso(_) => "pso",
        }
    }

    pub fn initial(&self) -> &[f64] {
        match self {
            OptimizerSpec::Mspsa(c) => &c.initial,
            OptimizerSpec::Pso(c) => &c.initial,
        }
    }

    pub fn discrete(&self) -> &[bool] {
        match self {
            OptimizerSpec::Mspsa(c) => &c.discrete,
            OptimizerSpec::Pso(c) => &c.discrete,
        }
    }

    /// Runs once with `seed` and at most `budget` loss evaluations.
    /// Returns `(evaluations, incumbent)` checkpoints and the final point.
    pub fn run<O: Objective>(
        &self,
        objective: &O,
        seed: u64,
        budget: usize,
    ) -> Result<(Incumbents, Vec<f64>, usize), OptimizeError<O::Error>> {
        match self {
            OptimizerSpec::Mspsa(c) => {
                let mut c = c.clone();
                c.seed = seed;
                c.max_iterations = budget / 2;
                let r = run_mspsa(&c, objective)?;
                Ok((r.incumbents(&c.discrete), r.theta, r.evaluations))
            }
            OptimizerSpec::Pso(c) => {
                let mut c = c.clone();
                c.seed = seed;
                c.max_evaluations = budget;
                let r = run_pso(&c, objective)?;
                Ok((r.incumbents(&c.initial, &c.discrete), r.theta, r.evaluations))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub optimizer: String,
    pub replicate: usize,
    pub seed: u64,
    pub final_point: Vec<f64>,
    /// Loss of `final_point` under the evaluation seeds.
    pub final_loss: f64,
    pub evaluations: usize,
    /// Best-so-far loss at each grid point.
    pub best_so_far: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCurve {
    pub optimizer: String,
    pub evals: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub initial_loss: f64,
    pub curves: Vec<ConvergenceCurve>,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl Comparison {
    pub fn outcomes_of<'a>(&'a self, optimizer: &'a str) -> impl Iterator<Item = &'a ReplicateOutcome> {
        self.outcomes.iter().filter(move |o| o.optimizer == optimizer)
    }

    pub fn mean_final_loss(&self, optimizer: &str) -> Option<f64> {
        let v: Vec<f64> = self.outcomes_of(optimizer).map(|o| o.final_loss).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_curves_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["evals", "loss_mean", "loss_std", "optimizer"])?;
        for c in &self.curves {
            for i in 0..c.evals.len() {
                w.write_record([
                    c.evals[i].to_string(),
                    c.mean[i].to_string(),
                    c.std[i].to_string(),
                    c.optimizer.clone(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid `0, stride, 2·stride, …` up to and including `budget`.
pub fn evaluation_grid(budget: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut grid: Vec<usize> = (0..=budget / stride).map(|i| i * stride).collect();
    if *grid.last().unwrap() != budget {
        grid.push(budget);
    }
    grid
}

/// Runs every optimizer `n_replicates` times with seeds derived from
/// `master_seed`, then scores incumbents on the fixed `eval_seeds`. Curve
/// values are best-so-far losses against evaluations spent; scoring
/// evaluations are not charged to the budget.
pub fn compare_replicated<O: Objective>(
    specs: &[OptimizerSpec],
    objective: &O,
    n_replicates: usize,
    master_seed: u64,
    budget: usize,
    stride: usize,
    eval_seeds: &[u64],
) -> Result<Comparison, OptimizeError<O::Error>> {
    if n_replicates == 0 {
        return Err(OptimizeError::InvalidConfig("n_replicates must be >= 1".into()));
    }
    let Some(first) = specs.first() else {
        return Err(OptimizeError::InvalidConfig("no optimizers to compare".into()));
    };
    let grid = evaluation_grid(budget, stride);
    let score = |point: &[f64]| {
        objective
            .evaluate(point, eval_seeds)
            .map_err(|source| OptimizeError::Evaluation {
                k: 0,
                theta: point.to_vec(),
                source,
            })
    };
    let start = super::round_discrete(first.initial(), first.discrete());
    let initial_loss = score(&start)?;

    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..n_replicates).map(move |r| (s, r)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(s, r)| {
            let spec = &specs[s];
            let seed = derive_seed(master_seed, tag::REPLICATE, r as u64);
            let (incumbents, final_point, evaluations) = spec.run(objective, seed, budget)?;
            let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
            let mut scored = |p: &[f64]| -> Result<f64, OptimizeError<O::Error>> {
                let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
                if let Some(&v) = cache.get(&key) {
                    return Ok(v);
                }
                let v = score(p)?;
                cache.insert(key, v);
                Ok(v)
            };
            let mut best = f64::INFINITY;
            let mut best_so_far = Vec::with_capacity(grid.len());
            let mut cursor = 0;
            for &e in &grid {
                while cursor + 1 < incumbents.len() && incumbents[cursor + 1].0 <= e {
                    cursor += 1;
                }
                best = best.min(scored(&incumbents[cursor].1)?);
                best_so_far.push(best);
            }
            let final_loss = scored(&final_point)?;
            Ok(ReplicateOutcome {
                optimizer: spec.name().to_string(),
                replicate: r,
                seed,
                final_point,
                final_loss,
                evaluations,
                best_so_far,
            })
        })
        .collect::<Result<Vec<_>, OptimizeError<O::Error>>>()?;

    let curves = specs
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let runs = &outcomes[s * n_replicates..(s + 1) * n_replicates];
            let (mean, std) = (0..grid.len())
                .map(|i| mean_std(runs.iter().map(|o| o.best_so_far[i])))
                .unzip();
            ConvergenceCurve {
                optimizer: spec.name().to_string(),
                evals: grid.clone(),
                mean,
                std,
            }
        })
        .collect();

    Ok(Comparison {
        initial_loss,
        curves,
        outcomes,
    })
}

/// Mean and sample standard deviation (zero for a single value).
fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 || v.iter().all(|&x| x == v[0]) {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{FnObjective, GainSchedule};

    fn bowl(x: &[f64]) -> f64 {
        (x[0] - 3.0).powi(2) + (x[1] - 0.25).powi(2)
    }

    fn specs() -> Vec<OptimizerSpec> {
        let bounds = vec![(-10.0, 10.0), (-10.0, 10.0)];
        let discrete = vec![true, false];
        let initial = vec![8.0, -6.0];
        let mut m = MspsaConfig::new(bounds.clone(), discrete.clone(), initial.clone());
        m.gains = GainSchedule {
            a: 1.0,
            c: 0.2,
            big_a: 20.0,
            alpha: 0.602,
            gamma: 0.101,
        };
        m.stall_window = 0;
        let p = PsoConfig::new(bounds, discrete, initial);
        vec![OptimizerSpec::Mspsa(m), OptimizerSpec::Pso(p)]
    }

    #[test]
    fn grid_includes_start_and_budget() {
        assert_eq!(evaluation_grid(100, 20), vec![0, 20, 40, 60, 80, 100]);
        assert_eq!(evaluation_grid(50, 20), vec![0, 20, 40, 50]);
    }

    #[test]
    fn single_replicate_curve_is_the_run() {
        let f = FnObjective(bowl);
        let c = compare_replicated(&specs(), &f, 1, 9, 200, 20, &[]).unwrap();
        for (curve, outcome) in c.curves.iter().zip(&c.outcomes) {
            assert_eq!(curve.mean, outcome.best_so_far);
            assert!(curve.std.iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn same_master_seed_same_curves() {
        let f = FnObjective(bowl);
        let a = compare_replicated(&specs(), &f, 4, 5, 300, 20, &[]).unwrap();
        let b = compare_replicated(&specs(), &f, 4, 5, 300, 20, &[]).unwrap();
        assert_eq!(a, b);
        let c = compare_replicated(&specs(), &f, 4, 6, 300, 20, &[]).unwrap();
        assert_ne!(a.curves, c.curves);
    }

    #[test]
    fn curves_start_together_and_never_rise() {
        let f = FnObjective(bowl);
        let c = compare_replicated(&specs(), &f, 5, 1, 400, 40, &[]).unwrap();
        for curve in &c.curves {
            assert_eq!(curve.mean[0], c.initial_loss);
            assert!(curve.mean.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn csv_row_count_and_header() {
        let f = FnObjective(bowl);
        let c = compare_replicated(&specs(), &f, 2, 1, 100, 10, &[]).unwrap();
        let mut buf = Vec::new();
        c.write_curves_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "evals,loss_mean,loss_std,optimizer");
        assert_eq!(lines.len() - 1, 2 * (100 / 10 + 1));
    }

    #[test]
    fn budget_parity() {
        let f = FnObjective(bowl);
        let c = compare_replicated(&specs(), &f, 2, 1, 100, 10, &[]).unwrap();
        for o in &c.outcomes {
            assert_eq!(o.evaluations, 100);
        }
    }

    #[test]
    fn zero_replicates_rejected() {
        let f = FnObjective(bowl);
        assert!(compare_replicated(&specs(), &f, 0, 1, 100, 10, &[]).is_err());
    }
}
