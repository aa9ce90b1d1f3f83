//! Multi-seed batches.

use rayon::prelude::*;
use serde::Serialize;

use sass_core::metrics::Metrics;
use sass_core::mission::{run_with, MissionError, RunOptions};
use sass_core::scenario::{Mode, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Aggregate {
    Usar { runs: usize, median_victims_rescued: f64, mean_victims_rescued: f64, completed_runs: usize, mean_total_energy: f64 },
    Explore { runs: usize, success_rate: f64, mean_cost: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Per-seed metrics in ascending seed order.
    pub rows: Vec<(u64, Metrics)>,
    pub aggregate: Aggregate,
}

/// Parses `A..B` as the inclusive seed range A through B.
pub fn parse_seed_range(s: &str) -> Option<Vec<u64>> {
    let (a, b) = s.split_once("..")?;
    let (a, b): (u64, u64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (a <= b).then(|| (a..=b).collect())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => values[n / 2],
        _ => (values[n / 2 - 1] + values[n / 2]) / 2.0,
    }
}

/// Folds per-seed metrics in seed order.
pub fn aggregate(mode: Mode, rows: &[(u64, Metrics)]) -> Aggregate {
    let runs = rows.len();
    let denom = runs.max(1) as f64;
    match mode {
        Mode::Usar => {
            let mut rescued = Vec::with_capacity(runs);
            let (mut energy, mut completed) = (0.0, 0);
            for (_, m) in rows {
                if let Metrics::Usar(u) = m {
                    rescued.push(f64::from(u.victims_rescued));
                    energy += u.total_energy;
                    completed += usize::from(u.completion_tick.is_some());
                }
            }
            let mean_victims_rescued = rescued.iter().sum::<f64>() / denom;
            Aggregate::Usar {
                runs,
                median_victims_rescued: median(&mut rescued),
                mean_victims_rescued,
                completed_runs: completed,
                mean_total_energy: energy / denom,
            }
        }
        Mode::Explore => {
            let (mut wins, mut cost) = (0usize, 0.0);
            for (_, m) in rows {
                if let Metrics::Explore(e) = m {
                    wins += usize::from(e.success);
                    cost += e.cost;
                }
            }
            Aggregate::Explore { runs, success_rate: wins as f64 / denom, mean_cost: cost / denom }
        }
    }
}

/// Runs every seed (in parallel) and aggregates in ascending seed order.
pub fn sweep(scenario: &Scenario, scenario_hash: u64, seeds: &[u64]) -> Result<SweepResult, MissionError> {
    let opts = RunOptions { scenario_hash, ..RunOptions::default() };
    let mut rows = seeds
        .par_iter()
        .map(|&seed| run_with(scenario, seed, &opts).map(|r| (seed, r.metrics)))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|(seed, _)| *seed);
    let aggregate = aggregate(scenario.mode, &rows);
    Ok(SweepResult { rows, aggregate })
}
