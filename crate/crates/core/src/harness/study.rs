use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Controller, EpisodeConfig, EpisodeLog};
use super::metrics::{episode_metrics, EpisodeMetrics};
use crate::error::{Error, Result};
use crate::scenarios::{Family, Scenario, ScenarioSampler};

/// Aggregate over the episodes of one controller. Averages are means of the
/// per-episode averages; maxima are taken over all episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub controller: Controller,
    pub family: Family,
    pub seed: u64,
    pub num_scenarios: usize,
    /// Episodes aborted by a solver failure; excluded from every statistic.
    pub failures: usize,
    pub collisions: usize,
    pub collision_rate: f64,
    pub ave_velocity_dev: f64,
    pub ave_abs_velocity_dev: f64,
    pub max_velocity_dev: f64,
    pub ave_heading_dev: f64,
    pub max_heading_dev: f64,
    pub ave_solve_time: f64,
    pub max_solve_time: f64,
}

/// Outcome of one (scenario, controller) run.
#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub index: usize,
    pub controller: Controller,
    pub log: Option<EpisodeLog>,
    pub metrics: Option<EpisodeMetrics>,
    pub error: Option<String>,
}

impl EpisodeOutcome {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.log.as_ref().is_some_and(|l| l.failure.is_some())
    }
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub summaries: Vec<StudySummary>,
    /// Ordered by scenario index, then by controller order.
    pub outcomes: Vec<EpisodeOutcome>,
}

pub fn summarize(controller: Controller, family: Family, seed: u64, outcomes: &[&EpisodeOutcome]) -> StudySummary {
    let ok: Vec<&EpisodeMetrics> = outcomes
        .iter()
        .filter(|o| !o.failed())
        .filter_map(|o| o.metrics.as_ref())
        .collect();
    let count = ok.len();
    let mean = |f: fn(&EpisodeMetrics) -> f64| {
        if count == 0 {
            0.0
        } else {
            ok.iter().map(|m| f(m)).sum::<f64>() / count as f64
        }
    };
    let max = |f: fn(&EpisodeMetrics) -> f64| ok.iter().map(|m| f(m)).fold(0.0, f64::max);
    let collisions = ok.iter().filter(|m| m.collided).count();
    StudySummary {
        controller,
        family,
        seed,
        num_scenarios: outcomes.len(),
        failures: outcomes.len() - count,
        collisions,
        collision_rate: if count == 0 {
            0.0
        } else {
            collisions as f64 / count as f64
        },
        ave_velocity_dev: mean(|m| m.ave_velocity_dev),
        ave_abs_velocity_dev: mean(|m| m.ave_abs_velocity_dev),
        max_velocity_dev: max(|m| m.max_velocity_dev),
        ave_heading_dev: mean(|m| m.ave_heading_dev),
        max_heading_dev: max(|m| m.max_heading_dev),
        ave_solve_time: mean(|m| m.ave_solve_time),
        max_solve_time: max(|m| m.max_solve_time),
    }
}

fn run_one(
    scenario: &Scenario,
    index: usize,
    controller: Controller,
    config: &EpisodeConfig,
    keep_log: bool,
) -> EpisodeOutcome {
    match run_episode(scenario, controller, config) {
        Ok(log) => {
            let metrics = episode_metrics(&log, &scenario.true_params[scenario.ego_index]);
            EpisodeOutcome {
                index,
                controller,
                metrics: Some(metrics),
                error: None,
                log: keep_log.then_some(log),
            }
        }
        Err(e) => EpisodeOutcome {
            index,
            controller,
            log: None,
            metrics: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every controller on the same `n` sampled scenarios. Episodes run in
/// parallel; results are collected in index order so they match a serial run.
pub fn run_study(
    family: Family,
    controllers: &[Controller],
    n: usize,
    seed: u64,
    config: &EpisodeConfig,
    keep_logs: bool,
) -> Result<StudyResult> {
    let sampler = ScenarioSampler::new(family, seed);
    let scenarios: Vec<Scenario> = (0..n as u64).map(|k| sampler.scenario(k)).collect::<Result<_>>()?;
    run_study_on(&scenarios, family, seed, controllers, config, keep_logs)
}

/// [`run_study`] over an explicit scenario list, for callers that adjust the
/// sampled scenarios first. `family` and `seed` are only recorded.
pub fn run_study_on(
    scenarios: &[Scenario],
    family: Family,
    seed: u64,
    controllers: &[Controller],
    config: &EpisodeConfig,
    keep_logs: bool,
) -> Result<StudyResult> {
    if scenarios.is_empty() {
        return Err(Error::config("a study needs at least one scenario"));
    }
    if controllers.is_empty() {
        return Err(Error::config("a study needs at least one controller"));
    }
    config.validate()?;
    let jobs: Vec<(usize, Controller)> = (0..scenarios.len())
        .flat_map(|i| controllers.iter().map(move |c| (i, *c)))
        .collect();
    let outcomes: Vec<EpisodeOutcome> = jobs
        .par_iter()
        .map(|&(i, c)| run_one(&scenarios[i], i, c, config, keep_logs))
        .collect();
    let summaries = controllers
        .iter()
        .map(|c| {
            let mine: Vec<&EpisodeOutcome> = outcomes.iter().filter(|o| o.controller == *c).collect();
            summarize(*c, family, seed, &mine)
        })
        .collect();
    Ok(StudyResult { summaries, outcomes })
}
