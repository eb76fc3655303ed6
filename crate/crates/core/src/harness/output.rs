//! CSV and TOML writers for episode logs and study summaries.
//!
//! Wall-clock solve times go to `timing.toml`, apart from the summary, so that
//! `summary.toml` is byte-identical across runs with the same seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::episode::{Controller, EpisodeLog};
use super::metrics::heading_deviation_deg;
use super::study::StudySummary;
use crate::error::Result;
use crate::model::Action;
use crate::safety::min_pairwise_distance;
use crate::scenarios::Family;

pub const SUMMARY_FILE: &str = "summary.toml";
pub const TIMING_FILE: &str = "timing.toml";

fn agent_columns(n: usize) -> Vec<String> {
    let fields = [
        "x", "y", "vx", "vy", "ax", "ay", "pred_ax", "pred_ay", "corr_ax", "corr_ay",
    ];
    (0..n)
        .flat_map(|j| fields.iter().map(move |f| format!("{f}_{}", j + 1)))
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn opt_action(list: &Option<Vec<Action>>, j: usize) -> [String; 2] {
    match list {
        Some(a) => [fmt(a[j].ax), fmt(a[j].ay)],
        None => [String::new(), String::new()],
    }
}

/// One row per logged step plus a final row with the terminal state (and
/// empty action columns).
pub fn write_trajectory_csv<W: Write>(log: &EpisodeLog, out: W) -> Result<()> {
    let n = log.final_states.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend(agent_columns(n));
    header.push("min_distance".into());
    w.write_record(&header)?;
    for rec in &log.steps {
        let mut row = vec![rec.step.to_string(), fmt(rec.step as f64 * log.dt)];
        for j in 0..n {
            let s = rec.states[j];
            row.extend([fmt(s.x), fmt(s.y), fmt(s.vx), fmt(s.vy)]);
            row.extend([fmt(rec.actions[j].ax), fmt(rec.actions[j].ay)]);
            row.extend(opt_action(&rec.predicted, j));
            row.extend(opt_action(&rec.corrected, j));
        }
        row.push(fmt(min_pairwise_distance(&rec.states)));
        w.write_record(&row)?;
    }
    let k = log.steps.len();
    let mut row = vec![k.to_string(), fmt(k as f64 * log.dt)];
    for s in &log.final_states {
        row.extend([fmt(s.x), fmt(s.y), fmt(s.vx), fmt(s.vy)]);
        row.extend(std::iter::repeat_n(String::new(), 6));
    }
    row.push(fmt(min_pairwise_distance(&log.final_states)));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PlotRow {
    agent: usize,
    step: usize,
    time: f64,
    x: f64,
    y: f64,
    speed: f64,
    heading_dev_deg: f64,
    is_ego: bool,
    collision: bool,
}

/// Long-format positions for trajectory plots: one row per agent and instant.
pub fn write_plot_csv<W: Write>(log: &EpisodeLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let collision_step = log.collision.map(|c| c.step);
    for (k, states) in log.state_sequence().iter().enumerate() {
        for (j, s) in states.iter().enumerate() {
            w.serialize(PlotRow {
                agent: j + 1,
                step: k,
                time: k as f64 * log.dt,
                x: s.x,
                y: s.y,
                speed: s.vx.hypot(s.vy),
                heading_dev_deg: heading_deviation_deg(s.vx, s.vy),
                is_ego: j == log.ego_index,
                collision: collision_step == Some(k),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Deterministic part of a [`StudySummary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub controller: Controller,
    pub family: Family,
    pub seed: u64,
    pub num_scenarios: usize,
    pub failures: usize,
    pub collisions: usize,
    pub collision_rate: f64,
    pub ave_velocity_dev: f64,
    /// Not part of the signed statistic; reported because signs can cancel.
    pub ave_abs_velocity_dev: f64,
    pub max_velocity_dev: f64,
    pub ave_heading_dev: f64,
    pub max_heading_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub controller: Controller,
    pub ave_solve_time: f64,
    pub max_solve_time: f64,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    study: Vec<SummaryRecord>,
}

#[derive(Serialize, Deserialize)]
struct TimingFile {
    timing: Vec<TimingRecord>,
}

impl From<&StudySummary> for SummaryRecord {
    fn from(s: &StudySummary) -> Self {
        Self {
            controller: s.controller,
            family: s.family,
            seed: s.seed,
            num_scenarios: s.num_scenarios,
            failures: s.failures,
            collisions: s.collisions,
            collision_rate: s.collision_rate,
            ave_velocity_dev: s.ave_velocity_dev,
            ave_abs_velocity_dev: s.ave_abs_velocity_dev,
            max_velocity_dev: s.max_velocity_dev,
            ave_heading_dev: s.ave_heading_dev,
            max_heading_dev: s.max_heading_dev,
        }
    }
}

pub fn summary_toml(summaries: &[StudySummary]) -> Result<String> {
    Ok(toml::to_string(&SummaryFile {
        study: summaries.iter().map(SummaryRecord::from).collect(),
    })?)
}

pub fn read_summary(text: &str) -> Result<Vec<SummaryRecord>> {
    Ok(toml::from_str::<SummaryFile>(text)?.study)
}

/// Writes `summary.toml` and `timing.toml` into `dir`; returns their paths.
pub fn write_study_files(summaries: &[StudySummary], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let summary = dir.join(SUMMARY_FILE);
    std::fs::write(&summary, summary_toml(summaries)?)?;
    let timing = dir.join(TIMING_FILE);
    let t = TimingFile {
        timing: summaries
            .iter()
            .map(|s| TimingRecord {
                controller: s.controller,
                ave_solve_time: s.ave_solve_time,
                max_solve_time: s.max_solve_time,
            })
            .collect(),
    };
    std::fs::write(&timing, toml::to_string(&t)?)?;
    Ok((summary, timing))
}
