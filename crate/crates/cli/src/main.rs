//! `pcpg`: run single episodes, Monte-Carlo studies and the property checks.
//!
//! Exit codes: 0 on success, 1 for invalid arguments or inputs, 2 when a run
//! fails (solver failure, failed property).

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcpg_core::harness::run_study_on;
use pcpg_core::harness::{episode_metrics, write_plot_csv, write_study_files, write_trajectory_csv};
use pcpg_core::verify::run_properties;
use pcpg_core::{run_episode, Controller, EpisodeConfig, Error, Family, Scenario, ScenarioSampler};

#[derive(Parser, Debug)]
#[command(
    name = "pcpg",
    version,
    about = "Predictor-corrector potential game driving simulator"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Decision period in seconds; the episode keeps its length in seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Planning horizon in steps.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    solver_population: Option<usize>,
    #[arg(long, global = true)]
    solver_iterations: Option<usize>,
    #[arg(long, global = true)]
    solver_elite_fraction: Option<f64>,
    #[arg(long, global = true)]
    solver_seed: Option<u64>,
    #[arg(long, global = true)]
    solver_max_sweeps: Option<usize>,
    /// Grid points per action axis for best responses.
    #[arg(long, global = true)]
    solver_grid: Option<usize>,
    #[arg(long, global = true)]
    solver_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one episode from a scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "pcpg")]
        controller: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every controller on the same sampled scenarios.
    Study {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "pg,pcpg,pcca-saturated")]
        controllers: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the randomized property checks.
    Verify {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_configuration() {
            Failure::Config(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

impl Overrides {
    fn episode_config(&self) -> Result<EpisodeConfig, Failure> {
        let mut cfg = EpisodeConfig::default();
        let s = &mut cfg.solver;
        if let Some(v) = self.solver_population {
            s.population = v;
        }
        if let Some(v) = self.solver_iterations {
            s.iterations = v;
        }
        if let Some(v) = self.solver_elite_fraction {
            s.elite_fraction = v;
        }
        if let Some(v) = self.solver_seed {
            s.seed = v;
        }
        if let Some(v) = self.solver_max_sweeps {
            s.max_br_sweeps = v;
        }
        if let Some(v) = self.solver_grid {
            s.br_grid_resolution = v;
        }
        if let Some(v) = self.solver_tol {
            s.convergence_tol = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&self, scenario: &Scenario) -> Result<Scenario, Failure> {
        let mut s = match self.dt {
            Some(dt) => scenario.retimed(dt)?,
            None => scenario.clone(),
        };
        if let Some(h) = self.horizon {
            if h == 0 {
                return Err(Failure::Config("--horizon must be at least 1".into()));
            }
            s.horizon_steps = h;
        }
        s.validate()?;
        Ok(s)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Run(format!("cannot create {}: {e}", path.display())))
}

fn parse_controllers(names: &[String]) -> Result<Vec<Controller>, Failure> {
    let mut out = Vec::new();
    for n in names {
        let c: Controller = n.parse()?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Failure::Config("no controllers given".into()));
    }
    Ok(out)
}

fn run(o: &Overrides, scenario: &Path, controller: &str, out: &Path) -> Result<(), Failure> {
    let controller: Controller = controller.parse()?;
    let loaded = Scenario::load(scenario).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", scenario.display())),
        other => other.into(),
    })?;
    let scenario = o.apply(&loaded)?;
    let cfg = o.episode_config()?;
    let log = run_episode(&scenario, controller, &cfg)?;
    std::fs::create_dir_all(out).map_err(|e| Failure::Run(format!("cannot create {}: {e}", out.display())))?;
    write_trajectory_csv(&log, create(&out.join("trajectory.csv"))?)?;
    write_plot_csv(&log, create(&out.join("plot.csv"))?)?;
    let metrics = episode_metrics(&log, &scenario.true_params[scenario.ego_index]);
    let text = toml::to_string(&metrics).map_err(|e| Failure::Run(e.to_string()))?;
    std::fs::write(out.join("metrics.toml"), text).map_err(|e| Failure::Run(e.to_string()))?;

    match metrics.collision_time {
        Some(t) => println!("{controller} on {}: collision at {t} s", scenario.name),
        None => println!("{controller} on {}: no collision", scenario.name),
    }
    println!(
        "steps {}  min distance {:.2} m  mean speed error {:.2} m/s  max heading {:.1} deg",
        metrics.steps, metrics.min_distance, metrics.ave_velocity_dev, metrics.max_heading_dev
    );
    if let Some(f) = &log.failure {
        return Err(Failure::Run(format!("episode aborted: {f}")));
    }
    Ok(())
}

fn study(o: &Overrides, family: &str, n: usize, controllers: &[String], seed: u64, out: &Path) -> Result<(), Failure> {
    let family: Family = family.parse()?;
    let controllers = parse_controllers(controllers)?;
    if n == 0 {
        return Err(Failure::Config("--n must be at least 1".into()));
    }
    let cfg = o.episode_config()?;
    let sampler = ScenarioSampler::new(family, seed);
    let scenarios = (0..n as u64)
        .map(|k| o.apply(&sampler.scenario(k)?))
        .collect::<Result<Vec<_>, Failure>>()?;
    let result = run_study_on(&scenarios, family, seed, &controllers, &cfg, false)?;
    let (summary, _) = write_study_files(&result.summaries, out)?;

    println!(
        "{:<16}{:>12}{:>10}{:>12}{:>12}{:>12}",
        "controller", "collisions", "rate", "speed err", "heading", "solve (s)"
    );
    for s in &result.summaries {
        println!(
            "{:<16}{:>12}{:>10.3}{:>12.2}{:>12.1}{:>12.4}",
            s.controller.tag(),
            format!("{}/{}", s.collisions, s.num_scenarios - s.failures),
            s.collision_rate,
            s.ave_velocity_dev,
            s.max_heading_dev,
            s.ave_solve_time
        );
    }
    println!("wrote {}", summary.display());
    let failures: usize = result.summaries.iter().map(|s| s.failures).sum();
    if failures > 0 {
        for o in result.outcomes.iter().filter(|o| o.failed()) {
            let why = o
                .error
                .clone()
                .or_else(|| o.log.as_ref().and_then(|l| l.failure.clone()));
            eprintln!("scenario {} / {}: {}", o.index, o.controller, why.unwrap_or_default());
        }
        return Err(Failure::Run(format!("{failures} episodes failed")));
    }
    Ok(())
}

fn verify(cases: usize, seed: u64) -> Result<(), Failure> {
    if cases == 0 {
        return Err(Failure::Config("--cases must be at least 1".into()));
    }
    let reports = run_properties(cases, seed)?;
    let mut failed = 0;
    for r in &reports {
        let tag = if r.passed() { "ok" } else { "FAILED" };
        println!(
            "{:<28} {:>6} cases  {:>4} failures  worst {:.3e} (tol {:.0e})  {tag}",
            r.name, r.cases, r.failures, r.worst, r.tolerance
        );
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(Failure::Run(format!("{failed} properties failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let o = &cli.overrides;
    let outcome = match &cli.command {
        Command::Run {
            scenario,
            controller,
            out,
        } => run(o, scenario, controller, out),
        Command::Study {
            family,
            n,
            controllers,
            seed,
            out,
        } => study(o, family, *n, controllers, *seed, out),
        Command::Verify { cases, seed } => verify(*cases, *seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
