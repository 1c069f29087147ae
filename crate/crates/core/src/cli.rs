//! Command-line front end.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input, 2 invalid or
//! infeasible scenario, options or events, 3 solver did not converge (all
//! artifacts are still written).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::admm::{run, SolverOptions};
use crate::error::{Error, Result};
use crate::metrics::{export_csv, residual_to_reference, IterationRecord, Trajectory};
use crate::model::{
    breakdown, check_feasibility, load_scenario, objective, PlanDocument, Scenario, TransportPlan,
};
use crate::online::{run_online, segment_scenarios, EventSchedule};
use crate::oracle::{solve_centralized, solve_centralized_report, OracleOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

pub const PLAN_FILE: &str = "plan.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Debug, Parser)]
#[command(
    name = "fairot",
    version,
    about = "Fair distributed optimal transport solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a scenario and report whether supply covers demand.
    Check { scenario: PathBuf },
    /// Solve a scenario and write the plan and trajectory.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Distributed)]
        mode: Mode,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Solve while applying timed changes from an events file.
    Online {
        scenario: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Solve once per fairness weight and compare the results.
    Compare {
        scenario: PathBuf,
        /// Comma-separated fairness weights applied to every target.
        #[arg(long, value_delimiter = ',', default_value = "0,3")]
        omega: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Distributed)]
        mode: Mode,
        #[command(flatten)]
        config: RunConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Distributed,
    Centralized,
}

/// Solver flags shared by the solving commands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Penalty constant.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: u64,
    /// Keep every n-th iteration in the trajectory.
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,
    /// Output directory for plan.json and trajectory.csv.
    #[arg(long, default_value = "fairot-out")]
    pub out: PathBuf,
    /// `none`, `centralized`, or the path of a plan file.
    #[arg(long, default_value = "none")]
    pub reference: String,
    /// Worker threads for the node subproblems; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    None,
    Centralized,
    File(PathBuf),
}

impl RunConfig {
    pub fn reference(&self) -> Reference {
        match self.reference.as_str() {
            "none" => Reference::None,
            "centralized" => Reference::Centralized,
            path => Reference::File(PathBuf::from(path)),
        }
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            eta: self.eta,
            tol: self.tol,
            max_iters: self.max_iters,
            record_every: self.record_every,
            ..SolverOptions::default()
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Io { .. } => EXIT_PARSE,
        _ => EXIT_INVALID,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let threads = match &cli.command {
        Command::Check { .. } => None,
        Command::Solve { config, .. }
        | Command::Online { config, .. }
        | Command::Compare { config, .. } => config.threads,
    };
    let outcome = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::InvalidOption(format!(
                "cannot start {n} worker threads: {e}"
            ))),
        },
        None => dispatch(&cli.command),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Check { scenario } => cmd_check(scenario),
        Command::Solve {
            scenario,
            mode,
            config,
        } => cmd_solve(scenario, *mode, config),
        Command::Online {
            scenario,
            events,
            config,
        } => cmd_online(scenario, events, config),
        Command::Compare {
            scenario,
            omega,
            mode,
            config,
        } => cmd_compare(scenario, omega, *mode, config),
    }
}

pub fn cmd_check(path: &Path) -> Result<i32> {
    let scenario = match load_scenario(path) {
        Ok(s) => s,
        Err(Error::Validation(violations)) => {
            println!("invalid scenario:");
            for v in &violations {
                println!("  {v}");
            }
            return Ok(EXIT_INVALID);
        }
        Err(e) => return Err(e),
    };
    println!(
        "{} targets, {} sources, {} edges, horizon {}",
        scenario.n_targets(),
        scenario.n_sources(),
        scenario.n_edges(),
        scenario.horizon()
    );
    let report = check_feasibility(&scenario);
    println!("{report}");
    Ok(if report.feasible() {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}

fn load_reference(reference: &Reference, scenario: &Scenario) -> Result<Option<TransportPlan>> {
    match reference {
        Reference::None => Ok(None),
        Reference::Centralized => solve_centralized(scenario, &OracleOptions::default()).map(Some),
        Reference::File(path) => {
            TransportPlan::from_document(&PlanDocument::read(path)?, scenario).map(Some)
        }
    }
}

fn write_artifacts(out: &Path, plan: &TransportPlan, trajectory: &Trajectory) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    plan.to_document().write(out.join(PLAN_FILE))?;
    export_csv(trajectory, out.join(TRAJECTORY_FILE))
}

fn summary(scenario: &Scenario, plan: &TransportPlan, converged: bool, iterations: u64) -> String {
    let b = breakdown(scenario, plan.amounts());
    format!(
        "converged: {converged}\niterations: {iterations}\nsocial utility: {:.10}\n  efficiency: {:.10}\n  fairness: {:.10}",
        b.total(),
        b.efficiency,
        b.fairness
    )
}

struct Solved {
    plan: TransportPlan,
    trajectory: Trajectory,
    converged: bool,
    iterations: u64,
}

fn solve_once(
    scenario: &Scenario,
    mode: Mode,
    config: &RunConfig,
    reference: Option<TransportPlan>,
) -> Result<Solved> {
    match mode {
        Mode::Distributed => {
            let options = SolverOptions {
                reference_plan: reference,
                ..config.solver_options()
            };
            let res = run(scenario, &options)?;
            if res.capped_subproblems > 0 {
                log::warn!(
                    "{} node subproblems hit the inner iteration cap",
                    res.capped_subproblems
                );
            }
            Ok(Solved {
                plan: res.plan,
                trajectory: res.trajectory,
                converged: res.converged,
                iterations: res.iterations,
            })
        }
        Mode::Centralized => {
            let options = OracleOptions {
                max_iters: usize::try_from(config.max_iters).unwrap_or(usize::MAX),
                ..OracleOptions::with_tol(config.tol)
            };
            let sol = solve_centralized_report(scenario, &options)?;
            let reference_residual = match &reference {
                Some(r) => Some(residual_to_reference(&sol.plan, r)?),
                None => None,
            };
            let mut trajectory = Trajectory::new();
            trajectory.push(IterationRecord {
                k: sol.iterations as u64,
                social_utility: sol.objective,
                primal_residual: 0.0,
                reference_residual,
            });
            Ok(Solved {
                plan: sol.plan,
                trajectory,
                converged: sol.converged,
                iterations: sol.iterations as u64,
            })
        }
    }
}

pub fn cmd_solve(path: &Path, mode: Mode, config: &RunConfig) -> Result<i32> {
    let scenario = load_scenario(path)?;
    let reference = load_reference(&config.reference(), &scenario)?;
    let solved = solve_once(&scenario, mode, config, reference)?;
    write_artifacts(&config.out, &solved.plan, &solved.trajectory)?;
    println!(
        "{}",
        summary(&scenario, &solved.plan, solved.converged, solved.iterations)
    );
    println!("wrote {}", config.out.display());
    Ok(if solved.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn cmd_online(path: &Path, events: &Path, config: &RunConfig) -> Result<i32> {
    let scenario = load_scenario(path)?;
    let schedule = EventSchedule::read(events)?;
    let references = match config.reference() {
        Reference::None => None,
        Reference::Centralized => Some(
            segment_scenarios(&scenario, &schedule)?
                .iter()
                .map(|s| solve_centralized(s, &OracleOptions::default()))
                .collect::<Result<Vec<_>>>()?,
        ),
        Reference::File(_) => {
            return Err(Error::InvalidOption(
                "online runs accept --reference none or centralized".into(),
            ))
        }
    };
    let res = run_online(
        &scenario,
        &schedule,
        &config.solver_options(),
        references.as_deref(),
    )?;
    write_artifacts(&config.out, &res.plan, &res.trajectory)?;
    for (i, seg) in res.segments.iter().enumerate() {
        println!(
            "segment {i}: iterations {}..{}, converged: {}, social utility {:.10}",
            seg.start,
            seg.end,
            seg.converged,
            objective(&seg.scenario, seg.plan.amounts())
        );
    }
    let last = res.segments.last().expect("at least one segment");
    println!(
        "{}",
        summary(&last.scenario, &res.plan, res.converged, res.state.k)
    );
    println!("wrote {}", config.out.display());
    Ok(if res.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn cmd_compare(path: &Path, omegas: &[f64], mode: Mode, config: &RunConfig) -> Result<i32> {
    if omegas.is_empty() {
        return Err(Error::InvalidOption(
            "--omega needs at least one value".into(),
        ));
    }
    if let Some(w) = omegas.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidOption(format!(
            "fairness weight must be nonnegative, got {w}"
        )));
    }
    let base = load_scenario(path)?;
    let mut runs = Vec::with_capacity(omegas.len());
    for &w in omegas {
        let scenario = base.with_uniform_weight(w);
        let solved = solve_once(&scenario, mode, config, None)?;
        runs.push((scenario, solved));
    }

    let mut out = String::new();
    writeln!(
        out,
        "omega,converged,iterations,social_utility,efficiency,fairness"
    )
    .unwrap();
    for (&w, (scenario, solved)) in omegas.iter().zip(&runs) {
        let b = breakdown(scenario, solved.plan.amounts());
        writeln!(
            out,
            "{w},{},{},{:.10},{:.10},{:.10}",
            solved.converged,
            solved.iterations,
            b.total(),
            b.efficiency,
            b.fairness
        )
        .unwrap();
    }
    writeln!(
        out,
        "\nsocial utility of each plan (rows) under each weight (columns)"
    )
    .unwrap();
    for (&w, (_, solved)) in omegas.iter().zip(&runs) {
        let row: Vec<String> = runs
            .iter()
            .map(|(s, _)| format!("{:.10}", objective(s, solved.plan.amounts())))
            .collect();
        writeln!(out, "plan@{w}: {}", row.join(", ")).unwrap();
    }
    writeln!(out, "\nlargest plan difference from plan@{}", omegas[0]).unwrap();
    for (&w, (_, solved)) in omegas.iter().zip(&runs) {
        writeln!(
            out,
            "plan@{w}: {:.10e}",
            solved.plan.sup_distance(&runs[0].1.plan)?
        )
        .unwrap();
    }
    print!("{out}");

    let all = runs.iter().all(|(_, s)| s.converged);
    Ok(if all { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
