//! Command-line front end.
//!
//! Exit codes: 0 no violations, 1 violations found (or a replayed violation
//! did not recur), 2 bounds exceeded without violations, 3 load, validation
//! or stale-trace errors.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::explorer::{explore, recheck, Bounds, ExplorationReport, Violation, ViolationKind};
use crate::kernel::{Choice, Kernel, KernelError, Trace};
use crate::scenarios::catalog::{builtin_scenario, catalog};
use crate::scenarios::{from_ron, load_file, monitors, to_ron, LoadError, Scenario};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATIONS: u8 = 1;
pub const EXIT_BOUNDS: u8 = 2;
pub const EXIT_ERROR: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "commcheck", version, about = "Explore interleavings of communicating processes")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exhaustively explore a scenario and report violations.
    Explore {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        bounds: BoundArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Follow a schedule prefix, then continue with the first enabled step
    /// until the scenario stops.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        schedule: PathBuf,
        #[command(flatten)]
        bounds: BoundArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Replay a recorded schedule step by step and re-check its violation.
    Replay {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List the built-in scenarios.
    List,
    /// Check every built-in scenario against its expected outcome.
    CatalogCheck {
        #[arg(long)]
        only: Option<String>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Name of a built-in scenario.
    #[arg(long)]
    pub catalog: Option<String>,
    /// Path to a scenario document.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub max_states: Option<usize>,
}

impl BoundArgs {
    fn apply(&self, base: Bounds) -> Bounds {
        Bounds {
            max_depth: self.max_depth.unwrap_or(base.max_depth),
            max_states: self.max_states.unwrap_or(base.max_states),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

/// Structured output of `run`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDocument {
    pub scenario: String,
    pub trace: Trace,
    pub violations: Vec<ViolationKind>,
    pub terminated: bool,
    pub deadlocked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub index: usize,
    pub event: String,
    pub mechanism_state: Option<String>,
}

/// Structured output of `replay`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayDocument {
    pub scenario: String,
    pub steps: Vec<ReplayStep>,
    pub final_state_hash: String,
    pub violations: Vec<ViolationKind>,
    pub expected: Option<ViolationKind>,
    pub confirmed: Option<bool>,
}

/// Any document that carries a schedule: a bare trace, a violation, a run
/// result, or a whole report (its first violation). Blank text is the empty
/// schedule.
pub fn parse_schedule(text: &str) -> Result<(Trace, Option<ViolationKind>), String> {
    if text.trim().is_empty() {
        return Ok((Trace::default(), None));
    }
    if let Ok(trace) = from_ron::<Trace>(text) {
        return Ok((trace, None));
    }
    if let Ok(v) = from_ron::<Violation>(text) {
        return Ok((v.trace, Some(v.kind)));
    }
    if let Ok(run) = from_ron::<RunDocument>(text) {
        return Ok((run.trace, None));
    }
    match ExplorationReport::from_document(text) {
        Ok(report) => match report.violations.into_iter().next() {
            Some(v) => Ok((v.trace, Some(v.kind))),
            None => Ok((Trace::default(), None)),
        },
        Err(e) => Err(format!("not a schedule, violation, run or report document: {e}")),
    }
}

/// Parses `args` and runs the command, writing to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_ERROR;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&config.command, out) {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_ERROR
        }
    }
}

/// Entry point used by the binary.
pub fn main() -> std::process::ExitCode {
    let code = run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::ExitCode::from(code)
}

fn resolve(source: &Source) -> Result<Scenario, String> {
    match (&source.catalog, &source.file) {
        (Some(name), _) => builtin_scenario(name).ok_or_else(|| format!("no built-in scenario named \"{name}\"")),
        (None, Some(path)) => load_file(path).map_err(|e: LoadError| format!("{}: {e}", path.display())),
        (None, None) => Err("give --catalog or --file".into()),
    }
}

fn read_schedule(path: &PathBuf) -> Result<(Trace, Option<ViolationKind>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_schedule(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn execute(command: &Command, out: &mut dyn Write) -> Result<u8, String> {
    let io = |e: std::io::Error| e.to_string();
    match command {
        Command::Explore { source, bounds, format } => {
            let scenario = resolve(source)?;
            let report = explore(&scenario, bounds.apply(scenario.bounds));
            match format {
                Format::Text => write!(out, "{report}").map_err(io)?,
                Format::Structured => writeln!(out, "{}", report.to_document()).map_err(io)?,
            }
            Ok(if !report.violations.is_empty() {
                EXIT_VIOLATIONS
            } else if report.bounds_hit {
                EXIT_BOUNDS
            } else {
                EXIT_OK
            })
        }
        Command::Run { source, schedule, bounds, format } => {
            let scenario = resolve(source)?;
            let (prefix, _) = read_schedule(schedule)?;
            let doc = run_schedule(&scenario, &prefix, bounds.apply(scenario.bounds)).map_err(|e| e.to_string())?;
            match format {
                Format::Text => {
                    writeln!(out, "scenario: {}", doc.scenario).map_err(io)?;
                    for (i, e) in doc.trace.events.iter().enumerate() {
                        writeln!(out, "{i:>4}  {e}").map_err(io)?;
                    }
                    let end = if doc.terminated {
                        "all processes terminated"
                    } else if doc.deadlocked {
                        "deadlocked"
                    } else {
                        "stopped at the depth bound"
                    };
                    writeln!(out, "{end}").map_err(io)?;
                    writeln!(out, "violations: {}", show_kinds(&doc.violations)).map_err(io)?;
                }
                Format::Structured => writeln!(out, "{}", to_ron(&doc)).map_err(io)?,
            }
            Ok(if doc.violations.is_empty() { EXIT_OK } else { EXIT_VIOLATIONS })
        }
        Command::Replay { source, schedule, format } => {
            let scenario = resolve(source)?;
            let (trace, expected) = read_schedule(schedule)?;
            let doc = replay_listing(&scenario, &trace, expected).map_err(|e| e.to_string())?;
            match format {
                Format::Text => {
                    writeln!(out, "scenario: {}", doc.scenario).map_err(io)?;
                    if doc.steps.is_empty() {
                        writeln!(out, "empty schedule; initial state:").map_err(io)?;
                        let kernel = Kernel::new(&scenario);
                        let init = kernel.initial_state();
                        for (decl, state) in scenario.mechanisms.iter().zip(&init.mechanisms) {
                            writeln!(out, "      {}: {state}", decl.id).map_err(io)?;
                        }
                    }
                    for step in &doc.steps {
                        let after = step.mechanism_state.as_deref().unwrap_or("-");
                        writeln!(out, "{:>4}  {:<40} => {after}", step.index, step.event).map_err(io)?;
                    }
                    writeln!(out, "final state {}", doc.final_state_hash).map_err(io)?;
                    writeln!(out, "violations at final step: {}", show_kinds(&doc.violations)).map_err(io)?;
                    if let (Some(kind), Some(ok)) = (&doc.expected, doc.confirmed) {
                        let verdict = if ok { "confirmed" } else { "NOT reproduced" };
                        writeln!(out, "recorded violation {kind}: {verdict}").map_err(io)?;
                    }
                }
                Format::Structured => writeln!(out, "{}", to_ron(&doc)).map_err(io)?,
            }
            Ok(if doc.confirmed == Some(false) { EXIT_VIOLATIONS } else { EXIT_OK })
        }
        Command::List => {
            for entry in catalog() {
                writeln!(out, "{:<30} {}", entry.name(), entry.scenario.description).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::CatalogCheck { only } => {
            let entries: Vec<_> = catalog()
                .into_iter()
                .filter(|e| only.as_deref().is_none_or(|n| e.name() == n))
                .collect();
            if entries.is_empty() {
                return Err(format!("no catalog scenario named \"{}\"", only.as_deref().unwrap_or("")));
            }
            let mut failed = 0;
            for entry in &entries {
                let check = entry.check();
                failed += usize::from(!check.passed);
                writeln!(out, "{check}").map_err(io)?;
            }
            writeln!(out, "{} of {} scenarios match", entries.len() - failed, entries.len()).map_err(io)?;
            Ok(if failed == 0 { EXIT_OK } else { EXIT_VIOLATIONS })
        }
    }
}

fn show_kinds(kinds: &[ViolationKind]) -> String {
    if kinds.is_empty() {
        "none".into()
    } else {
        kinds.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    }
}

/// Follows `prefix`, then keeps taking the first enabled step.
pub fn run_schedule(scenario: &Scenario, prefix: &Trace, bounds: Bounds) -> Result<RunDocument, KernelError> {
    let kernel = Kernel::new(scenario);
    let mut state = kernel.initial_state();
    let mut path: Vec<Choice> = Vec::new();
    let mut found: BTreeSet<ViolationKind> = monitors::on_state(scenario, &state).into_iter().map(|f| f.kind).collect();
    let mut take = |state: &mut crate::kernel::GlobalState, t: crate::kernel::Transition, path: &mut Vec<Choice>| {
        let findings = monitors::on_transition(scenario, state, &t.choice, &t.effect, &t.state);
        found.extend(findings.into_iter().map(|f| f.kind));
        found.extend(monitors::on_state(scenario, &t.state).into_iter().map(|f| f.kind));
        path.push(t.choice);
        *state = t.state;
    };
    for (index, event) in prefix.events.iter().enumerate() {
        let choice = kernel.resolve(index, event)?;
        let t = kernel
            .transition(&state, &choice)
            .map_err(|_| KernelError::NotEnabledAtStep { index, event: event.to_string() })?;
        take(&mut state, t, &mut path);
    }
    let mut deadlocked = false;
    while path.len() < bounds.max_depth {
        match kernel.successors(&state).into_iter().next() {
            Some(t) => take(&mut state, t, &mut path),
            None => {
                deadlocked = !state.all_terminated();
                break;
            }
        }
    }
    if deadlocked {
        found.insert(ViolationKind::Deadlock);
    }
    Ok(RunDocument {
        scenario: scenario.name.clone(),
        trace: kernel.to_trace(&path),
        violations: found.into_iter().collect(),
        terminated: state.all_terminated(),
        deadlocked,
    })
}

/// Replays `trace`, recording each step and the acted-on mechanism's state.
pub fn replay_listing(
    scenario: &Scenario,
    trace: &Trace,
    expected: Option<ViolationKind>,
) -> Result<ReplayDocument, KernelError> {
    let kernel = Kernel::new(scenario);
    let mut state = kernel.initial_state();
    let mut steps = Vec::new();
    for (index, event) in trace.events.iter().enumerate() {
        let choice = kernel.resolve(index, event)?;
        state = kernel
            .step(&state, &choice)
            .map_err(|_| KernelError::NotEnabledAtStep { index, event: event.to_string() })?;
        steps.push(ReplayStep {
            index,
            event: event.to_string(),
            mechanism_state: choice.mechanism.map(|m| state.mechanisms[m].to_string()),
        });
    }
    let violations: Vec<ViolationKind> = recheck(scenario, trace)?.into_iter().collect();
    let confirmed = expected.as_ref().map(|k| violations.contains(k));
    Ok(ReplayDocument {
        scenario: scenario.name.clone(),
        steps,
        final_state_hash: state.hash_hex(),
        violations,
        expected,
        confirmed,
    })
}
