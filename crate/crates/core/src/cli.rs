//! The `idg` command line.
//!
//! Exit status: 0 on success, 1 on a domain error (invalid diagram, failed
//! precondition, unreadable file), 2 on a usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::gen::{random_diagram_seeded, GenConfig};
use crate::io::{self, LoadOptions};
use crate::lottery::{statistics, value_lottery};
use crate::model::{validate, Diagram, NodeId};
use crate::report::{
    export_report_with_precision, format_significant, table, ReportFormat, DEFAULT_PRECISION,
};
use crate::solve::{alternative_statistics, solve, value_of_information};
use crate::transforms::{self, Transform};

#[derive(Debug, Parser)]
#[command(
    name = "idg",
    version,
    about = "Build, check and solve influence diagrams"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Output format: text or json.
    #[arg(long, global = true, default_value = "text", value_parser = parse_format)]
    format: ReportFormat,
    /// Rescale probability rows that are within 1e-6 of summing to one.
    #[arg(long, global = true)]
    renormalize: bool,
    /// Significant digits in text output.
    #[arg(long, global = true, default_value_t = DEFAULT_PRECISION as u64, value_parser = clap::value_parser!(u64).range(1..=17))]
    precision: u64,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
        .map_err(|e: crate::report::UnknownFormat| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every diagram invariant and list violations.
    Validate { file: PathBuf },
    /// Solve by reductions; print the optimal value, policies and
    /// per-alternative statistics.
    Solve { file: PathBuf },
    /// Reverse the arc FROM -> TO between two chance nodes.
    Reverse {
        file: PathBuf,
        from: String,
        to: String,
        /// Where to write the transformed diagram (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remove a node: barren nodes are deleted, chance and decision nodes
    /// are absorbed into the value node.
    Remove {
        file: PathBuf,
        node: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Value of letting decision TO observe FROM.
    Voi {
        file: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Value lottery under the optimal policy.
    Lottery { file: PathBuf },
    /// Certain equivalent, expected value and standard deviation per
    /// alternative of the first decision.
    Stats {
        file: PathBuf,
        #[arg(long)]
        decision: Option<String>,
    },
    /// Write a random valid diagram.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Chance nodes only.
        #[arg(long)]
        chance_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API (port from --port or $PORT, default 8080).
    #[cfg(feature = "server")]
    Serve {
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
    },
}

/// Failure carrying the exit status to report.
struct Failure(i32, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(1, e.to_string())
    }
}

/// Run the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure(1, format!("{}: {e}", path.display())))
}

fn load(path: &Path, global: &Global) -> Result<Diagram, Failure> {
    let options = LoadOptions {
        renormalize: global.renormalize,
        complete_no_forgetting: true,
        validate: true,
    };
    Ok(io::load_with(&read(path)?, options)?)
}

fn write_diagram(d: &Diagram, target: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let bytes = io::save(d);
    match target {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| Failure(1, format!("{}: {e}", path.display())))?
        }
        None => out.write_all(&bytes)?,
    }
    Ok(())
}

fn print_json(out: &mut dyn Write, value: serde_json::Value) -> Result<(), Failure> {
    writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let g = &cli.global;
    let precision = g.precision as usize;
    let num = |x: f64| format_significant(x, precision);
    match &cli.command {
        Command::Validate { file } => {
            let options = LoadOptions {
                renormalize: g.renormalize,
                complete_no_forgetting: false,
                validate: false,
            };
            let d = io::load_with(&read(file)?, options)?;
            let report = validate(&d);
            match g.format {
                ReportFormat::Json => print_json(
                    out,
                    json!({ "valid": report.is_valid(), "violations": report }),
                )?,
                ReportFormat::Text if report.is_valid() => writeln!(out, "valid")?,
                ReportFormat::Text => {
                    writeln!(out, "{} violation(s)", report.len())?;
                    for v in report.iter() {
                        writeln!(out, "  {}: {v}", v.code())?;
                    }
                }
            }
            Ok(if report.is_valid() { 0 } else { 1 })
        }
        Command::Solve { file } => {
            let s = solve(&load(file, g)?)?;
            out.write_all(&export_report_with_precision(&s, g.format, precision)?)?;
            Ok(0)
        }
        Command::Reverse {
            file,
            from,
            to,
            out: target,
        } => {
            let d = load(file, g)?;
            let reversed = transforms::reverse_arc(&d, &from.as_str().into(), &to.as_str().into())?;
            write_diagram(&reversed, target.as_deref(), out)?;
            Ok(0)
        }
        Command::Remove {
            file,
            node,
            out: target,
        } => {
            let d = load(file, g)?;
            let id = NodeId::from(node.as_str());
            let n = d
                .node(&id)
                .ok_or_else(|| Failure(1, format!("unknown node `{id}`")))?;
            let transform = if d.children(&id).is_empty() {
                Transform::RemoveBarren { node: id }
            } else if n.as_decision().is_some() {
                Transform::RemoveDecision { node: id }
            } else {
                Transform::RemoveChance { node: id }
            };
            let record = transforms::apply(&d.into(), &transform)?;
            write_diagram(&record.after, target.as_deref(), out)?;
            Ok(0)
        }
        Command::Voi { file, from, to } => {
            let d = load(file, g)?;
            let voi = value_of_information(&d, &from.as_str().into(), &to.as_str().into())?;
            match g.format {
                ReportFormat::Json => print_json(out, json!({ "value_of_information": voi }))?,
                ReportFormat::Text => writeln!(out, "value of information: {}", num(voi))?,
            }
            Ok(0)
        }
        Command::Lottery { file } => {
            let d = load(file, g)?;
            let s = solve(&d)?;
            let lottery = value_lottery(&d, &s.policies)?;
            let stats = statistics(&lottery, s.risk);
            match g.format {
                ReportFormat::Json => print_json(
                    out,
                    json!({ "atoms": lottery.atoms(), "statistics": stats }),
                )?,
                ReportFormat::Text => {
                    let mut text = String::new();
                    let atoms: Vec<Vec<String>> = lottery
                        .atoms()
                        .iter()
                        .map(|a| vec![num(a.payoff), num(a.probability)])
                        .collect();
                    table(&mut text, &["payoff", "probability"], &atoms);
                    table(
                        &mut text,
                        &["certain equivalent", "expected value", "standard deviation"],
                        &[vec![
                            num(stats.certain_equivalent),
                            num(stats.expected_value),
                            num(stats.standard_deviation),
                        ]],
                    );
                    out.write_all(text.as_bytes())?;
                }
            }
            Ok(0)
        }
        Command::Stats { file, decision } => {
            let d = load(file, g)?;
            let decision = match decision {
                Some(id) => NodeId::from(id.as_str()),
                None => d
                    .decision_order()?
                    .into_iter()
                    .next()
                    .ok_or_else(|| Failure(1, "diagram has no decisions".to_owned()))?,
            };
            let rows = alternative_statistics(&d, &decision)?;
            match g.format {
                ReportFormat::Json => print_json(out, serde_json::to_value(&rows)?)?,
                ReportFormat::Text => {
                    let cells: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.label.clone(),
                                num(r.statistics.certain_equivalent),
                                num(r.statistics.expected_value),
                                num(r.statistics.standard_deviation),
                            ]
                        })
                        .collect();
                    let mut text = format!("alternatives for {decision}\n");
                    table(
                        &mut text,
                        &[
                            "alternative",
                            "certain equivalent",
                            "expected value",
                            "standard deviation",
                        ],
                        &cells,
                    );
                    out.write_all(text.as_bytes())?;
                }
            }
            Ok(0)
        }
        Command::Gen {
            seed,
            chance_only,
            out: target,
        } => {
            let config = if *chance_only {
                GenConfig::chance_only()
            } else {
                GenConfig::default()
            };
            write_diagram(
                &random_diagram_seeded(*seed, &config),
                target.as_deref(),
                out,
            )?;
            Ok(0)
        }
        #[cfg(feature = "server")]
        Command::Serve { port } => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::service::serve(*port))?;
            Ok(0)
        }
    }
}
