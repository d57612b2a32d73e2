//! Batch command-line harness: `validate`, `run` and `explain`.
//!
//! Exit status is 0 on success, 1 on a domain failure (diagnostics, a fatal
//! op, no eligible store) and 2 when an input file or flag is unusable.

pub mod workload;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::placement::{self, PolicyError};
use crate::schema::{SchemaError, SchemaFile, SchemaRegistry, StoreKind};

pub use workload::{InputError, LoadedScript, OpReport, OpStatus, PlacementReport, RunReport, StoreSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "locorm", version, about = "Location-aware ORM harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a schema file and print one line per diagnostic.
    Validate { schema: PathBuf },
    /// Execute a workload script and write its JSON report.
    Run {
        script: PathBuf,
        /// Write the report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Sleep for injected delays and measure real latency.
        #[arg(long)]
        measure_wall_clock: bool,
    },
    /// Print the placement cost table for a payload of the given entity.
    Explain {
        script: PathBuf,
        #[arg(long)]
        entity: String,
        #[arg(long)]
        payload: u64,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Validate { schema } => cmd_validate(&schema, out, err),
        Command::Run {
            script,
            report,
            measure_wall_clock,
        } => cmd_run(&script, report.as_deref(), measure_wall_clock, out, err),
        Command::Explain {
            script,
            entity,
            payload,
        } => cmd_explain(&script, &entity, payload, out, err),
    }
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "cannot read {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let file = match SchemaFile::parse(&text) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "cannot parse {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let (registry, errors) = file.register_all();
    let diagnostics = registry.validate();
    for e in &errors {
        let line = match e {
            SchemaError::DuplicateEntity(name) => format!("ERROR {name}: entity is already registered"),
            SchemaError::InvalidDescriptor { entity, detail } => format!("ERROR {entity}: {detail}"),
            SchemaError::DuplicateLocation(loc) => format!("ERROR {loc}: store is already registered"),
        };
        let _ = writeln!(out, "{line}");
    }
    for d in &diagnostics {
        let _ = writeln!(out, "{d}");
    }
    if errors.is_empty() && diagnostics.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

pub fn cmd_run(
    script: &Path,
    report_path: Option<&Path>,
    wall_clock: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let loaded = match LoadedScript::load(script) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_INPUT;
        }
    };
    let report = match workload::run(&loaded, wall_clock) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_INPUT;
        }
    };
    let body = report.to_json_pretty();
    match report_path {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &body) {
                let _ = writeln!(err, "cannot write {}: {e}", p.display());
                return EXIT_INPUT;
            }
        }
        None => {
            let _ = out.write_all(body.as_bytes());
        }
    }
    if let Some(failed) = report.ops.iter().find(|o| o.status == OpStatus::Error) {
        let _ = writeln!(
            err,
            "op {} ({}) failed: {}",
            failed.index,
            failed.op,
            failed.error.as_deref().unwrap_or("")
        );
        return EXIT_FAILURE;
    }
    EXIT_OK
}

pub fn cmd_explain(script: &Path, entity: &str, payload: u64, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = match LoadedScript::load(script) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_INPUT;
        }
    };
    let Some(descriptor) = loaded.registry.entity(entity) else {
        let _ = writeln!(err, "unknown entity {entity}");
        return EXIT_INPUT;
    };
    let metrics = loaded.initial_metrics();
    let weights = loaded.script.policy;

    let mut candidates = SchemaRegistry::new();
    let mut stores: Vec<_> = loaded.registry.stores().to_vec();
    stores.sort_by(|a, b| a.location.cmp(&b.location));
    for s in &stores {
        if s.kind == StoreKind::Embedded {
            candidates.register_store(s.clone()).expect("locations are unique");
        }
    }
    let decision = placement::choose_location(&candidates, descriptor, payload, &metrics, &weights);
    let decision = match decision {
        Ok(d) => Some(d),
        Err(PolicyError::NoEligibleStore(_)) => None,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_INPUT;
        }
    };
    for s in &stores {
        let line = match (&decision, s.kind) {
            (_, StoreKind::External) => format!("{}\t-\tineligible: external", s.location),
            (Some(d), _) if d.breakdowns.contains_key(&s.location) => {
                let b = &d.breakdowns[&s.location];
                let mark = if d.chosen == s.location { "\t*" } else { "" };
                format!(
                    "{}\t{:.6}\ttransfer={:.6} load={:.6} clients={:.6} latency={:.6}{mark}",
                    s.location,
                    d.scores[&s.location],
                    b.transfer,
                    b.load,
                    b.clients,
                    b.latency
                )
            }
            _ => format!("{}\t-\tineligible: confidentiality", s.location),
        };
        let _ = writeln!(out, "{line}");
    }
    match decision {
        Some(_) => EXIT_OK,
        None => {
            let _ = writeln!(err, "no eligible store for {entity}");
            EXIT_FAILURE
        }
    }
}
