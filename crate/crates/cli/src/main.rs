use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hsm_cli::{demos, exit_code, parse_definition, parse_seed, registry, EXIT_ERROR, EXIT_ISSUES};
use hsm_core::definition::{build_with, export_dot, lint_with, BuildError, FsmDefinition};
use hsm_core::{Blackboard, CancelToken, Value};
use hsm_monitor::{serve_with, Registry, ServeConfig};

#[derive(Parser)]
#[command(name = "hsm", version, about = "Run, check and export hierarchical state machines")]
struct Cli {
    #[arg(long, value_enum, global = true, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(level: LogLevel) -> Self {
        match level {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute a machine and print its final outcome
    Run(RunArgs),
    /// Print every static issue as `CODE location: message`
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Write the machine as a Graphviz DOT graph
    ExportDot {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the embedded demos
    ListDemos,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Definition document to load
    #[arg(long)]
    definition: Option<PathBuf>,
    /// Embedded demo to load (see list-demos)
    #[arg(long)]
    demo: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Serve live snapshots on this address while running
    #[arg(long, value_name = "HOST:PORT")]
    serve: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    rate_hz: f64,
    /// Seed the blackboard; the value is parsed as JSON, else taken as a string
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_seed)]
    seeds: Vec<(String, Value)>,
    /// Directory with a viewer bundle, served at `/` together with --serve
    #[arg(long)]
    viewer_dir: Option<PathBuf>,
    /// Write the outcome line here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // clap would exit 2 on usage errors, which reads as "aborted"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_ERROR as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level.into())
        .format_timestamp_millis()
        .init();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { source } => cmd_validate(&source),
        Command::ExportDot { source, out } => cmd_export_dot(&source, out.as_deref()),
        Command::ListDemos => cmd_list_demos(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn load(source: &Source) -> Result<FsmDefinition> {
    let (origin, text) = match (&source.definition, &source.demo) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            (path.display().to_string(), text)
        }
        (None, Some(name)) => match demos::find(name) {
            Some(demo) => (format!("demo {name}"), demo.text.to_owned()),
            None => bail!("unknown demo `{name}`; try list-demos"),
        },
        (None, None) => unreachable!("clap requires a source"),
    };
    parse_definition(&text).with_context(|| origin)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let def = load(&args.source)?;
    let machine = match build_with(&def, &registry()) {
        Ok(machine) => Arc::new(machine),
        Err(BuildError::LintFailed(issues)) => {
            for issue in &issues {
                eprintln!("{issue}");
            }
            bail!("definition has {} issue(s)", issues.len());
        }
        Err(err) => return Err(err.into()),
    };

    let blackboard = Blackboard::new();
    for (key, value) in args.seeds {
        blackboard.set(key, value)?;
    }

    let token = CancelToken::new();
    {
        let token = token.clone();
        ctrlc::set_handler(move || {
            log::warn!("interrupted, canceling");
            token.cancel();
        })
        .context("cannot install the interrupt handler")?;
    }

    let server = match &args.serve {
        Some(address) => {
            let reg = Registry::new();
            reg.register_tree(&machine)?;
            let config = ServeConfig {
                rate_hz: args.rate_hz,
                static_dir: args.viewer_dir,
            };
            let handle = serve_with(reg, address, config)?;
            eprintln!("monitor at http://{}/", handle.local_addr());
            Some(handle)
        }
        None => None,
    };

    let outcome = machine.execute(&blackboard, &token);
    if let Some(server) = server {
        server.publish_now();
        server.shutdown();
    }
    let outcome = outcome?;
    emit(args.out.as_deref(), &format!("{outcome}\n"))?;
    Ok(exit_code(outcome.as_str()))
}

fn cmd_validate(source: &Source) -> Result<i32> {
    let def = load(source)?;
    let issues = lint_with(&def, &registry());
    let mut stdout = io::stdout().lock();
    for issue in &issues {
        writeln!(stdout, "{issue}")?;
    }
    Ok(if issues.is_empty() { 0 } else { EXIT_ISSUES })
}

fn cmd_export_dot(source: &Source, out: Option<&Path>) -> Result<i32> {
    let def = load(source)?;
    emit(out, &export_dot(&def))?;
    Ok(0)
}

fn cmd_list_demos() -> Result<i32> {
    let mut stdout = io::stdout().lock();
    for demo in demos::DEMOS {
        writeln!(stdout, "{}", demo.name)?;
        log::info!("{}: {}", demo.name, demo.summary);
    }
    Ok(0)
}
