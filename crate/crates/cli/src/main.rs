use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use offcut_cli::app::{self, CliResult, ExportTargets};
use offcut_cli::server::{self, AppState};
use offcut_core::{persist, DesignCommand, Session};

#[derive(Parser)]
#[command(name = "offcut", version, about = "Scrap-wood assembly design engine")]
struct Cli {
    /// Saw blade kerf in mm; overrides the environment and document settings.
    #[arg(long, global = true, env = "OFFCUT_KERF_MM")]
    kerf: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the local session service.
    Serve {
        #[arg(long, default_value_t = 8787)]
        port: u16,
        /// Document file; created on the first command if missing.
        #[arg(long)]
        doc: Option<PathBuf>,
    },
    /// Print violations; exit status 0 iff there are none.
    Validate { file: PathBuf },
    /// Run a command script from an empty document.
    Replay {
        script: PathBuf,
        /// Print only the state digest.
        #[arg(long)]
        digest: bool,
        /// Save the resulting document.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a cut list, plan SVGs or 1:1 overlays.
    Export {
        file: PathBuf,
        #[arg(long)]
        cutlist: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Print material usage per scrap and per assembly.
    Usage { file: PathBuf },
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Serve { port, doc } => {
            let mut session = match &doc {
                Some(path) if path.exists() => persist::load(path)?,
                _ => Session::new(),
            };
            if let Some(k) = cli.kerf.filter(|k| *k != session.document().settings.kerf_blade_mm) {
                let event = session.apply(DesignCommand::SetKerf { blade_mm: k });
                if let Some(e) = event.error {
                    eprintln!("kerf override rejected: {}", e.message);
                    return Ok(ExitCode::from(2));
                }
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| app::CliError::Io("runtime".into(), e))?;
            runtime
                .block_on(server::serve(AppState::new(session, doc), port))
                .map_err(|e| app::CliError::Io(format!("127.0.0.1:{port}").into(), e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { file } => {
            let outcome = app::validate(&app::load(&file, cli.kerf)?);
            print!("{}", outcome.report);
            Ok(if outcome.ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Replay { script, digest, out } => {
            print!("{}", app::replay(&script, digest, out.as_deref())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { file, cutlist, svg, overlay } => {
            let session = app::load(&file, cli.kerf)?;
            let targets =
                ExportTargets { cutlist: cutlist.as_deref(), svg_dir: svg.as_deref(), overlay_dir: overlay.as_deref() };
            for path in app::export(&session, &targets)? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Usage { file } => {
            print!("{}", app::usage(&app::load(&file, cli.kerf)?));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
