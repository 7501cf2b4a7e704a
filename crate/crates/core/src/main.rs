use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mma2a::cli::{self, CliError, FileConfig, Ports, RunConfig, ValidateOptions};

#[derive(Parser)]
#[command(name = "mma2a", version, about = "Modality-aware A2A routing and its paired benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run three agents, a router and an orchestrator endpoint until Ctrl-C.
    Serve(RunArgs),
    /// Run every task under both routing modes and write the report.
    Experiment(RunArgs),
    /// Keyword vs scripted decision step, each under both routing modes.
    Ablation(RunArgs),
    /// Load and check a manifest with its knowledge base and media.
    ValidateManifest {
        /// Manifest to check; same as --manifest.
        path: Option<PathBuf>,
        #[arg(long, conflicts_with = "path")]
        manifest: Option<PathBuf>,
        /// Skip the reference category and knowledge-base sizes.
        #[arg(long)]
        any_size: bool,
    },
    /// Recompute report.md and report.json from a run directory's logs.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = mma2a::stats::DEFAULT_RESAMPLES)]
        resamples: usize,
        /// Where to write the report; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write placeholder WAV and PNG files for the manifest's media parts.
    GenerateMedia {
        #[arg(long, default_value = cli::DEFAULT_MANIFEST)]
        manifest: PathBuf,
        /// Pad every file to at least this many bytes.
        #[arg(long)]
        min_size: Option<usize>,
        /// Overwrite existing files.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with any of these settings; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Routing mode; give it twice for paired runs (baseline, then treatment).
    #[arg(long = "mode")]
    modes: Vec<String>,
    /// keyword, scripted or llm.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Priority threshold for adaptive mode, or "inf".
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// off or reference.
    #[arg(long)]
    delay_profile: Option<String>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    voice_port: Option<u16>,
    #[arg(long)]
    vision_port: Option<u16>,
    #[arg(long)]
    text_port: Option<u16>,
    #[arg(long)]
    router_port: Option<u16>,
    #[arg(long)]
    orchestrator_port: Option<u16>,
}

impl RunArgs {
    fn resolve(self, default_modes: &[&str]) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            manifest: self.manifest,
            modes: (!self.modes.is_empty()).then_some(self.modes),
            backend: self.backend,
            seed: self.seed,
            theta: self.theta,
            out: self.out,
            delay_profile: self.delay_profile,
            resamples: self.resamples,
            host: self.host,
            ports: Ports {
                voice: self.voice_port,
                vision: self.vision_port,
                text: self.text_port,
                router: self.router_port,
                orchestrator: self.orchestrator_port,
            },
        };
        RunConfig::resolve(file.merge(flags), default_modes)
    }
}

const PAIRED: &[&str] = &["text_bottleneck", "native"];

async fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Serve(args) => {
            let cfg = args.resolve(&["native"])?;
            let handle = cli::cmd_serve(&cfg).await?;
            print!("{}", handle.banner());
            tokio::signal::ctrl_c().await.map_err(|e| CliError::Runtime(e.to_string()))?;
            eprintln!("shutting down");
            handle.shutdown().await;
        }
        Command::Experiment(args) => {
            let out = cli::cmd_experiment(&args.resolve(PAIRED)?).await?;
            print!("{}", mma2a::stats::render_markdown(&out.report));
            println!("\nrun directory: {}", out.dir.display());
        }
        Command::Ablation(args) => {
            let out = cli::cmd_ablation(&args.resolve(PAIRED)?).await?;
            print!("{}", mma2a::experiment::render_ablation(&out.ablation));
            println!("\nrun directory: {}", out.dir.display());
        }
        Command::ValidateManifest { path, manifest, any_size } => {
            let manifest = path.or(manifest).unwrap_or_else(|| cli::DEFAULT_MANIFEST.into());
            println!("{}", cli::cmd_validate(&manifest, ValidateOptions { reference_counts: !any_size })?);
        }
        Command::Report { run, seed, resamples, out } => {
            let report = cli::cmd_report(&run, seed, resamples, out.as_deref())?;
            print!("{}", mma2a::stats::render_markdown(&report));
        }
        Command::GenerateMedia { manifest, min_size, force } => {
            let n = cli::cmd_generate_media(&manifest, min_size, force)?;
            println!("wrote {n} media files");
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Manifest(mma2a::benchmark::ManifestError::Invalid(problems)) => {
                    eprintln!("error: manifest is invalid:");
                    for p in problems {
                        eprintln!("  - {p}");
                    }
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
