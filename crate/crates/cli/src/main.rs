use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dyad_core::classifiers::ModelFamily;
use dyad_core::data::{corpus_stats, load_corpus, save_corpus, Role};
use dyad_core::experiment::{preset, rerender, run_experiment, ExperimentConfig};
use dyad_core::fusion::FusionMode;
use dyad_core::synth::{generate_corpus, RoleSignal, SynthParams};
use dyad_core::Error;

#[derive(Parser)]
#[command(name = "dyad", version, about = "Valence prediction for couples from own and partner features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a JSONL feature file and print per-role counts.
    Validate { features: PathBuf },
    /// Write a synthetic feature file and a `.params.json` sidecar.
    Synth(SynthArgs),
    /// Run nested cross-validation as described by a config file.
    Run(RunArgs),
    /// Re-render summaries of a run directory from its stored reports.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct SynthArgs {
    /// Named preset (`paper`).
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with full generator parameters.
    #[arg(long, conflicts_with = "preset")]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    couples: Option<usize>,
    #[arg(long)]
    negative_rate_male: Option<f64>,
    #[arg(long)]
    negative_rate_female: Option<f64>,
    /// Own-feature signal for both roles.
    #[arg(long)]
    self_signal: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    k_outer: Option<usize>,
    #[arg(long)]
    k_inner: Option<usize>,
    /// Comma-separated roles (`m`, `f`).
    #[arg(long, value_delimiter = ',')]
    roles: Option<Vec<String>>,
    /// Comma-separated fusion modes, e.g. `baseline,with_partner_both`.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Comma-separated families (`linear_svm`, `rbf_svm`, `random_forest`).
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::NonConvergence { .. } => 3,
        _ => 1,
    }
}

fn parse_list<T>(items: &[String], what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, Error> {
    items
        .iter()
        .map(|s| parse(s.trim()).ok_or_else(|| Error::Config(format!("unknown {what} `{s}`"))))
        .collect()
}

fn validate(path: &Path) -> Result<(), Error> {
    let corpus = load_corpus(path)?;
    print!("{}", corpus_stats(&corpus)?);
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.params.json"))
}

fn synth(args: &SynthArgs) -> Result<(), Error> {
    let mut p = match (&args.preset, &args.params) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        (None, None) => SynthParams::default(),
    };
    if let Some(s) = args.seed {
        p.seed = s;
    }
    if let Some(n) = args.couples {
        p.n_couples = n;
    }
    if let Some(r) = args.negative_rate_male {
        p.negative_rate_male = r;
    }
    if let Some(r) = args.negative_rate_female {
        p.negative_rate_female = r;
    }
    if let Some(s) = args.self_signal {
        p.male = RoleSignal { self_signal: s, ..p.male };
        p.female = RoleSignal { self_signal: s, ..p.female };
    }
    if let Some(n) = args.noise_scale {
        p.noise_scale = n;
    }
    let corpus = generate_corpus(&p)?;
    save_corpus(&corpus, &args.out)?;
    let sidecar = sidecar_path(&args.out);
    let json = serde_json::to_string_pretty(&p).map_err(Error::from)?;
    std::fs::write(&sidecar, json + "\n").map_err(|e| Error::Io { path: sidecar, source: e })?;
    print!("{}", corpus_stats(&corpus)?);
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(t) = args.threads {
        config.threads = Some(t);
    }
    if let Some(k) = args.k_outer {
        config.k_outer = k;
    }
    if let Some(k) = args.k_inner {
        config.k_inner = k;
    }
    if let Some(r) = &args.roles {
        config.roles = parse_list(r, "role", Role::from_code)?;
    }
    if let Some(m) = &args.modes {
        config.fusion_modes = parse_list(m, "fusion mode", FusionMode::from_key)?;
    }
    if let Some(f) = &args.families {
        config.families = parse_list(f, "model family", ModelFamily::from_key)?;
    }
    let outcome = run_experiment(&config)?;
    print!("{}", outcome.summary.render());
    eprintln!("results written to {}", outcome.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Validate { features } => validate(features),
        Command::Synth(args) => synth(args),
        Command::Run(args) => run(args),
        Command::Report { dir } => rerender(dir).map(|s| print!("{}", s.render())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
