//! `metanc` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 divergence, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metanc::config::RunConfig;
use metanc::harness::{
    diversity_study, run_scenario, write_diversity_csv, write_report_csv, write_summary_csv, write_table_csv,
    write_training_log_csv,
};
use metanc::meta::meta_train;
use metanc::paths::{
    load_ir, magnitude_db, save_ir, save_ir_wav, synth_path, FrequencyGrid,
};
use metanc::Error;

#[derive(Parser, Debug)]
#[command(name = "metanc", version, about = "Feedforward ANC with online secondary-path modeling and meta-learned initialization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the root seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppresses progress messages.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learns (Φ, Ψ) from the `[[train]]` pairs.
    MetaTrain(Common),
    /// Simulates the `[scenario]` and writes report CSVs.
    Run(Common),
    /// Runs the training-set diversity study.
    Diversity(Common),
    /// Impulse-response tools.
    #[command(subcommand)]
    Paths(PathsCommand),
}

#[derive(Subcommand, Debug)]
enum PathsCommand {
    /// Writes one surrogate impulse response.
    Synth {
        #[arg(long)]
        taps: usize,
        #[arg(long)]
        decay: f64,
        #[arg(long)]
        delay: usize,
        #[arg(long)]
        seed: u64,
        /// Output directory; the file is `synth_<seed>.txt`.
        #[arg(long)]
        out: PathBuf,
        /// Also write `synth_<seed>.wav`.
        #[arg(long)]
        wav: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Prints length, energy and the magnitude response of an IR file.
    Inspect {
        file: PathBuf,
        /// Also write `inspect.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Contract(_) => 2,
        Error::Diverged { .. } | Error::InnerDiverged { .. } | Error::ScenarioDiverged { .. } => 3,
        Error::NotFound(_) | Error::Io { .. } | Error::Malformed { .. } | Error::NonFinite { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("metanc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Command) -> metanc::Result<()> {
    match cmd {
        Command::MetaTrain(c) => cmd_meta_train(&c),
        Command::Run(c) => cmd_run(&c),
        Command::Diversity(c) => cmd_diversity(&c),
        Command::Paths(PathsCommand::Synth { taps, decay, delay, seed, out, wav, quiet }) => {
            ensure_dir(&out)?;
            let path = synth_path(seed, taps, decay, delay).map_err(to_config)?;
            let txt = out.join(format!("synth_{seed}.txt"));
            save_ir(&path, &txt)?;
            if wav {
                save_ir_wav(&path, out.join(format!("synth_{seed}.wav")))?;
            }
            note(quiet, &format!("wrote {}", txt.display()));
            Ok(())
        }
        Command::Paths(PathsCommand::Inspect { file, out, quiet }) => cmd_inspect(&file, out.as_deref(), quiet),
    }
}

fn note(quiet: bool, msg: &str) {
    if !quiet {
        eprintln!("{msg}");
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::Contract(msg) => Error::Config(msg),
        other => other,
    }
}

fn ensure_dir(dir: &Path) -> metanc::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load(c: &Common) -> metanc::Result<(RunConfig, PathBuf)> {
    let (cfg, dir) = RunConfig::from_file(&c.config)?;
    ensure_dir(&c.out)?;
    Ok((cfg.with_seed(c.seed), dir))
}

fn cmd_meta_train(c: &Common) -> metanc::Result<()> {
    let (cfg, dir) = load(c)?;
    let meta = cfg.meta()?;
    let pairs = cfg.training_pairs(&dir)?;
    note(c.quiet, &format!("meta-training on {} pairs for {} epochs", pairs.len(), meta.epochs));
    let trained = meta_train(&pairs, &meta)?;
    let init_path = c.out.join("meta_init.txt");
    trained.init.save(&init_path)?;
    write_training_log_csv(&trained.log, c.out.join("meta_train_log.csv"))?;
    note(c.quiet, &format!("wrote {}", init_path.display()));
    Ok(())
}

fn cmd_run(c: &Common) -> metanc::Result<()> {
    let (cfg, dir) = load(c)?;
    let scenario = cfg.scenario(&dir)?;
    note(c.quiet, &format!("running {} phase(s)", scenario.phases.len()));
    let (report, failure) = match run_scenario(&scenario) {
        Ok(r) => (r, None),
        Err(Error::ScenarioDiverged { at_sec, partial }) => {
            let report = (*partial).clone();
            (report, Some(Error::ScenarioDiverged { at_sec, partial }))
        }
        Err(e) => return Err(e),
    };
    write_report_csv(&report, c.out.join("report.csv"))?;
    write_summary_csv(&report, c.out.join("summary.csv"))?;
    match failure {
        Some(e) => Err(e),
        None => {
            note(c.quiet, &format!("wrote {}", c.out.display()));
            Ok(())
        }
    }
}

fn cmd_diversity(c: &Common) -> metanc::Result<()> {
    let (cfg, dir) = load(c)?;
    let meta = cfg.meta()?;
    let (sets, heldout, template) = cfg.diversity(&dir)?;
    note(c.quiet, &format!("{} sets, {} held-out pairs", sets.len(), heldout.len()));
    // Set-composition problems such as overlap are configuration errors.
    let rows = diversity_study(&sets, &heldout, &meta, &template).map_err(to_config)?;
    write_diversity_csv(&rows, c.out.join("diversity.csv"))?;
    for row in &rows {
        row.init.save(c.out.join(format!("meta_init_{}.txt", row.set)))?;
    }
    note(c.quiet, &format!("wrote {}", c.out.join("diversity.csv").display()));
    Ok(())
}

fn cmd_inspect(file: &Path, out: Option<&Path>, quiet: bool) -> metanc::Result<()> {
    let path = load_ir(file)?;
    let grid = FrequencyGrid::diversity();
    let mags = magnitude_db(&path, &grid)?;
    println!("file      {}", file.display());
    println!("taps      {}", path.len());
    println!("l2_norm   {:.12}", path.ir.norm());
    println!("freq_hz   magnitude_db");
    for (f, m) in grid.freqs().iter().zip(&mags) {
        println!("{f:9.3} {m:.6}");
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let csv_path = dir.join("inspect.csv");
        let rows = grid.freqs().iter().zip(&mags).map(|(f, m)| vec![f.to_string(), m.to_string()]);
        write_table_csv(&csv_path, &["freq_hz", "magnitude_db"], rows)?;
        note(quiet, &format!("wrote {}", csv_path.display()));
    }
    Ok(())
}
