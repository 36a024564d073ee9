//! Command-line front end for the atom-mirror models: reads a JSON run
//! configuration and writes CSV/JSON (and optionally SVG) results.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::Outcome;
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] atom_mirror::Error),
}

#[derive(Debug, Parser)]
#[command(name = "sim", version, about = "Single atom in front of a distant mirror")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe-frequency spectrum and line-width extraction.
    Spectrum(RunArgs),
    /// Synthetic mirror scan with fringe fits.
    Scan(RunArgs),
    /// Grid comparison of the cavity and boundary-QED transmission.
    Equivalence(RunArgs),
    /// Monte-Carlo aberration averages against the closed forms.
    Aberration(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the main grid size of the command: detuning points,
    /// scan points, φ points of the equivalence grid, or Monte-Carlo samples.
    #[arg(long)]
    pub points: Option<usize>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Spectrum(a) | Command::Scan(a) | Command::Equivalence(a) | Command::Aberration(a) => a,
        }
    }
}

/// Loads the configuration, applies flag overrides and runs the command.
pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let args = command.args();
    let mut config = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.points {
        match command {
            Command::Spectrum(_) => config.detuning_points = n,
            Command::Scan(_) => config.scan_points = n,
            Command::Equivalence(_) => config.equivalence.phi_points = n,
            Command::Aberration(_) => config.mc_samples = n,
        }
        config.validate()?;
    }
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let out = args.out.as_path();
    Ok(match command {
        Command::Spectrum(_) => commands::spectrum(&config, out)?.1,
        Command::Scan(_) => commands::scan(&config, out)?.1,
        Command::Equivalence(_) => commands::equivalence(&config, out)?.1,
        Command::Aberration(_) => commands::aberration(&config, out)?.1,
    })
}

/// 0 on success, 1 for invalid input or a failed computation, 2 when a
/// numerical check did not pass.
pub fn exit_code(result: &Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 2,
        Err(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(config: PathBuf, out: PathBuf) -> RunArgs {
        RunArgs {
            config,
            out,
            seed: None,
            points: None,
        }
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"epsilon": 2.0}"#).unwrap();
        let r = run(&Command::Spectrum(args(bad, dir.path().join("o"))));
        assert!(matches!(r, Err(CliError::Config(_))));
        assert_eq!(exit_code(&r), 1);

        let missing = run(&Command::Scan(args(dir.path().join("nope.json"), dir.path().join("o"))));
        assert_eq!(exit_code(&missing), 1);

        let good = dir.path().join("good.json");
        std::fs::write(&good, "{}").unwrap();
        let r = run(&Command::Equivalence(args(good, dir.path().join("o"))));
        assert_eq!(exit_code(&r), 0);

        let failed = Ok(Outcome {
            passed: false,
            files: vec![],
        });
        assert_eq!(exit_code(&failed), 2);
    }

    #[test]
    fn points_override_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.json");
        std::fs::write(&good, "{}").unwrap();
        let mut a = args(good.clone(), dir.path().join("o"));
        a.points = Some(0);
        assert_eq!(exit_code(&run(&Command::Aberration(a))), 1);
        let mut a = args(good, dir.path().join("o"));
        a.points = Some(16);
        let out = run(&Command::Scan(a)).unwrap();
        let csv = std::fs::read_to_string(&out.files[0]).unwrap();
        assert_eq!(csv.lines().count(), 17);
    }

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from(["sim", "scan", "--config", "c.json", "--out", "o", "--seed", "4"]).unwrap();
        match cli.command {
            Command::Scan(a) => {
                assert_eq!(a.seed, Some(4));
                assert_eq!(a.points, None);
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["sim", "plot", "--config", "c", "--out", "o"]).is_err());
    }
}
