//! Command-line interface: `perfohom <cell|macro|direct|study|pairing>
//! --config <path> [--out <dir>] [--vtk] [--serial]`.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{run, Command, RunError, RunFlags};

use config::{CoefficientSpec, DataSpec};

#[derive(Debug, Parser)]
#[command(name = "perfohom", version, about = "Homogenization of oscillating parabolic problems in perforated domains")]
pub struct Cli {
    /// What to compute.
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write legacy VTK files for every dumped frame.
    #[arg(long)]
    pub vtk: bool,
    /// Run all stages on one thread.
    #[arg(long)]
    pub serial: bool,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

/// Makes data and table paths relative to the config file's directory.
pub fn resolve_paths(config: &mut RunConfig, base: &Path) {
    if let CoefficientSpec::Table(p) = &mut config.coefficient {
        resolve(base, p);
    }
    for d in [&mut config.macroscale.f, &mut config.macroscale.u0] {
        if let DataSpec::File(p) = d {
            resolve(base, p);
        }
    }
}

/// Parses arguments, runs, and returns the process exit code. Failures are
/// reported on `err` as `ERROR <stage> <message>` lines.
pub fn main_with_args<I, T>(args: I, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "ERROR config {}: {e}", cli.config.display());
            return 1;
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            for issue in &e.issues {
                let _ = writeln!(err, "ERROR config {issue}");
            }
            return 1;
        }
    };
    resolve_paths(&mut config, cli.config.parent().unwrap_or(Path::new(".")));
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    config.output.vtk |= cli.vtk;
    match run(cli.command, &config, RunFlags { serial: cli.serial }) {
        Ok(_) => 0,
        Err(e) => {
            let _ = writeln!(err, "ERROR {} {}", e.stage, e.message.replace('\n', " "));
            1
        }
    }
}
