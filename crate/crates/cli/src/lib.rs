//! Command-line front end for the `sympinf` library.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

pub use config::{Cli, Command, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    #[error("tolerance check failed: {0}")]
    Tolerance(String),
    #[error(transparent)]
    Core(#[from] sympinf::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Tolerance(_) => EXIT_TOLERANCE,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Where a run's artifacts go. With no directory, only the report is
/// printed.
pub(crate) struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn new(dir: Option<&Path>) -> Result<Self, Failure> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(sympinf::Error::from)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub(crate) fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub(crate) fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        if let Some(p) = self.path(name) {
            sympinf::io::write_json(&p, value)?;
        }
        Ok(())
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SYMPINF_THREADS") {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            Failure::Validation(format!("SYMPINF_THREADS=`{v}` is not a positive integer"))
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::Validation(e.to_string()))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on validation or input errors, 2 when
/// a tolerance check fails.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(cmd)?;
    let out = Output::new(cfg.out.as_deref())?;
    out.json("config.json", &cfg)?;
    let pool = thread_pool()?;
    let report = pool.install(|| commands::dispatch(&cfg, &out))?;
    out.json("report.json", &report.body)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report.body).expect("reports serialize")
    );
    match report.failures.is_empty() {
        true => Ok(()),
        false => Err(Failure::Tolerance(report.failures.join("; "))),
    }
}
