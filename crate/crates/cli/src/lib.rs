//! Job runner for `catsim-core`: a JSON job file in, CSV/JSON results and a manifest out.

pub mod config;
pub mod error;
pub mod jobs;
pub mod logging;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use config::{parse_config, JobConfig};
use error::{CliError, CliResult};
use output::{sha256_hex, write_outputs, OutputRecord, RunManifest};

/// Environment variable that overrides the config's output directory (but not `--output-dir`).
pub const OUTPUT_DIR_ENV: &str = "CATSIM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "catsim-out";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub quiet: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
}

/// Output directory by precedence: flag, environment, config, default.
/// A relative config entry is taken relative to the config file.
fn output_dir(opts: &RunOptions, cfg: &JobConfig, base: &Path) -> PathBuf {
    if let Some(d) = &opts.output_dir {
        return d.clone();
    }
    if let Some(d) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(d);
    }
    match &cfg.output {
        Some(d) => base.join(d),
        None => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

/// Parses, executes and writes one job.
pub fn run(opts: &RunOptions) -> CliResult<RunReport> {
    let logger = logging::install(opts.quiet);
    let start = Instant::now();
    let text = std::fs::read_to_string(&opts.config).map_err(|e| CliError::io(&opts.config, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
        cfg.seed_from_default = false;
    }
    let base = opts
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let pool = match opts.threads {
        Some(0) => return Err(CliError::config("--threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::config("--threads", e.to_string()))?;
    let warn_mark = logger.warnings().len();
    let artifacts = pool.install(|| jobs::execute(&cfg, &base))?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        job: cfg.kind().name().to_string(),
        config_sha256: sha256_hex(text.as_bytes()),
        seed: cfg.seed,
        seed_from_default: cfg.seed_from_default,
        threads: pool.current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: artifacts
            .iter()
            .map(|a| OutputRecord {
                file: a.name.clone(),
                sha256: sha256_hex(&a.bytes),
            })
            .collect(),
        warnings: logger.warnings().split_off(warn_mark),
    };
    let dir = output_dir(opts, &cfg, &base);
    write_outputs(&dir, &artifacts, &manifest)?;
    Ok(RunReport {
        output_dir: dir,
        manifest,
    })
}
