use std::sync::{Mutex, OnceLock};

use log::{Level, LevelFilter, Log, Metadata, Record};

/// Forwards records to stderr and keeps every warning for the run manifest.
pub struct CaptureLogger {
    quiet: bool,
    warnings: Mutex<Vec<String>>,
}

impl Log for CaptureLogger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= Level::Info
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        if record.level() <= Level::Warn {
            if let Ok(mut w) = self.warnings.lock() {
                w.push(format!("{}", record.args()));
            }
        }
        if !self.quiet {
            eprintln!("[{}] {}", record.level(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: OnceLock<CaptureLogger> = OnceLock::new();

/// Installs the capture logger once per process; later calls reuse it.
pub fn install(quiet: bool) -> &'static CaptureLogger {
    let logger = LOGGER.get_or_init(|| CaptureLogger {
        quiet,
        warnings: Mutex::new(Vec::new()),
    });
    if log::set_logger(logger).is_ok() {
        log::set_max_level(LevelFilter::Info);
    }
    logger
}

impl CaptureLogger {
    /// Warnings logged so far, in order.
    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().map(|w| w.clone()).unwrap_or_default()
    }
}
