//! Std companion to `sfrom-core`: binary artifacts, study configuration,
//! offline/online study orchestration and report files.

pub mod config;
pub mod io;
pub mod study;

pub use config::{Parameters, Regime, StudyConfig, StudyKind, TestCase};
pub use study::{run_study, MetricsRecord, StudyError, StudyOutcome, StudyReport};

use std::time::Instant;

/// Monotonic wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    start: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl sfrom_core::Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}
