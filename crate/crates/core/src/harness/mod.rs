//! Drives a whole topology in one process: configuration, deterministic
//! delivery, and scripted scenarios with checkable transcripts.

pub mod config;
pub mod scenario;
pub mod topology;

pub use config::{parse_mapping, render_mapping, ConfigError, TopologyConfig};
pub use scenario::{Scenario, Step, StepOutcome, StepRecord, Transcript};
pub use topology::{Topology, TraceEvent, TraceKind, OPERATOR};
