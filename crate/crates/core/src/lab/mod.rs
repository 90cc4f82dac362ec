//! Ping-pong latency laboratory: configuration, measurement, statistics
//! and report generation.

pub mod config;
pub mod harness;
pub mod published;
pub mod report;
pub mod stats;
pub mod tables;

use thiserror::Error;

use crate::ros2::Ros2Error;
use crate::transport::TransportError;

pub use config::{BenchConfig, TransportKind, DEFAULT_ECHO_PORT, DEFAULT_PING_PORT};
pub use harness::{run_echo, run_pingpong, run_pingpong_with, EchoServer, EchoStats, SampleSet};
pub use published::{reproduce, PublishedInputs, TablesReport};
pub use report::{
    comparison_csv, emit_report, histogram_csv, read_report_json, ModelReport, PingReport, Report,
    ReportFormat,
};
pub use stats::{compute_stats, nearest_rank, HistogramBucket, LatencyStats};
pub use tables::{
    comparison_table, efficiency_ratio, energy_metrics, stage_total, ComparisonRow,
    ConsistencyWarning, EnergyMetrics, LatencyRow, StageRow, StageTotal,
};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("no samples to summarize")]
    EmptySampleSet,
    #[error("reference row {0:?} not found")]
    MissingReference(String),
    #[error("reference row {0:?} has a zero latency")]
    NonpositiveReference(String),
    #[error("{0} must be positive and finite")]
    NonpositiveInput(&'static str),
    #[error("peer unreachable: {consecutive} consecutive exchanges timed out after {timeout_ms} ms each")]
    PeerUnreachable { consecutive: u32, timeout_ms: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Ros2(#[from] Ros2Error),
}
