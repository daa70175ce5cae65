//! Error classes and their exit codes.

use std::fmt;

use spikepwl::hw::HwError;
use spikepwl::learning::LearningError;
use spikepwl::network::NetworkError;
use spikepwl::search::SearchError;
use spikepwl::{FixedError, NeuronError};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or input files; exit code 2.
    Config(String),
    /// The simulation diverged or produced no usable result; exit code 3.
    Numeric(String),
    /// The requested hardware does not fit; exit code 4.
    Infeasible(String),
    /// Writing artifacts failed; exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Numeric(m) => write!(f, "numeric: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<NeuronError> for CliError {
    fn from(e: NeuronError) -> Self {
        match e {
            NeuronError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FixedError> for CliError {
    fn from(e: FixedError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Neuron(n) => n.into(),
            SearchError::InsufficientSamples { .. } | SearchError::DivisionGuard | SearchError::NoSpikeFound { .. } => {
                CliError::Numeric(e.to_string())
            }
            SearchError::Io(_) | SearchError::Csv(_) | SearchError::Json(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Neuron(n) => n.into(),
            NetworkError::NonFinite { .. }
            | NetworkError::EmptyReference
            | NetworkError::NoPeak
            | NetworkError::TooShort { .. } => CliError::Numeric(e.to_string()),
            NetworkError::Io(_) | NetworkError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<HwError> for CliError {
    fn from(e: HwError) -> Self {
        match e {
            HwError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            HwError::NonFiniteInput { .. } => CliError::Numeric(e.to_string()),
            HwError::Io(_) | HwError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<LearningError> for CliError {
    fn from(e: LearningError) -> Self {
        match e {
            LearningError::Neuron(n) => n.into(),
            LearningError::NoFiring { .. } => CliError::Numeric(e.to_string()),
            LearningError::Io(_) | LearningError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
