use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unit violation in `{key}`: {message}")]
    Unit { key: String, message: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("training failed: {0}")]
    Training(String),
    #[error("plot data: {0}")]
    Plot(String),
}

impl HarnessError {
    /// Stable name of the error class, printed by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            HarnessError::Config(ConfigError::Parse(_)) => "ParseError",
            HarnessError::Config(ConfigError::Schema(_)) => "SchemaViolation",
            HarnessError::Config(ConfigError::Unit { .. }) => "UnitViolation",
            HarnessError::Config(ConfigError::Io(_)) | HarnessError::Io(_) => "IoError",
            HarnessError::Csv(_) => "CsvError",
            HarnessError::Training(_) => "TrainingDivergence",
            HarnessError::Plot(_) => "PlotDataError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            "ParseError" => 2,
            "SchemaViolation" => 3,
            "UnitViolation" => 4,
            "IoError" => 5,
            "CsvError" => 6,
            "TrainingDivergence" => 7,
            _ => 8,
        }
    }
}
