use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A device/app power profile breaks the measured ordering
    /// co-run > app > train > idle > 0.
    #[error("profile {device}/{app}: power ordering violated (corun {corun} W, app {app_w} W, train {train} W, idle {idle} W)")]
    PowerOrdering {
        device: String,
        app: String,
        corun: f64,
        app_w: f64,
        train: f64,
        idle: f64,
    },

    #[error("profile {device}/{app}: training duration must be at least one slot")]
    ZeroDuration { device: String, app: String },

    #[error("config: {key} out of {expected} (got {got})")]
    ConfigRange {
        key: &'static str,
        expected: &'static str,
        got: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("device table line {line}: {msg}")]
    Table { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model state: {0}")]
    Model(String),

    #[error("vector length mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("offline instance: {0}")]
    Offline(String),

    #[error("supports at most {max} users, got {got}")]
    TooManyUsers { max: usize, got: usize },

    #[error("task: {0}")]
    Task(String),
}
