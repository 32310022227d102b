use thiserror::Error;

/// Errors raised by the settling engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid configuration at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("state leaves the invariant region at cell {cell} (t = {time} s): {detail}")]
    InvariantBreach {
        cell: usize,
        time: f64,
        detail: String,
    },

    #[error("time step {dt} s exceeds the admissible {dt_max} s")]
    StepTooLarge { dt: f64, dt_max: f64 },

    #[error("grids do not nest: {fine} cells cannot be projected onto {coarse}")]
    NonNested { fine: usize, coarse: usize },

    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
