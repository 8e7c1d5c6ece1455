use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical input outside its admissible range.
    #[error("invalid value for `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// A classical trajectory left the finite numbers.
    #[error("integration blew up{} at z={z}, p={p}, t={t}", particle.map(|i| format!(" (particle {i})")).unwrap_or_default())]
    Blowup {
        z: f64,
        p: f64,
        t: f64,
        particle: Option<usize>,
    },

    /// Probability reached the absorbing layer: the grid does not contain the packet.
    #[error("absorbed probability {lost:.3e} exceeds {limit:.1e} at t={t:.3}; enlarge the grid (z_max, n_points)")]
    NormLoss { lost: f64, limit: f64, t: f64 },

    #[error("non-finite wavefunction amplitude at t={t}")]
    WavefunctionBlowup { t: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("run `{run}`: {source}")]
    Run {
        run: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        if let Error::Run { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::Blowup { .. } | Error::NormLoss { .. } | Error::WavefunctionBlowup { .. } | Error::Fit(_)
        )
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }

    /// Wrap the error with the name of the sub-run that produced it.
    pub fn in_run(self, run: impl Into<String>) -> Self {
        Error::Run {
            run: run.into(),
            source: Box::new(self),
        }
    }
}
