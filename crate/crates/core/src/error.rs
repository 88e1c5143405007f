use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{what} contains non-finite values")]
    NonFinite { what: &'static str },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("Gauss law is infeasible on the torus: charge density has mean {mean:e}, expected zero")]
    NonzeroMean { mean: f64 },
    #[error("homogeneous Sobolev norm of negative order {order} needs a zero-mean field (mean {mean:e})")]
    HomogeneousNegativeOrder { order: f64, mean: f64 },
    #[error("Sobolev order {0} is below the supported minimum -2")]
    OrderOutOfRange(f64),
    #[error("unsupported Lebesgue exponent {0}; expected 2, 4 or infinity")]
    UnsupportedExponent(f64),
    #[error("cutoff radius must be positive and finite, got {0}")]
    InvalidCutoff(f64),
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("cutoff radius {radius} exceeds the Nyquist index {nyquist}")]
    CutoffAboveNyquist { radius: f64, nyquist: f64 },
    #[error("entropy flux needs a strictly positive density; minimum is {min:e}")]
    PositivityViolation { min: f64 },
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("cutoff radius {radius} exceeds the de-aliasing limit {limit} (= floor(N/3))")]
    DealiasingViolation { radius: f64, limit: usize },
    #[error("suspected blow-up at t = {time}: CFL condition still violated after {halvings} halvings (|rho|_inf = {linf_rho:e}, |E|_inf = {linf_e:e})")]
    BlowUpSuspected {
        time: f64,
        halvings: u32,
        linf_rho: f64,
        linf_e: f64,
    },
    #[error("state contains non-finite values at t = {time}")]
    NonFiniteState { time: f64 },
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum VerificationError {
    #[error("trajectory has {got} records, at least {needed} are required")]
    TrajectoryTooShort { got: usize, needed: usize },
    #[error("trajectory is missing the {0} diagnostic")]
    MissingDiagnostic(&'static str),
    #[error("calibration constant `{0}` is not present")]
    MissingConstant(String),
    #[error("malformed calibration file at line {line}: {reason}")]
    MalformedCalibration { line: usize, reason: String },
    #[error("sample {index} violates a >= 1, b >= 0: (a, b) = ({a}, {b})")]
    InvalidSample { index: usize, a: f64, b: f64 },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    Type {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}: `{key}`: {reason}")]
    Constraint { line: usize, key: String, reason: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
}

#[derive(Error, Debug)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a DDMX snapshot ({reason})")]
    BadSnapshot { path: String, reason: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
