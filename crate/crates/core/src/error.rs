use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("incommensurate parameters: {0}")]
    Incommensurate(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("unpaired families: synthesis has {synth} elements, analysis has {anal}")]
    Unpaired { synth: usize, anal: usize },
    #[error("dense cap exceeded: L = {len} > {cap}")]
    CapExceeded { len: usize, cap: usize },
    #[error("painless condition violated: window length {c} exceeds 1/b = {inv_b}")]
    NotPainless { c: f64, inv_b: f64 },
    #[error("invalid sweep spec: {0}")]
    Spec(String),
    #[error("spec hash mismatch: table has {found}, spec hashes to {expected}")]
    SpecHashMismatch { expected: String, found: String },
    #[error("malformed table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// True for errors caused by parameters that do not fit the grid.
    pub fn is_incommensurate(&self) -> bool {
        matches!(self, LabError::Incommensurate(_))
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
