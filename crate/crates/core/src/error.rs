use thiserror::Error;

/// Errors produced by the mapping, planning and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies behind the camera near plane (z = {z}, z_near = {z_near})")]
    BehindCamera { z: f64, z_near: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("height band [{z_min}, {z_max}] does not intersect any voxel layer")]
    EmptyBand { z_min: f64, z_max: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 1 for configuration problems, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}
