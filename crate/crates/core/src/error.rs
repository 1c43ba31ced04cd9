use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported PNG format {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("{path}: corrupt image stream: {detail}")]
    Corrupt { path: PathBuf, detail: String },

    #[error("invalid parsing label {code} at pixel {index}")]
    InvalidLabel { code: u8, index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad flow magic {0:?}, expected \"PIEH\"")]
    BadMagic([u8; 4]),

    #[error("truncated flow payload: expected {expected} bytes, found {found}")]
    TruncatedFlow { expected: usize, found: usize },

    #[error("non-finite flow vector at pixel {index}")]
    NonFiniteFlow { index: usize },

    #[error("flow upsampling cannot shrink {from_w}x{from_h} to {to_w}x{to_h}")]
    Downscale {
        from_w: usize,
        from_h: usize,
        to_w: usize,
        to_h: usize,
    },

    #[error("global parsing masks overlap at pixel {index}")]
    OverlappingParsing { index: usize },

    #[error("missing warped part {0}")]
    MissingPart(&'static str),

    #[error("duplicate warped part {0}")]
    DuplicatePart(&'static str),

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("singular thin-plate system: {0}")]
    SingularTps(String),

    #[error("masked region at pixel {index} has no Dirichlet boundary")]
    NoBoundary { index: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
