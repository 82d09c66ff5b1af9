use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two grids or sequences that must agree in shape do not.
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A class id (or raw pixel value) is not below the class count.
    /// `position` is `(x, y)` when the value came from a grid.
    ClassIdOutOfRange {
        value: u32,
        num_classes: u32,
        position: Option<(usize, usize)>,
    },
    ClassCountMismatch {
        left: u32,
        right: u32,
    },
    InvalidParameter(&'static str),
    AllClassesUndefined,
    EmptyInput,
    /// The ground truth has no positive pixels and the empty-GT policy is `Skip`.
    EmptyGroundTruth,
    MissingIntermediates,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::ClassIdOutOfRange {
                value,
                num_classes,
                position: Some((x, y)),
            } => write!(
                f,
                "class id {value} at ({x}, {y}) is out of range for {num_classes} classes"
            ),
            Error::ClassIdOutOfRange {
                value,
                num_classes,
                position: None,
            } => write!(
                f,
                "class id {value} is out of range for {num_classes} classes"
            ),
            Error::ClassCountMismatch { left, right } => {
                write!(f, "class count mismatch: {left} vs {right}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::AllClassesUndefined => f.write_str(
                "IoU is undefined for every class (no pixels in prediction or ground truth)",
            ),
            Error::EmptyInput => f.write_str("empty input"),
            Error::EmptyGroundTruth => f.write_str("ground truth has no positive pixels"),
            Error::MissingIntermediates => f.write_str("result carries no intermediate masks"),
        }
    }
}

impl core::error::Error for Error {}
