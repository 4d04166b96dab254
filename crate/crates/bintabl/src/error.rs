//! Crate-wide error type with a coarse category used for CLI exit codes.

/// Failure category, mapped to process exit codes by the CLI
/// (config = 2, data = 3, numeric = 4).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {}x{} and {}x{}", left.0, left.1, right.0, right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: cell at row {row}, column {col} is not a number: {token:?}")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        token: String,
    },
    #[error("{path}: {what}")]
    Format { path: String, what: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Shape { .. } | Error::Contract(_) => Category::Numeric,
            Error::Config(_) => Category::Config,
            Error::Parse { .. } | Error::Format { .. } | Error::Io { .. } => Category::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_error_names_both_shapes() {
        let err = Error::shape("matmul", (2, 3), (2, 3));
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "{msg}");
        assert!(msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn categories() {
        assert_eq!(Error::config("x").category(), Category::Config);
        assert_eq!(Error::contract("x").category(), Category::Numeric);
        assert_eq!(
            Error::io("f", std::io::Error::other("x")).category(),
            Category::Data
        );
    }
}
