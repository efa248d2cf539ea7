use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}line {line}: {msg}", source_prefix(.file))]
    Parse {
        file: Option<PathBuf>,
        line: usize,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("no rotation detected: all samples of link {0} fall in one azimuth bin")]
    NoRotation(String),

    #[error("schema error at `{path}`: {msg}")]
    Schema { path: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn source_prefix(file: &Option<PathBuf>) -> String {
    match file {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: None,
            line,
            msg: msg.into(),
        }
    }

    /// Attach a file name to a parse error raised from in-memory text.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, msg, .. } => Error::Parse {
                file: Some(path.into()),
                line,
                msg,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_file_and_line() {
        let e = Error::parse(12, "bad azimuth");
        assert_eq!(e.to_string(), "line 12: bad azimuth");
        assert_eq!(e.in_file("a.mms").to_string(), "a.mms: line 12: bad azimuth");
    }

    #[test]
    fn in_file_leaves_other_errors_alone() {
        let e = Error::invalid("nope").in_file("a.mms");
        assert_eq!(e.to_string(), "invalid input: nope");
    }

    #[test]
    fn schema_and_io_messages() {
        let e = Error::Schema { path: "power_map.grid".into(), msg: "missing field".into() };
        assert_eq!(e.to_string(), "schema error at `power_map.grid`: missing field");
        let io = Error::io("x.json", std::io::Error::new(std::io::ErrorKind::NotFound, "gone"));
        assert_eq!(io.to_string(), "x.json: gone");
    }
}
