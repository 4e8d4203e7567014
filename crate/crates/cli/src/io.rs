use std::fs;
use std::path::{Path, PathBuf};

use cde_core::{Instance, RawInstance};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a valid instance file: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] cde_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 3 for internal invariant breaches, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        use cde_core::Error as E;
        match self {
            CliError::Core(
                E::InvariantBreach(_) | E::NoExcessBlock { .. } | E::FinalReductionFailed { .. },
            ) => 3,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn parse_instance(text: &str, path: &Path) -> CliResult<Instance> {
    let raw: RawInstance = serde_json::from_str(text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Instance::from_raw(&raw)?)
}

pub fn read_instance(path: &Path) -> CliResult<Instance> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&text, path)
}

pub fn instance_json(inst: &Instance) -> String {
    serde_json::to_string(&inst.to_raw()).expect("instance serializes")
}

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses an inclusive range written `A..B` (or a single value `A`).
pub fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: u64 = a
        .trim()
        .parse()
        .map_err(|e| format!("range start {a:?}: {e}"))?;
    let b: u64 = b
        .trim()
        .parse()
        .map_err(|e| format!("range end {b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty range {s}"));
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("5..60"), Ok((5, 60)));
        assert_eq!(parse_range("5..=60"), Ok((5, 60)));
        assert_eq!(parse_range("7"), Ok((7, 7)));
        assert!(parse_range("9..3").is_err());
        assert!(parse_range("a..3").is_err());
    }

    #[test]
    fn instance_round_trip() {
        let inst = cde_core::fixtures::four_clients_seven_packets();
        let json = instance_json(&inst);
        assert_eq!(
            json,
            r#"{"L":7,"has_sets":[[1,3,4,6,7],[1,2,3,5],[1,5,6],[3,5,6]]}"#
        );
        assert_eq!(parse_instance(&json, Path::new("-")).unwrap(), inst);
    }

    #[test]
    fn invalid_instances_exit_one() {
        let e = parse_instance(r#"{"L":2,"has_sets":[[1],[1]]}"#, Path::new("x")).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("packet 2"));
        let e = parse_instance("{", Path::new("x")).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
