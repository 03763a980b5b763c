//! Result emission: provenance envelope, CSV text, atomic file writes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::spec::ExperimentSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    seed: u64,
    spec: &'a ExperimentSpec,
    warnings: &'a [String],
    result: T,
}

pub fn json_document<T: Serialize>(spec: &ExperimentSpec, warnings: &[String], result: T) -> Result<Vec<u8>, CliError> {
    let env = Envelope { version: VERSION, seed: spec.seed, spec, warnings, result };
    let mut out = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Io(e.into()))?;
    out.push(b'\n');
    Ok(out)
}

/// Comment lines carrying version, seed and the resolved spec.
pub fn csv_preamble(spec: &ExperimentSpec, warnings: &[String]) -> Result<String, CliError> {
    let echo = serde_json::to_string(spec).map_err(|e| CliError::Io(e.into()))?;
    let mut s = format!("# version: {VERSION}\n# seed: {}\n# spec: {echo}\n", spec.seed);
    for w in warnings {
        let _ = writeln!(s, "# warning: {w}");
    }
    Ok(s)
}

pub fn csv_document(
    spec: &ExperimentSpec,
    warnings: &[String],
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<Vec<u8>, CliError> {
    let mut s = csv_preamble(spec, warnings)?;
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    Ok(s.into_bytes())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    // temp files are created 0600; match what a plain create would give
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// To `path` when given, else to stdout.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// `out.json` → `out.json.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn sibling_appends_suffix() {
        assert_eq!(sibling(Path::new("x/r.json"), "paths.csv"), PathBuf::from("x/r.json.paths.csv"));
    }
}
