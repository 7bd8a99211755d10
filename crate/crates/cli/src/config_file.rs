//! `--config FILE` support.
//!
//! The file holds one `key = value` per line (`#` starts a comment). Each
//! entry becomes `--key value` inserted right after the subcommand, ahead of
//! the user's own flags, so anything given explicitly overrides it.

use std::ffi::OsString;
use std::path::Path;

use gcnad::{Error, Result};

pub fn parse(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad key '{key}'"),
            });
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

/// Flags for one entry. Boolean switches use `true`/`false`.
fn to_flags(key: &str, value: &str) -> Vec<OsString> {
    match value {
        "true" => vec![format!("--{key}").into()],
        "false" => vec![],
        _ => vec![format!("--{key}").into(), value.into()],
    }
}

/// Remove `--config FILE` from `args` and splice the file's flags in after
/// the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| Error::Config("--config needs a file".into()))?;
            config = Some(path);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(OsString::from(p));
        } else {
            out.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(out);
    };
    let entries = parse(Path::new(&path))?;
    // program name, then global flags, then the subcommand
    let sub = out
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(out.len());
    let injected: Vec<OsString> = entries.iter().flat_map(|(k, v)| to_flags(k, v)).collect();
    out.splice(sub..sub, injected);
    Ok(out)
}
