//! `key = value` config files merged into the command line.
//!
//! Each entry becomes a long flag placed right after the verb, so flags
//! given on the command line come later and win. A value of `true` becomes
//! a bare switch and `false` drops the entry; other values are split on
//! whitespace into the flag's arguments.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::{read_text, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// keys may use `_` or `-`.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::parse(path, i + 1, format!("invalid key {key:?}")));
        }
        out.push(ConfigEntry { key, value: value.trim().to_string() });
    }
    Ok(out)
}

/// Command-line arguments for the entries, in file order.
pub fn entries_to_args(entries: &[ConfigEntry]) -> Vec<OsString> {
    let mut args = Vec::new();
    for e in entries {
        match e.value.as_str() {
            "false" => {}
            "true" => args.push(format!("--{}", e.key).into()),
            v => {
                args.push(format!("--{}", e.key).into());
                args.extend(v.split_whitespace().map(OsString::from));
            }
        }
    }
    args
}

/// Removes `--config PATH` (or `--config=PATH`) from `argv` and splices the
/// file's entries in right after the verb. Returns `argv` untouched when no
/// config is given.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config: Option<PathBuf> = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--" {
            rest.push(arg);
            rest.extend(it.by_ref());
            break;
        }
        if s == "--config" {
            let path = it.next().ok_or_else(|| Error::Usage("--config needs a file".into()))?;
            config = Some(path.into());
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let extra = entries_to_args(&parse_config(&read_text(&path)?, &path)?);
    // argv[0] is the program, the first argument not starting with `-` the verb
    let verb = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .ok_or_else(|| Error::Usage("--config given without a command".into()))?;
    rest.splice(verb..verb, extra);
    Ok(rest)
}
