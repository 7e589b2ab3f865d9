//! `key = value` config files, merged into the argument list so that
//! command-line flags override them.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Command};

/// The `--config` value, if present.
pub fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

/// Parses the file into (key, value) pairs.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`, got `{line}`", i + 1));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        entries.push((key.to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Turns config entries into flags for `sub`. Keys that belong to another
/// subcommand are skipped so that one file can serve several commands;
/// keys unknown to every subcommand are errors.
pub fn to_flags(root: &Command, sub: &str, entries: &[(String, String)], path: &Path) -> Result<Vec<OsString>, String> {
    let target = root
        .find_subcommand(sub)
        .ok_or_else(|| format!("unknown command `{sub}`"))?;
    let mut flags = Vec::new();
    for (key, value) in entries {
        let norm = normalize(key);
        if norm == "config" {
            return Err(format!("{}: key `{key}` cannot appear in a config file", path.display()));
        }
        let find = |cmd: &Command| {
            cmd.get_arguments()
                .find(|a| a.get_long().is_some_and(|l| l.to_ascii_lowercase() == norm))
                .cloned()
        };
        let Some(arg) = find(target) else {
            if root.get_subcommands().any(|c| find(c).is_some()) {
                continue;
            }
            return Err(format!("{}: unknown key `{key}`", path.display()));
        };
        let long = arg.get_long().unwrap_or_default();
        match arg.get_action() {
            ArgAction::SetTrue => match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => flags.push(OsString::from(format!("--{long}"))),
                "false" | "no" | "0" => {}
                _ => return Err(format!("{}: key `{key}` expects true or false, got `{value}`", path.display())),
            },
            _ => flags.push(OsString::from(format!("--{long}={value}"))),
        }
    }
    Ok(flags)
}
