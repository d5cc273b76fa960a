//! `key=value` experiment files merged into the argument list.
//!
//! Each key names a long flag of the chosen subcommand. The generated flags
//! are inserted right after the subcommand name, so anything given on the
//! command line comes later and wins.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Flags generated from one config file.
pub fn config_flags(text: &str) -> Result<(Option<String>, Vec<OsString>)> {
    let mut command = None;
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got `{line}`", lineno + 1);
        };
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key.is_empty() {
            bail!("config line {}: empty key", lineno + 1);
        }
        match (key.as_str(), value) {
            ("command", v) => command = Some(v.to_string()),
            ("config", _) => bail!("config line {}: nested config files are not supported", lineno + 1),
            (_, "true") => flags.push(format!("--{key}").into()),
            (_, "false") => {}
            (k, v) => {
                flags.push(format!("--{k}").into());
                flags.push(v.into());
            }
        }
    }
    Ok((command, flags))
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// The argument list with config-file flags spliced in after the
/// subcommand name.
pub fn merge_config(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("--config: cannot read {}", Path::new(&path).display()))?;
    let (command, flags) = config_flags(&text).context("--config")?;
    let pos = args
        .iter()
        .position(|a| subcommands.contains(&a.to_string_lossy().as_ref()));
    let mut out = args.clone();
    match (pos, command) {
        (Some(p), _) => {
            out.splice(p + 1..p + 1, flags);
        }
        (None, Some(cmd)) => {
            let at = 1.min(out.len());
            let mut ins: Vec<OsString> = vec![cmd.into()];
            ins.extend(flags);
            out.splice(at..at, ins);
        }
        (None, None) => bail!("--config: no subcommand on the command line and no `command=` key"),
    }
    Ok(out)
}
