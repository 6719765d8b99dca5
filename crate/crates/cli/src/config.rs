//! Flat `key=value` config files, merged under explicit flags.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

/// Parses config text: one `key = value` per line, `#` starts a comment.
/// Keys use the long flag names, with `_` accepted for `-`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", n + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Removes `--config <path>` from `args` and splices the file's settings in
/// right after the subcommand name, ahead of the user's own flags, so that
/// flags given on the command line win.
pub fn expand(args: Vec<OsString>, cmd: &Command) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().context("--config needs a path")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let settings = parse(&text)?;

    // The subcommand is the first argument naming one.
    let Some(pos) = rest
        .iter()
        .position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some())
    else {
        return Ok(rest);
    };
    let sub = cmd
        .find_subcommand(rest[pos].to_string_lossy().as_ref())
        .expect("found above");
    let mut injected = Vec::new();
    for (key, value) in settings {
        let known_anywhere = cmd
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
        if !known_anywhere {
            bail!("unknown config key `{key}`");
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            // Setting for another command; a shared file may hold several.
            continue;
        };
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" | "1" | "yes" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                _ => bail!("config key `{key}` expects true or false"),
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}
