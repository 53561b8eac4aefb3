//! Flat `key = value` files merged into the argument list ahead of the
//! command-line flags.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{ArgAction, Command};

use crate::CliError;

/// Removes `--config PATH` (or `--config=PATH`) from `argv`.
pub fn take_config_path(argv: &mut Vec<OsString>) -> Result<Option<PathBuf>, CliError> {
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy().into_owned();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            if i + 1 >= argv.len() {
                return Err(CliError::Domain("--config needs a file path".into()));
            }
            let path = PathBuf::from(argv.remove(i + 1));
            argv.remove(i);
            return Ok(Some(path));
        }
        if let Some(p) = arg.strip_prefix("--config=") {
            let path = PathBuf::from(p);
            argv.remove(i);
            return Ok(Some(path));
        }
        i += 1;
    }
    Ok(None)
}

/// Parsed `key = value` pairs, in file order.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Domain(format!(
                "config line {}: expected key = value, got {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(CliError::Domain(format!("config line {}: empty key", lineno + 1)));
        }
        out.push((lineno + 1, key, value.trim().to_string()));
    }
    Ok(out)
}

/// Inserts the config entries as flags right after the subcommand name so that
/// later command-line occurrences override them.
pub fn merge(argv: &mut Vec<OsString>, path: &PathBuf, root: &Command) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let entries = parse_config(&text)?;
    let Some(pos) = argv
        .iter()
        .position(|a| root.find_subcommand(a.to_string_lossy().as_ref()).is_some())
    else {
        return Err(CliError::Domain("a subcommand is required with --config".into()));
    };
    let sub_name = argv[pos].to_string_lossy().into_owned();
    let sub = root.find_subcommand(&sub_name).expect("subcommand found above");
    let mut tokens: Vec<OsString> = Vec::new();
    for (line, key, value) in entries {
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "config")
        else {
            return Err(CliError::Domain(format!(
                "config line {line}: unknown key {key:?} for {sub_name}"
            )));
        };
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => tokens.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                _ => {
                    return Err(CliError::Domain(format!(
                        "config line {line}: {key} expects true or false, got {value:?}"
                    )))
                }
            },
            _ => {
                tokens.push(format!("--{key}").into());
                tokens.push(value.into());
            }
        }
    }
    let rest = argv.split_off(pos + 1);
    argv.extend(tokens);
    argv.extend(rest);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_prefixes() {
        let e = parse_config("# c\n\n a = 3 \n--omega=0.5\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0], (3, "a".into(), "3".into()));
        assert_eq!(e[1].1, "omega");
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn takes_config_flag() {
        let mut v: Vec<OsString> = ["wl1", "theory", "--config=x.txt", "--a", "3"].map(Into::into).to_vec();
        assert_eq!(take_config_path(&mut v).unwrap(), Some(PathBuf::from("x.txt")));
        assert_eq!(v.len(), 4);
        let mut w: Vec<OsString> = ["wl1", "--config", "y", "rip"].map(Into::into).to_vec();
        assert_eq!(take_config_path(&mut w).unwrap(), Some(PathBuf::from("y")));
        assert_eq!(w, ["wl1", "rip"].map(OsString::from).to_vec());
    }
}
