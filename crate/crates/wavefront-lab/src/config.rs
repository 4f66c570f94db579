//! `key = value` configuration files.
//!
//! Each entry becomes a `--key value` flag inserted right after the
//! subcommand, so flags given on the command line override it.

use std::path::Path;

use crate::{LabError, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(LabError::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Flags for one entry. Booleans map to a bare flag or nothing; lists drop
/// inner whitespace so `D = 0.5, 1` parses like `--D 0.5,1`.
pub fn to_flags(key: &str, value: &str) -> Vec<String> {
    let flag = format!("--{}", key.replace('_', "-"));
    match value {
        "true" => vec![flag],
        "false" => vec![],
        v => vec![flag, v.split_whitespace().collect::<String>()],
    }
}

fn find_config(args: &[String]) -> Option<(usize, usize, String)> {
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            return args.get(i + 1).map(|v| (i, 2, v.clone()));
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some((i, 1, v.to_string()));
        }
    }
    None
}

/// Rewrites argv so that config entries precede the user's flags.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>> {
    let Some((at, len, path)) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| LabError::io(&path, e))?;
    let mut rest: Vec<String> = args.clone();
    rest.drain(at..at + len);
    // argv[0], then the subcommand, then config flags, then the remainder.
    let sub = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1);
    let Some(sub) = sub else {
        return Err(LabError::Config("--config needs a subcommand".into()));
    };
    let mut out: Vec<String> = rest[..=sub].to_vec();
    for (k, v) in parse(&text)? {
        out.extend(to_flags(&k, &v));
    }
    out.extend(rest[sub + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let kv = parse("# header\nD = 1\n\nc=4 # speed\nplot = true\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("D".into(), "1".into()),
                ("c".into(), "4".into()),
                ("plot".into(), "true".into())
            ]
        );
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(parse("D 1").is_err());
    }

    #[test]
    fn flags_for_values() {
        assert_eq!(to_flags("xi_max", "30"), vec!["--xi-max", "30"]);
        assert_eq!(to_flags("plot", "true"), vec!["--plot"]);
        assert!(to_flags("plot", "false").is_empty());
        assert_eq!(to_flags("D", "0.5, 1, 2"), vec!["--D", "0.5,1,2"]);
    }

    #[test]
    fn config_flags_precede_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "D = 2\nc = 8\n").unwrap();
        let argv: Vec<String> = ["lab", "--config", path.to_str().unwrap(), "profile", "--c", "9"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand_args(argv).unwrap();
        assert_eq!(out, vec!["lab", "profile", "--D", "2", "--c", "8", "--c", "9"]);
    }
}
