//! `--config FILE` support: keys of a JSON object become flags that were
//! not given on the command line.

use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const COMMANDS: [&str; 9] = ["partitions", "moments", "convolve", "models", "wigner", "clt", "berry", "inf", "fourth-moment"];

/// Removes `--config FILE` from `args` and appends the file's entries as
/// flags. A `"command"` key supplies the subcommand when none is given.
pub fn merge(mut args: Vec<String>) -> CliResult<Vec<String>> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => {
            let p = p.to_string();
            args.remove(pos);
            p
        }
        None => {
            if pos + 1 >= args.len() {
                return Err(CliError::Usage("--config needs a file".into()));
            }
            let p = args.remove(pos + 1);
            args.remove(pos);
            p
        }
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read config `{path}`: {e}")))?;
    let json: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config `{path}`: {e}")))?;
    let Value::Object(map) = json else {
        return Err(CliError::Usage(format!("config `{path}` must be a JSON object")));
    };
    let has_command = args.iter().skip(1).any(|a| COMMANDS.contains(&a.as_str()));
    let mut extra = Vec::new();
    for (key, value) in &map {
        if key == "command" {
            let Value::String(cmd) = value else {
                return Err(CliError::Usage("config `command` must be a string".into()));
            };
            if !has_command {
                args.insert(1.min(args.len()), cmd.clone());
            }
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let given = args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        match value {
            Value::Bool(true) => extra.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<CliResult<Vec<_>>>()?;
                extra.push(format!("{flag}={}", parts.join(",")));
            }
            other => extra.push(format!("{flag}={}", scalar(other)?)),
        }
    }
    args.extend(extra);
    Ok(args)
}

fn scalar(v: &Value) -> CliResult<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(CliError::Usage(format!("config value {v} must be a string, number or list of them"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str], config: &str) -> Vec<String> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, config).unwrap();
        let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        v.push("--config".into());
        v.push(path.display().to_string());
        merge(v).unwrap()
    }

    #[test]
    fn flags_win_over_config() {
        let out = run(&["ncprob", "clt", "--n", "4"], r#"{"n": [8, 16], "z": "0+2i", "strict": true, "seed": 3}"#);
        assert_eq!(out[..4], ["ncprob", "clt", "--n", "4"]);
        assert!(out.contains(&"--z=0+2i".to_string()));
        assert!(out.contains(&"--strict".to_string()));
        assert!(out.contains(&"--seed=3".to_string()));
        assert!(!out.iter().any(|a| a.starts_with("--n=")));
    }

    #[test]
    fn command_from_config() {
        let out = run(&["ncprob"], r#"{"command": "partitions", "n": 4, "count": true}"#);
        assert_eq!(out[1], "partitions");
        assert!(out.contains(&"--n=4".to_string()) && out.contains(&"--count".to_string()));
        let out = run(&["ncprob", "moments"], r#"{"command": "partitions"}"#);
        assert_eq!(out, ["ncprob", "moments"]);
    }

    #[test]
    fn malformed_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        for bad in ["[1, 2]", "{\"n\": {\"a\": 1}}", "not json"] {
            std::fs::write(&path, bad).unwrap();
            let args = vec!["ncprob".to_string(), "--config".to_string(), path.display().to_string()];
            assert!(matches!(merge(args), Err(CliError::Usage(_))), "{bad}");
        }
        assert!(merge(vec!["ncprob".into(), "--config".into()]).is_err());
    }
}
