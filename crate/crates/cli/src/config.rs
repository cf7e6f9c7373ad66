//! `--config <file>` support. Keys at the top level apply to every subcommand
//! that has a flag of that name; a `[subcommand]` table applies to that
//! subcommand only. Flags given on the command line or through `MARLX_*`
//! environment variables take precedence.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

pub const ENV_PREFIX: &str = "MARLX_";

pub fn env_name(flag: &str) -> String {
    format!("{ENV_PREFIX}{}", flag.replace('-', "_").to_uppercase())
}

/// Long names of the flags `cmd` accepts, including inherited global ones.
fn long_flags(cmd: &Command) -> BTreeSet<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long())
        .map(str::to_string)
        .collect()
}

/// Subcommand path named in `args`, e.g. `["domain", "export"]`.
fn subcommand_path(root: &Command, args: &[String]) -> Vec<String> {
    let mut path = Vec::new();
    let mut cmd = root;
    for a in args.iter().skip(1) {
        if let Some(sub) = cmd.find_subcommand(a) {
            path.push(a.clone());
            cmd = sub;
        }
    }
    path
}

fn find_config(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    std::env::var(env_name("config")).ok()
}

fn value_text(key: &str, v: &toml::Value) -> Result<Option<String>> {
    Ok(match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(true) => None,
        toml::Value::Boolean(false) => return Ok(Some(String::new())),
        toml::Value::Array(items) => Some(
            items
                .iter()
                .map(|i| match i {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(n) => Ok(n.to_string()),
                    _ => bail!("config key `{key}`: list items must be strings or integers"),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
        ),
        _ => bail!("config key `{key}` has an unsupported value"),
    })
}

/// Returns `args` extended with the flags supplied by the config file, if any.
pub fn apply(root: &Command, args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config `{path}`"))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config `{path}`"))?;

    let sub_path = subcommand_path(root, &args);
    let mut cmd = root;
    for name in &sub_path {
        cmd = cmd.find_subcommand(name).expect("path was resolved from this command");
    }
    let mut accepted = long_flags(cmd);
    accepted.extend(long_flags(root));
    let mut known: BTreeSet<String> = long_flags(root);
    for sub in root.get_subcommands() {
        known.extend(long_flags(sub));
        for nested in sub.get_subcommands() {
            known.extend(long_flags(nested));
        }
    }

    let mut scoped: Vec<(String, toml::Value)> = Vec::new();
    let mut shared: Vec<(String, toml::Value)> = Vec::new();
    let section = sub_path.join(".");
    for (key, value) in &table {
        match value {
            toml::Value::Table(t) => {
                if root.find_subcommand(key).is_none() {
                    bail!("config section `[{key}]` does not name a subcommand");
                }
                if *key != section && !section.starts_with(&format!("{key}.")) {
                    continue;
                }
                for (k, v) in t {
                    let flag = k.replace('_', "-");
                    if matches!(v, toml::Value::Table(_)) {
                        continue;
                    }
                    if !accepted.contains(&flag) {
                        bail!("config key `{key}.{k}` is not a flag of `{key}`");
                    }
                    scoped.push((flag, v.clone()));
                }
            }
            v => {
                let flag = key.replace('_', "-");
                if !known.contains(&flag) {
                    bail!("unknown config key `{key}`");
                }
                if accepted.contains(&flag) && flag != "config" {
                    shared.push((flag, v.clone()));
                }
            }
        }
    }

    let mut out = args;
    let mut added: BTreeSet<String> = BTreeSet::new();
    for (flag, value) in scoped.into_iter().chain(shared) {
        let given = out
            .iter()
            .any(|a| a == &format!("--{flag}") || a.starts_with(&format!("--{flag}=")));
        if given || added.contains(&flag) || std::env::var_os(env_name(&flag)).is_some() {
            continue;
        }
        match value_text(&flag, &value)? {
            None => out.push(format!("--{flag}")),
            Some(s) if s.is_empty() => {}
            Some(s) => out.push(format!("--{flag}={s}")),
        }
        added.insert(flag);
    }
    Ok(out)
}
