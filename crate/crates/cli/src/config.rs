//! Effective run configuration: an optional `key = value` file, then
//! `--key value` overrides from the command line, checked against the keys
//! the command understands.

use std::path::Path;

use thermoface::kv::KeyValues;
use thermoface::{Error, Result};

/// Merges `file` and `overrides` (flag tokens such as `--epochs 50` or
/// `--epochs=50`). Overrides win. Keys may be spelled with `-` or `_`.
pub fn merge(file: Option<&Path>, overrides: &[String], allowed: &[&str]) -> Result<KeyValues> {
    let mut kv = match file {
        Some(path) => KeyValues::load(path)?,
        None => KeyValues::new(),
    };
    let mut tokens = overrides.iter();
    while let Some(token) = tokens.next() {
        let Some(flag) = token.strip_prefix("--") else {
            return Err(Error::Config(format!("expected `--key value`, got {token:?}")));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let value = tokens
                    .next()
                    .ok_or_else(|| Error::Config(format!("flag `--{flag}` needs a value")))?;
                (flag.to_string(), value.clone())
            }
        };
        kv.set(key.replace('-', "_"), value);
    }
    kv.check_keys(allowed).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{m}; accepted keys: {}", allowed.join(", "))),
        other => other,
    })?;
    Ok(kv)
}

/// Prints the configuration a run actually used, in the same format the
/// `--config` file takes.
pub fn echo(kv: &KeyValues) {
    println!("# effective configuration");
    print!("{}", kv.render());
    println!("# end configuration");
}

/// Copies every entry of `part` into `into`.
pub fn absorb(into: &mut KeyValues, part: &KeyValues) {
    for (k, v) in part.iter() {
        into.set(k, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn overrides_win_and_dashes_normalize() {
        let dir = std::env::temp_dir().join(format!("thermoface-cfg-{}", std::process::id()));
        std::fs::write(&dir, "epochs = 10\nmargin = 2\n").unwrap();
        let kv = merge(Some(&dir), &args("--epochs 50 --learning-rate=0.1"), &["epochs", "margin", "learning_rate"]).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert_eq!(kv.get("epochs"), Some("50"));
        assert_eq!(kv.get("margin"), Some("2"));
        assert_eq!(kv.get("learning_rate"), Some("0.1"));
    }

    #[test]
    fn rejects_unknown_keys_and_dangling_flags() {
        assert!(matches!(merge(None, &args("--bogus 1"), &["epochs"]), Err(Error::Config(_))));
        assert!(matches!(merge(None, &args("--epochs"), &["epochs"]), Err(Error::Config(_))));
        assert!(matches!(merge(None, &args("epochs 3"), &["epochs"]), Err(Error::Config(_))));
    }
}
