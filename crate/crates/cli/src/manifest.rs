//! Run manifests: flat `key=value` lines, UTF-8, LF.
//!
//! A manifest records the fully resolved flags of a run (every default made
//! explicit, every model parameter listed) plus bookkeeping (version,
//! timestamp, outputs). Replaying turns the flag keys back into a command
//! line, so a replay goes through exactly the same code path as the
//! original run.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};

/// Keys that are bookkeeping, not flags.
const INFO_KEYS: &[&str] = &["command", "version", "timestamp", "threads", "outputs", "paper_scale", "out"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        m.set("timestamp", secs);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut m = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("manifest line {}: expected key=value", i + 1);
            };
            m.entries.push((k.to_string(), v.to_string()));
        }
        if m.get("command").is_none() {
            bail!("manifest has no command");
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        Manifest::parse(&text)
    }

    /// The command line that reproduces the run (without program name).
    pub fn to_args(&self) -> anyhow::Result<Vec<String>> {
        let mut args = vec![self.get("command").unwrap_or_default().to_string()];
        for (k, v) in &self.entries {
            if INFO_KEYS.contains(&k.as_str()) {
                continue;
            }
            if let Some(name) = k.strip_prefix("param.") {
                args.push("--param".into());
                args.push(format!("{name}={v}"));
                continue;
            }
            let flag = format!("--{}", k.replace('_', "-"));
            match (k.as_str(), v.as_str()) {
                ("noise", "qmc") => args.push("--qmc".into()),
                ("noise", "mc") => args.push("--mc".into()),
                ("noise", other) => bail!("manifest: unknown noise '{other}'"),
                ("make_benchmark", "true") => args.push(flag),
                ("make_benchmark", _) => {}
                _ => {
                    args.push(flag);
                    args.push(v.clone());
                }
            }
        }
        Ok(args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_args() {
        let mut m = Manifest::new("sweep");
        m.set("model", "bs-asian");
        m.set("param.sigma", 0.4);
        m.set("noise", "qmc");
        m.set("strikes", "90,100");
        m.set("make_benchmark", true);
        m.set("threads", 4);
        let parsed = Manifest::parse(&m.render()).unwrap();
        assert_eq!(parsed, m);
        assert_eq!(
            parsed.to_args().unwrap(),
            vec!["sweep", "--model", "bs-asian", "--param", "sigma=0.4", "--qmc", "--strikes", "90,100", "--make-benchmark"]
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(Manifest::parse("no equals sign\n").is_err());
        assert!(Manifest::parse("model=gbm\n").is_err());
    }
}
