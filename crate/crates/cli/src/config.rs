//! TOML config file and flag merging.

use std::path::Path;

use serde::Deserialize;

use crate::{CliError, CommonArgs};

/// `q` in a config file: an integer or a `2^k` string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Int(u64),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub xi: Option<f64>,
    pub sigma_x2: Option<f64>,
    pub q: Option<QSpec>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "N")]
    pub blocks: Option<usize>,
    pub b: Option<u8>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Flags over file values.  Commands fill the remaining gaps with their own
/// defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub t: Option<f64>,
    pub xi: Option<f64>,
    pub sigma_x2: Option<f64>,
    pub q: Option<u64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub blocks: Option<usize>,
    pub b: Option<u8>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn merge(flags: &CommonArgs, file: &FileConfig) -> Result<Self, CliError> {
        let file_q = match &file.q {
            None => None,
            Some(QSpec::Int(v)) => Some(check_pow2(*v)?),
            Some(QSpec::Text(s)) => Some(parse_q(s).map_err(CliError::Config)?),
        };
        Ok(Self {
            t: flags.t.or(file.t),
            xi: flags.xi.or(file.xi),
            sigma_x2: flags.sigma_x2.or(file.sigma_x2),
            q: flags.q.or(file_q),
            gamma: flags.gamma.or(file.gamma),
            delta: flags.delta.or(file.delta),
            blocks: flags.blocks.or(file.blocks),
            b: flags.b.or(file.b),
            seed: flags.seed.or(file.seed),
        })
    }
}

fn check_pow2(q: u64) -> Result<u64, CliError> {
    if q >= 2 && q.is_power_of_two() {
        Ok(q)
    } else {
        Err(CliError::Config(format!(
            "q = {q} is not a power of two >= 2"
        )))
    }
}

/// Parses `1024` or `2^10`.
pub fn parse_q(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let q = match s.split_once('^') {
        Some((base, exp)) => {
            if base.trim() != "2" {
                return Err(format!("`{s}`: only powers of two are supported"));
            }
            let k: u32 = exp
                .trim()
                .parse()
                .map_err(|_| format!("`{s}`: bad exponent"))?;
            if !(1..=63).contains(&k) {
                return Err(format!("`{s}`: exponent must be in 1..=63"));
            }
            1u64 << k
        }
        None => s.parse().map_err(|_| format!("`{s}` is not an integer"))?,
    };
    check_pow2(q).map_err(|e| e.to_string())
}

/// Comma-separated list of `q` values; blank means none.
pub fn parse_q_list(s: &str) -> Result<Vec<u64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| parse_q(p).map_err(CliError::Config))
        .collect()
}

/// Parses `a,b` into two finite numbers.
pub fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("{what}: expected `a,b`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_forms() {
        assert_eq!(parse_q("2^15"), Ok(32768));
        assert_eq!(parse_q(" 1024 "), Ok(1024));
        assert!(parse_q("3^2").is_err());
        assert!(parse_q("96").is_err());
        assert!(parse_q("1").is_err());
        assert!(parse_q("2^64").is_err());
        assert_eq!(parse_q_list("").unwrap(), Vec::<u64>::new());
        assert_eq!(parse_q_list("2^5, 64").unwrap(), vec![32, 64]);
    }

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("T = 0.5\nxi = 0.01\nq = \"2^10\"\nN = 7\n").unwrap();
        let flags = CommonArgs {
            t: Some(0.25),
            ..CommonArgs::default()
        };
        let s = Settings::merge(&flags, &file).unwrap();
        assert_eq!(s.t, Some(0.25));
        assert_eq!(s.xi, Some(0.01));
        assert_eq!(s.q, Some(1024));
        assert_eq!(s.blocks, Some(7));
        assert_eq!(s.gamma, None);
    }

    #[test]
    fn file_errors_are_config_errors() {
        for text in ["bogus = 1", "q = 96", "T = \"x\""] {
            let r =
                FileConfig::parse(text).and_then(|f| Settings::merge(&CommonArgs::default(), &f));
            assert!(matches!(r, Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn pairs() {
        assert_eq!(parse_pair("-0.6, 0", "r").unwrap(), (-0.6, 0.0));
        assert!(parse_pair("1", "r").is_err());
        assert!(parse_pair("1,nan", "r").is_err());
    }
}
