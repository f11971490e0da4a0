//! Settings resolution: command-line flag, then config file, then default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qss_core::finite_key::{Direction, EpsilonBudget};
use qss_core::keyrate::PulseCount;
use qss_core::report::{fmt_num, parse_key_values, Report};

use crate::CliError;

/// A value that can come from a config file and be echoed into a header.
pub trait Setting: Sized {
    fn parse_setting(s: &str) -> Result<Self, String>;
    fn echo(&self) -> String;
}

impl Setting for f64 {
    fn parse_setting(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("not a number: `{s}`"))
    }
    fn echo(&self) -> String {
        fmt_num(*self)
    }
}

impl Setting for bool {
    fn parse_setting(s: &str) -> Result<Self, String> {
        s.parse()
            .map_err(|_| format!("expected true or false: `{s}`"))
    }
    fn echo(&self) -> String {
        self.to_string()
    }
}

impl Setting for PulseCount {
    fn parse_setting(s: &str) -> Result<Self, String> {
        s.parse()
    }
    fn echo(&self) -> String {
        self.to_string()
    }
}

impl Setting for Direction {
    fn parse_setting(s: &str) -> Result<Self, String> {
        s.parse()
    }
    fn echo(&self) -> String {
        self.to_string()
    }
}

/// A nonnegative integer that may be written in float notation (`1e7`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Count(pub u64);

impl FromStr for Count {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(n) = s.parse::<u64>() {
            return Ok(Count(n));
        }
        let x: f64 = s.parse().map_err(|_| format!("not a count: `{s}`"))?;
        if x >= 0.0 && x.fract() == 0.0 && x <= 9.007_199_254_740_992e15 {
            Ok(Count(x as u64))
        } else {
            Err(format!("not a nonnegative integer: `{s}`"))
        }
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Setting for Count {
    fn parse_setting(s: &str) -> Result<Self, String> {
        s.parse()
    }
    fn echo(&self) -> String {
        self.0.to_string()
    }
}

impl Setting for String {
    fn parse_setting(s: &str) -> Result<Self, String> {
        Ok(s.to_owned())
    }
    fn echo(&self) -> String {
        self.clone()
    }
}

/// Config-file values plus a record of what was resolved, for the header.
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    echo: Vec<(String, String)>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!("cannot read config {}: {e}", path.display()))
            })?;
            let pairs = parse_key_values(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            for (k, v) in pairs {
                if file.insert(k.clone(), v).is_some() {
                    return Err(CliError::Input(format!(
                        "{}: key `{k}` given twice",
                        path.display()
                    )));
                }
            }
        }
        Ok(Resolver {
            file,
            used: BTreeSet::new(),
            echo: Vec::new(),
        })
    }

    fn lookup<T: Setting>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        self.used.insert(key.to_owned());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => T::parse_setting(raw)
                .map(Some)
                .map_err(|e| CliError::Input(format!("config key `{key}`: {e}"))),
            None => Ok(None),
        }
    }

    pub fn get<T: Setting>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.echo.push((key.to_owned(), v.echo()));
        Ok(v)
    }

    pub fn get_opt<T: Setting>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        let v = self.lookup(key, flag)?;
        if let Some(v) = &v {
            self.echo.push((key.to_owned(), v.echo()));
        }
        Ok(v)
    }

    /// Boolean switch: set by the flag or by `key = true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        self.get(key, flag.then_some(true), false)
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.echo.push((key.to_owned(), value.into()));
    }

    /// Fail on config keys that no setting consumed, then build the header.
    pub fn finish(self, command: &str) -> Result<Report, CliError> {
        let unknown: Vec<&String> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if !unknown.is_empty() {
            return Err(CliError::Input(format!(
                "unknown config keys for `{command}`: {unknown:?}"
            )));
        }
        let mut r = Report::new();
        r.comment(format!("qss {command}"));
        for (k, v) in &self.echo {
            r.comment(format!("{k} = {v}"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct EpsArgs {
    /// Correctness failure probability.
    #[arg(long = "eps-c")]
    pub eps_c: Option<f64>,
    /// Privacy-amplification failure probability.
    #[arg(long = "eps-pa")]
    pub eps_pa: Option<f64>,
    /// Observed-to-expected conversion failure probability.
    #[arg(long = "eps-a")]
    pub eps_a: Option<f64>,
    /// Expected-to-observed conversion failure probability.
    #[arg(long = "eps-b")]
    pub eps_b: Option<f64>,
}

impl EpsArgs {
    pub fn resolve(&self, r: &mut Resolver) -> Result<EpsilonBudget, CliError> {
        let d = EpsilonBudget::default();
        let b = EpsilonBudget::new(
            r.get("eps-c", self.eps_c, d.eps_c)?,
            r.get("eps-pa", self.eps_pa, d.eps_pa)?,
            r.get("eps-a", self.eps_a, d.eps_a)?,
            r.get("eps-b", self.eps_b, d.eps_b)?,
        )?;
        Ok(b)
    }
}

/// Joins a relative output path onto `QSS_OUTPUT_DIR` when that is set.
pub fn output_path(p: &Path) -> PathBuf {
    match std::env::var_os("QSS_OUTPUT_DIR") {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}
