//! Flat `key = value` configuration files merged with command-line flags.
//!
//! Precedence is flag, then file, then built-in default. Every resolved value
//! is recorded so the manifest can reproduce the run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, (usize, String)>,
    source: Option<String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut s = Self::parse(&text).map_err(|e| anyhow!("{}:{e}", path.display()))?;
        s.source = Some(path.display().to_string());
        Ok(s)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}: expected 'key = value', got '{line}'", i + 1))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                bail!("{}: empty key", i + 1);
            }
            if file.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                bail!("{}: duplicate key '{key}'", i + 1);
            }
        }
        Ok(Self {
            file,
            source: None,
            resolved: BTreeMap::new(),
        })
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.remove(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| {
                let src = self.source.as_deref().unwrap_or("config");
                anyhow!("{src}:{line}: field '{key}': cannot parse '{v}': {e}")
            }),
        }
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let from_file = self.from_file::<T>(key)?;
        let value = flag.or(from_file).unwrap_or(default);
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`Settings::get`] for values with no default.
    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: Display,
    {
        let from_file = self.from_file::<T>(key)?;
        let value = flag
            .or(from_file)
            .ok_or_else(|| anyhow!("missing required field '{key}' (flag --{key} or config key)"))?;
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Records a derived or fixed value in the manifest.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// Fails on config keys that no option consumed.
    pub fn finish(&mut self) -> Result<BTreeMap<String, String>> {
        if let Some((key, (line, _))) = self.file.iter().next() {
            let src = self.source.as_deref().unwrap_or("config");
            bail!("{src}:{line}: unknown field '{key}'");
        }
        Ok(std::mem::take(&mut self.resolved))
    }
}

/// Parses `a,b,c`, an inclusive range `start:stop:step`, or
/// `log:start:stop:count`.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let t = text.trim();
    let nums = |parts: &[&str]| -> Result<Vec<f64>> {
        parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!("'{p}': {e}")))
            .collect()
    };
    if let Some(rest) = t.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            bail!("expected log:start:stop:count, got '{t}'");
        }
        let v = nums(&parts)?;
        let count = v[2] as usize;
        if !(v[0] > 0.0 && v[1] > v[0]) || count < 2 || v[2].fract() != 0.0 {
            bail!("log range needs 0 < start < stop and an integer count >= 2");
        }
        let (a, b) = (v[0].ln(), v[1].ln());
        return Ok((0..count)
            .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
            .collect());
    }
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 {
            bail!("expected start:stop:step, got '{t}'");
        }
        let v = nums(&parts)?;
        if !(v[2] > 0.0) || v[1] < v[0] {
            bail!("range needs start <= stop and a positive step");
        }
        let count = ((v[1] - v[0]) / v[2] + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| v[0] + v[2] * i as f64).collect());
    }
    nums(&t.split(',').collect::<Vec<_>>())
}

/// A list value that prints back in the form it was given.
#[derive(Debug, Clone, PartialEq)]
pub struct List {
    pub text: String,
    pub values: Vec<f64>,
}

impl FromStr for List {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self {
            text: s.trim().to_string(),
            values: parse_list(s)?,
        })
    }
}

impl Display for List {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}

/// A real number that may also be written as a fraction `a/b`, so that
/// exponents like `8/3` are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Number {
    pub text: String,
    pub value: f64,
}

impl From<f64> for Number {
    fn from(value: f64) -> Self {
        Self { text: value.to_string(), value }
    }
}

impl FromStr for Number {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let num = |x: &str| -> Result<f64> { x.trim().parse::<f64>().map_err(|_| anyhow!("not a number: '{x}'")) };
        let value = match t.split_once('/') {
            Some((a, b)) => num(a)? / num(b)?,
            None => num(t)?,
        };
        if !value.is_finite() {
            bail!("not a finite number: '{t}'");
        }
        Ok(Self { text: t.to_string(), value })
    }
}

impl Display for Number {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}
