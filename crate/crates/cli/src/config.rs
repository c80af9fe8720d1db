//! Run configuration: a sectioned `key = value` text format.
//!
//! ```text
//! file    = { line }
//! line    = blank | comment | section | entry
//! comment = "#" { any }
//! section = "[" name "]"
//! entry   = key "=" value [ comment ]
//! value   = number | "true" | "false" | word | grid
//! grid    = item { "," item }            (may be empty)
//! item    = number | number ":" number ":" number
//! ```
//!
//! `start:stop:step` expands to `start, start + step, ...` up to and
//! including `stop`. Every key can also be set on the command line as
//! `--section.key=value`; such overrides are applied after the file and
//! replace the other member of a mutually exclusive pair.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use hybridqkd::channel::TELECOM_FIBER_ALPHA;
use hybridqkd::{ChannelModel, DetectorModel, QdSourceParams};
use thiserror::Error;

const KEYS: &[(&str, &[&str])] = &[
    ("source", &["brightness", "g2", "brightness_grid"]),
    ("laser", &["mu", "ratio", "optimize"]),
    ("channel", &["db", "km", "alpha", "eta0"]),
    ("detector", &["e_d", "dark_rate_hz", "y0", "e0", "f_ec", "rep_rate_hz"]),
    ("run", &["command", "output", "n_pulses", "seed"]),
];

const EXCLUSIVE: &[(&str, &str, &str)] = &[
    ("laser", "mu", "ratio"),
    ("channel", "db", "km"),
    ("detector", "dark_rate_hz", "y0"),
];

const MAX_GRID_POINTS: usize = 1_000_000;

/// Brightnesses swept by `threshold` when no `source.brightness_grid` is set.
pub const DEFAULT_BRIGHTNESS_GRID: [f64; 11] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

/// Where a configuration value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line { source: String, line: usize },
    Override(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line { source, line } => write!(f, "{source}:{line}"),
            Origin::Override(arg) => write!(f, "override `{arg}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub origin: Option<Origin>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Some(origin) => write!(f, "{origin}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { origin: None, message: message.into() }
    }

    fn at(origin: &Origin, message: impl Into<String>) -> Self {
        Self { origin: Some(origin.clone()), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Scan,
    Optimize,
    Threshold,
    Montecarlo,
    Figures,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "scan" => Command::Scan,
            "optimize" => Command::Optimize,
            "threshold" => Command::Threshold,
            "montecarlo" => Command::Montecarlo,
            "figures" => Command::Figures,
            _ => return None,
        })
    }
}

/// How the laser admixture is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum LaserSpec {
    /// Laser mean photon numbers at Alice's output.
    Means(Vec<f64>),
    /// Laser shares `mu_laser / mu_mixed`, each in `[0, 1)`.
    Ratios(Vec<f64>),
    Unset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: QdSourceParams,
    pub brightness_grid: Vec<f64>,
    pub laser: LaserSpec,
    /// Choose the laser mean per attenuation instead of using a list.
    pub optimize: bool,
    pub db_grid: Vec<f64>,
    /// Channel at zero applied attenuation.
    pub channel: ChannelModel,
    pub detector: DetectorModel,
    pub command: Option<Command>,
    pub output: Option<PathBuf>,
    pub n_pulses: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Parsed but not yet interpreted configuration.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
}

fn known(section: &str, key: &str) -> Result<(), String> {
    match KEYS.iter().find(|(s, _)| *s == section) {
        None => Err(format!("unknown section [{section}]")),
        Some((_, keys)) if !keys.contains(&key) => Err(format!(
            "unknown key `{key}` in [{section}] (expected one of: {})",
            keys.join(", ")
        )),
        Some(_) => Ok(()),
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(before, _)| before).trim()
}

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut section: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let origin = Origin::Line { source: source.to_string(), line: i + 1 };
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(&origin, "unterminated section header"))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::at(&origin, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(&origin, format!("expected `key = value`, found `{line}`")))?;
            let section = section
                .as_deref()
                .ok_or_else(|| ConfigError::at(&origin, "entry before the first [section]"))?;
            let key = key.trim();
            known(section, key).map_err(|m| ConfigError::at(&origin, m))?;
            let slot = (section.to_string(), key.to_string());
            if let Some(prev) = raw.entries.get(&slot) {
                return Err(ConfigError::at(
                    &origin,
                    format!("duplicate key `{key}` in [{section}] (first set at {})", prev.origin),
                ));
            }
            raw.entries.insert(slot, Entry { value: value.trim().to_string(), origin });
        }
        Ok(raw)
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, arg: &str) -> Result<(), ConfigError> {
        let origin = Origin::Override(format!("--{arg}"));
        let (path, value) = arg
            .split_once('=')
            .ok_or_else(|| ConfigError::at(&origin, "expected --section.key=value"))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| ConfigError::at(&origin, "expected --section.key=value"))?;
        known(section, key).map_err(|m| ConfigError::at(&origin, m))?;
        for &(s, a, b) in EXCLUSIVE {
            if s == section && (key == a || key == b) {
                let other = if key == a { b } else { a };
                self.entries.remove(&(s.to_string(), other.to_string()));
            }
        }
        self.entries.insert(
            (section.to_string(), key.to_string()),
            Entry { value: value.trim().to_string(), origin },
        );
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn number(&self, section: &str, key: &str) -> Result<Option<(f64, &Origin)>, ConfigError> {
        self.get(section, key)
            .map(|e| parse_number(&e.value).map(|v| (v, &e.origin)).map_err(|m| ConfigError::at(&e.origin, m)))
            .transpose()
    }

    fn required(&self, section: &str, key: &str) -> Result<(f64, &Origin), ConfigError> {
        self.number(section, key)?
            .ok_or_else(|| ConfigError::new(format!("missing required key `{key}` in [{section}]")))
    }

    fn grid(&self, section: &str, key: &str) -> Result<Option<(Vec<f64>, &Origin)>, ConfigError> {
        self.get(section, key)
            .map(|e| parse_grid(&e.value).map(|v| (v, &e.origin)).map_err(|m| ConfigError::at(&e.origin, m)))
            .transpose()
    }

    fn exclusive<'k>(&self, section: &str, a: &'k str, b: &'k str) -> Result<Option<&'k str>, ConfigError> {
        let (ea, eb) = (self.get(section, a), self.get(section, b));
        match (ea, eb) {
            (Some(_), Some(e)) => Err(ConfigError::at(
                &e.origin,
                format!("`{a}` and `{b}` in [{section}] are mutually exclusive"),
            )),
            (Some(_), None) => Ok(Some(a)),
            (None, Some(_)) => Ok(Some(b)),
            (None, None) => Ok(None),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let (brightness, b_origin) = self.required("source", "brightness")?;
        let (g2, g2_origin) = self.required("source", "g2")?;
        let source = QdSourceParams { brightness, g2 };
        if let Err(e) = source.validate() {
            let origin = if matches!(e, hybridqkd::Error::OutOfRange { name: "g2", .. }) {
                g2_origin
            } else {
                b_origin
            };
            return Err(ConfigError::at(origin, e.to_string()));
        }
        let brightness_grid = match self.grid("source", "brightness_grid")? {
            Some((grid, origin)) => {
                nonempty(&grid, origin, "brightness_grid")?;
                for &b in &grid {
                    QdSourceParams::new(b, g2).map_err(|e| ConfigError::at(origin, e.to_string()))?;
                }
                grid
            }
            None => DEFAULT_BRIGHTNESS_GRID.to_vec(),
        };

        let laser = match self.exclusive("laser", "mu", "ratio")? {
            Some("mu") => {
                let (mu, origin) = self.grid("laser", "mu")?.expect("present");
                nonempty(&mu, origin, "mu")?;
                if let Some(bad) = mu.iter().find(|&&m| m < 0.0) {
                    return Err(ConfigError::at(origin, format!("laser mean {bad} is negative")));
                }
                LaserSpec::Means(mu)
            }
            Some(_) => {
                let (ratios, origin) = self.grid("laser", "ratio")?.expect("present");
                nonempty(&ratios, origin, "ratio")?;
                if let Some(bad) = ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
                    return Err(ConfigError::at(origin, format!("ratio {bad} is outside [0, 1)")));
                }
                if brightness == 0.0 && ratios.iter().any(|&r| r > 0.0) {
                    return Err(ConfigError::at(origin, "a laser ratio needs a source with nonzero brightness"));
                }
                LaserSpec::Ratios(ratios)
            }
            None => LaserSpec::Unset,
        };
        let optimize = match self.get("laser", "optimize") {
            None => false,
            Some(e) => parse_bool(&e.value).map_err(|m| ConfigError::at(&e.origin, m))?,
        };

        let alpha = self.number("channel", "alpha")?;
        let eta0 = self.number("channel", "eta0")?;
        let channel = ChannelModel {
            attenuation_db: 0.0,
            fiber_alpha: alpha.map_or(TELECOM_FIBER_ALPHA, |(a, _)| a),
            eta0: eta0.map_or(1.0, |(e, _)| e),
        };
        if let Err(e) = channel.validate() {
            let origin = match e {
                hybridqkd::Error::OutOfRange { name: "eta0", .. } => eta0.map(|(_, o)| o),
                _ => alpha.map(|(_, o)| o),
            };
            return Err(ConfigError { origin: origin.cloned(), message: e.to_string() });
        }
        let db_grid = match self.exclusive("channel", "db", "km")? {
            Some(key) => {
                let (grid, origin) = self.grid("channel", key)?.expect("present");
                nonempty(&grid, origin, key)?;
                if let Some(bad) = grid.iter().find(|&&x| x < 0.0) {
                    return Err(ConfigError::at(origin, format!("{key} value {bad} is negative")));
                }
                if key == "km" {
                    grid.iter().map(|km| km * channel.fiber_alpha).collect()
                } else {
                    grid
                }
            }
            None => return Err(ConfigError::new("[channel] needs exactly one of `db` or `km`")),
        };

        let (e_d, _) = self.required("detector", "e_d")?;
        let (rep_rate_hz, _) = self.required("detector", "rep_rate_hz")?;
        let y0 = match self.exclusive("detector", "dark_rate_hz", "y0")? {
            Some("y0") => self.required("detector", "y0")?.0,
            Some(_) => DetectorModel::y0_from_dark_rate(self.required("detector", "dark_rate_hz")?.0, rep_rate_hz),
            None => {
                return Err(ConfigError::new("[detector] needs exactly one of `dark_rate_hz` or `y0`"));
            }
        };
        let detector = DetectorModel {
            e_d,
            y0,
            e0: self.number("detector", "e0")?.map_or(0.5, |(v, _)| v),
            f_ec: self.required("detector", "f_ec")?.0,
            rep_rate_hz,
        };
        if let Err(e) = detector.validate() {
            let origin = match &e {
                hybridqkd::Error::OutOfRange { name, .. } => {
                    let key = if *name == "y0" && self.get("detector", "y0").is_none() { "dark_rate_hz" } else { name };
                    self.get("detector", key).map(|e| e.origin.clone())
                }
                _ => None,
            };
            return Err(ConfigError { origin, message: e.to_string() });
        }

        let command = match self.get("run", "command") {
            None => None,
            Some(e) => Some(
                Command::parse(&e.value)
                    .ok_or_else(|| ConfigError::at(&e.origin, format!("unknown command `{}`", e.value)))?,
            ),
        };
        let output = self
            .get("run", "output")
            .filter(|e| !e.value.is_empty())
            .map(|e| PathBuf::from(&e.value));
        let n_pulses = match self.get("run", "n_pulses") {
            None => 1_000_000,
            Some(e) => {
                let n = parse_count(&e.value).map_err(|m| ConfigError::at(&e.origin, m))?;
                if n == 0 {
                    return Err(ConfigError::at(&e.origin, "n_pulses must be at least 1"));
                }
                n
            }
        };
        let seed = match self.get("run", "seed") {
            None => 1,
            Some(e) => parse_count(&e.value).map_err(|m| ConfigError::at(&e.origin, m))?,
        };

        Ok(RunConfig {
            source,
            brightness_grid,
            laser,
            optimize,
            db_grid,
            channel,
            detector,
            command,
            output,
            n_pulses,
            seed,
        })
    }
}

fn nonempty(grid: &[f64], origin: &Origin, key: &str) -> Result<(), ConfigError> {
    if grid.is_empty() {
        Err(ConfigError::at(origin, format!("`{key}` list is empty")))
    } else {
        Ok(())
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, found `{s}`")),
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    // allow 1e7 style counts
    let v = parse_number(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("expected a nonnegative integer, found `{s}`"))
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected `true` or `false`, found `{s}`")),
    }
}

/// Expands a comma-separated list of numbers and `start:stop:step` ranges.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        if item.is_empty() {
            if s.trim().is_empty() {
                break;
            }
            return Err("empty item in list".into());
        }
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        match parts[..] {
            [x] => out.push(parse_number(x)?),
            [start, stop, step] => {
                let (start, stop, step) = (parse_number(start)?, parse_number(stop)?, parse_number(step)?);
                if step <= 0.0 {
                    return Err(format!("range step must be positive in `{item}`"));
                }
                if stop < start {
                    return Err(format!("range stop is below its start in `{item}`"));
                }
                let n = ((stop - start) / step + 1e-9).floor();
                if n as usize >= MAX_GRID_POINTS {
                    return Err(format!("range `{item}` has more than {MAX_GRID_POINTS} points"));
                }
                // multiply rather than accumulate so grid points stay exact
                out.extend((0..=n as usize).map(|i| start + i as f64 * step));
            }
            _ => return Err(format!("expected a number or start:stop:step, found `{item}`")),
        }
    }
    Ok(out)
}
