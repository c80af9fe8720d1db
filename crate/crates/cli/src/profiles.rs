//! Named configuration profiles.
//!
//! A profile name is looked up as `<name>.profile` in the directory named by
//! [`PROFILE_DIR_ENV`], if set, and otherwise among the bundled profiles.

use std::path::PathBuf;

use crate::config::ConfigError;

pub const PROFILE_DIR_ENV: &str = "HYBRIDQKD_PROFILE_DIR";

pub const BUNDLED: &[(&str, &str)] = &[
    ("table1", include_str!("../profiles/table1.profile")),
    ("ideal", include_str!("../profiles/ideal.profile")),
];

/// Profile text and a label used in error messages.
pub struct Profile {
    pub label: String,
    pub text: String,
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn load(name: &str) -> Result<Profile, ConfigError> {
    let stem = name.strip_suffix(".profile").unwrap_or(name);
    if let Some(dir) = std::env::var_os(PROFILE_DIR_ENV) {
        let path = PathBuf::from(dir).join(format!("{stem}.profile"));
        if path.is_file() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
            return Ok(Profile { label: path.display().to_string(), text });
        }
    }
    bundled(stem)
        .map(|text| Profile { label: format!("{stem}.profile"), text: text.to_string() })
        .ok_or_else(|| {
            let names: Vec<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
            ConfigError::new(format!("unknown profile `{name}` (bundled: {})", names.join(", ")))
        })
}
