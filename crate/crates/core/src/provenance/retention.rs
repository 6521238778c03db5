use std::fmt;

use super::ProvenanceError;

pub const RETENTION_GRAMMAR: &str =
    "`<integer> <unit>` with unit one of second, minute, hour, day, week, month (30 days), year (365 days)";

const UNITS: [(&str, u64); 7] = [
    ("year", 365 * 86_400),
    ("month", 30 * 86_400),
    ("week", 7 * 86_400),
    ("day", 86_400),
    ("hour", 3_600),
    ("minute", 60),
    ("second", 1),
];

/// How long a cached output stays valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetentionPeriod {
    seconds: u64,
    source_text: String,
}

impl RetentionPeriod {
    pub fn from_seconds(seconds: u64) -> Self {
        Self {
            seconds,
            source_text: format_retention(seconds),
        }
    }

    pub fn seconds(&self) -> u64 {
        self.seconds
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }
}

impl Default for RetentionPeriod {
    /// Six months.
    fn default() -> Self {
        Self::from_seconds(6 * 30 * 86_400)
    }
}

impl fmt::Display for RetentionPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text)
    }
}

/// Parses phrases such as `1 year`, `3 minutes` or `7 Seconds`.
pub fn parse_retention(text: &str) -> Result<RetentionPeriod, ProvenanceError> {
    let err = || ProvenanceError::Retention { text: text.into() };
    let mut parts = text.split_whitespace();
    let (Some(number), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(err());
    };
    let count: u64 = number.parse().map_err(|_| err())?;
    let unit = unit.to_ascii_lowercase();
    let unit = unit.strip_suffix('s').unwrap_or(&unit);
    let (_, size) = UNITS.iter().find(|(name, _)| *name == unit).ok_or_else(err)?;
    let seconds = count.checked_mul(*size).ok_or_else(err)?;
    Ok(RetentionPeriod {
        seconds,
        source_text: text.trim().to_string(),
    })
}

/// Shortest phrase in the largest unit that divides `seconds` evenly.
pub fn format_retention(seconds: u64) -> String {
    let (name, size) = UNITS
        .iter()
        .find(|(_, size)| seconds > 0 && seconds % size == 0)
        .copied()
        .unwrap_or(("second", 1));
    let count = seconds / size;
    if count == 1 {
        format!("1 {name}")
    } else {
        format!("{count} {name}s")
    }
}
