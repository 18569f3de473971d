//! Day classes used to group travel behaviour.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayClass {
    Weekday,
    Saturday,
    SundayHoliday,
}

impl DayClass {
    pub const ALL: [DayClass; 3] = [DayClass::Weekday, DayClass::Saturday, DayClass::SundayHoliday];

    pub fn as_str(&self) -> &'static str {
        match self {
            DayClass::Weekday => "weekday",
            DayClass::Saturday => "saturday",
            DayClass::SundayHoliday => "sunday_holiday",
        }
    }
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weekday" => Ok(DayClass::Weekday),
            "saturday" => Ok(DayClass::Saturday),
            "sunday_holiday" | "sunday" | "holiday" => Ok(DayClass::SundayHoliday),
            other => Err(format!("unknown day class {other:?}")),
        }
    }
}

/// Holiday-aware day classifier. Holidays fall in the Sunday class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub holidays: BTreeSet<NaiveDate>,
}

impl Calendar {
    pub fn with_holidays(holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        Calendar {
            holidays: holidays.into_iter().collect(),
        }
    }

    pub fn day_class(&self, date: NaiveDate) -> DayClass {
        if self.holidays.contains(&date) {
            return DayClass::SundayHoliday;
        }
        match date.weekday() {
            Weekday::Sat => DayClass::Saturday,
            Weekday::Sun => DayClass::SundayHoliday,
            _ => DayClass::Weekday,
        }
    }

    /// Reads a holiday file: one `YYYY-MM-DD` per line, `#` comments and a
    /// `date` header allowed.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut holidays = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "date" {
                continue;
            }
            let d = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                )
            })?;
            holidays.insert(d);
        }
        Ok(Calendar { holidays })
    }
}
