//! Exchange-timezone day bucketing.
//!
//! Daily sentiment indices bucket documents by the calendar day of a
//! configurable exchange timezone. US equity markets use US/Eastern, which
//! is implemented here directly with the post-2007 DST rule (second Sunday
//! of March through first Sunday of November) so no tz database is needed.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("unrecognized timezone {0:?} (expected utc, us/eastern, or ±HH:MM)")]
pub struct TzParseError(String);

/// Timezone used to assign a UTC instant to a calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExchangeTz {
    Utc,
    /// US/Eastern with the post-2007 DST schedule (EST/EDT).
    #[default]
    UsEastern,
    /// Fixed offset in minutes east of UTC.
    Fixed(i32),
}

impl ExchangeTz {
    /// Calendar date of `instant` in this timezone.
    pub fn local_date(&self, instant: DateTime<Utc>) -> NaiveDate {
        let offset_minutes = match self {
            ExchangeTz::Utc => 0,
            ExchangeTz::Fixed(minutes) => *minutes,
            ExchangeTz::UsEastern => {
                if us_eastern_dst(instant) {
                    -4 * 60
                } else {
                    -5 * 60
                }
            }
        };
        (instant + Duration::minutes(offset_minutes as i64)).date_naive()
    }
}

/// Whether US/Eastern observes daylight time at `instant`.
///
/// DST runs from 02:00 local on the second Sunday of March (07:00 UTC)
/// until 02:00 local on the first Sunday of November (06:00 UTC).
fn us_eastern_dst(instant: DateTime<Utc>) -> bool {
    let year = instant.year();
    let start = nth_weekday(year, 3, Weekday::Sun, 2)
        .and_hms_opt(7, 0, 0)
        .expect("valid time")
        .and_utc();
    let end = nth_weekday(year, 11, Weekday::Sun, 1)
        .and_hms_opt(6, 0, 0)
        .expect("valid time")
        .and_utc();
    instant >= start && instant < end
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u32) -> NaiveDate {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let shift = (7 + weekday.num_days_from_monday() - first.weekday().num_days_from_monday()) % 7;
    first + Duration::days(shift as i64 + 7 * (n as i64 - 1))
}

impl fmt::Display for ExchangeTz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExchangeTz::Utc => write!(f, "utc"),
            ExchangeTz::UsEastern => write!(f, "us/eastern"),
            ExchangeTz::Fixed(minutes) => {
                let sign = if *minutes < 0 { '-' } else { '+' };
                let abs = minutes.unsigned_abs();
                write!(f, "{}{:02}:{:02}", sign, abs / 60, abs % 60)
            }
        }
    }
}

impl FromStr for ExchangeTz {
    type Err = TzParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        match norm.as_str() {
            "utc" => return Ok(ExchangeTz::Utc),
            "us/eastern" | "america/new_york" => return Ok(ExchangeTz::UsEastern),
            _ => {}
        }
        let (sign, rest) = match norm.strip_prefix('+') {
            Some(rest) => (1, rest),
            None => match norm.strip_prefix('-') {
                Some(rest) => (-1, rest),
                None => return Err(TzParseError(s.to_string())),
            },
        };
        let (h, m) = rest
            .split_once(':')
            .ok_or_else(|| TzParseError(s.to_string()))?;
        let hours: i32 = h.parse().map_err(|_| TzParseError(s.to_string()))?;
        let minutes: i32 = m.parse().map_err(|_| TzParseError(s.to_string()))?;
        if hours > 14 || minutes > 59 {
            return Err(TzParseError(s.to_string()));
        }
        Ok(ExchangeTz::Fixed(sign * (hours * 60 + minutes)))
    }
}
