//! UTC timestamp parsing, formatting and calendar-month arithmetic.

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serializer};

/// Parses an ISO-8601 timestamp that must denote UTC.
///
/// Accepts a `Z` suffix, an explicit `+00:00` offset, or no offset at all
/// (interpreted as UTC). Any other offset is rejected.
pub fn parse_utc(s: &str) -> Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        if dt.offset().local_minus_utc() != 0 {
            return Err(format!("timestamp {s:?} is not UTC"));
        }
        return Ok(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(Utc.from_utc_datetime(&naive));
        }
    }
    Err(format!("invalid ISO-8601 timestamp {s:?}"))
}

pub fn format_utc(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Months since year 0, so consecutive calendar months differ by one.
pub fn month_index(ts: &DateTime<Utc>) -> i32 {
    ts.year() * 12 + ts.month0() as i32
}

/// Formats a month index as `YYYY-MM`.
pub fn month_label(index: i32) -> String {
    format!("{:04}-{:02}", index.div_euclid(12), index.rem_euclid(12) + 1)
}

/// Parses `YYYY-MM` into a month index.
pub fn parse_month(s: &str) -> Result<i32, String> {
    let (y, m) = s
        .trim()
        .split_once('-')
        .ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
    let y: i32 = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
    let m: i32 = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
    if !(1..=12).contains(&m) {
        return Err(format!("month out of range in {s:?}"));
    }
    Ok(y * 12 + m - 1)
}

pub(crate) mod serde_utc {
    use super::*;

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_utc(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse_utc(&raw).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod serde_utc_opt {
    use super::*;

    pub fn serialize<S: Serializer>(ts: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match ts {
            Some(ts) => s.serialize_str(&format_utc(ts)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        match raw.as_deref().map(str::trim) {
            None | Some("") => Ok(None),
            Some(s) => parse_utc(s).map(Some).map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_utc_forms() {
        let a = parse_utc("2013-04-01T12:00:00Z").unwrap();
        let b = parse_utc("2013-04-01T12:00:00+00:00").unwrap();
        let c = parse_utc("2013-04-01T12:00:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(format_utc(&a), "2013-04-01T12:00:00Z");
    }

    #[test]
    fn rejects_offsets_and_garbage() {
        assert!(parse_utc("2013-04-01T12:00:00+02:00").is_err());
        assert!(parse_utc("yesterday").is_err());
    }

    #[test]
    fn month_arithmetic() {
        let jan = parse_month("2014-01").unwrap();
        let dec = parse_month("2013-12").unwrap();
        assert_eq!(jan - dec, 1);
        assert_eq!(month_label(jan), "2014-01");
        let ts = parse_utc("2014-01-31T23:59:59Z").unwrap();
        assert_eq!(month_index(&ts), jan);
        assert!(parse_month("2014-13").is_err());
    }
}
