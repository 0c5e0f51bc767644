//! Timestamps are handled as naive local wall-clock time. Inputs carrying a
//! UTC offset are converted to the configured zone on the way in.

use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDateTime};

const FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
];

pub fn parse_zone(s: &str) -> Result<FixedOffset, String> {
    match s.trim() {
        "UTC" | "utc" | "Z" | "z" => Ok(FixedOffset::east_opt(0).unwrap()),
        other => FixedOffset::from_str(other).map_err(|e| format!("bad UTC offset {other:?}: {e}")),
    }
}

pub fn parse_timestamp(s: &str, zone: FixedOffset) -> Result<NaiveDateTime, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&zone).naive_local());
    }
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| format!("unrecognized timestamp {s:?}"))
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn utc() -> FixedOffset {
        parse_zone("UTC").unwrap()
    }

    #[test]
    fn naive_and_offset_forms() {
        let want = NaiveDate::from_ymd_opt(2021, 3, 4)
            .unwrap()
            .and_hms_opt(17, 5, 0)
            .unwrap();
        assert_eq!(parse_timestamp("2021-03-04T17:05:00", utc()).unwrap(), want);
        assert_eq!(parse_timestamp("2021-03-04T17:05", utc()).unwrap(), want);
        assert_eq!(
            parse_timestamp("2021-03-04T15:05:00Z", parse_zone("+02:00").unwrap()).unwrap(),
            want
        );
        assert_eq!(parse_timestamp("2021-03-04T18:05:00+01:00", utc()).unwrap(), want);
        assert!(parse_timestamp("yesterday", utc()).is_err());
        assert_eq!(format_timestamp(want), "2021-03-04T17:05:00");
    }

    #[test]
    fn zones() {
        assert_eq!(parse_zone("-05:30").unwrap().local_minus_utc(), -(5 * 3600 + 1800));
        assert!(parse_zone("Europe/Rome").is_err());
    }
}
