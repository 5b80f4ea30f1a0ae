//! Price/demand time series: CSV ingestion, export, and a synthetic feed.
//!
//! CSV layout, header required:
//!
//! ```text
//! timestamp,price,demand
//! 2024-07-05T00:00:00,61.2,7210.5
//! ```
//!
//! Timestamps are ISO-8601 local time without offset; spacing must be
//! uniform at `interval_minutes`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng;

use super::{rng_for, stream};
use crate::error::{Error, Result};

pub const HEADER: [&str; 3] = ["timestamp", "price", "demand"];
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const ACCEPTED_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSeries {
    pub region: String,
    pub interval_minutes: u32,
    pub timestamps: Vec<NaiveDateTime>,
    /// $/MWh
    pub price: Vec<f64>,
    /// MW
    pub demand: Vec<f64>,
    /// Non-fatal findings such as non-positive demand rows.
    pub warnings: Vec<String>,
}

impl MarketSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn max_demand(&self) -> f64 {
        self.demand.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    ACCEPTED_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

pub fn ingest_market_csv(path: impl AsRef<Path>, region: &str, interval_minutes: u32) -> Result<MarketSeries> {
    let path = path.as_ref();
    if interval_minutes == 0 {
        return Err(Error::Config("interval_minutes must be positive".into()));
    }
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(parse_err(1, "empty file: missing header row".into()));
    }
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(
            1,
            format!("expected header {:?}, found {:?}", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut series = MarketSeries {
        region: region.to_string(),
        interval_minutes,
        timestamps: Vec::new(),
        price: Vec::new(),
        demand: Vec::new(),
        warnings: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", record.len())));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_err(line, format!("invalid timestamp {:?}", &record[0])))?;
        let number = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = record[k]
                .parse()
                .map_err(|_| parse_err(line, format!("invalid {name} {:?}", &record[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite {name}")));
            }
            Ok(v)
        };
        let price = number(1, "price")?;
        let demand = number(2, "demand")?;
        if demand <= 0.0 {
            series
                .warnings
                .push(format!("line {line}: non-positive demand {demand} at {ts}"));
        }
        series.timestamps.push(ts);
        series.price.push(price);
        series.demand.push(demand);
    }
    if series.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }

    let step = Duration::minutes(interval_minutes as i64);
    let offending: Vec<String> = series
        .timestamps
        .windows(2)
        .filter(|w| w[1] - w[0] != step)
        .map(|w| format!("{} -> {}", w[0].format(TIMESTAMP_FORMAT), w[1].format(TIMESTAMP_FORMAT)))
        .collect();
    if !offending.is_empty() {
        const SHOWN: usize = 10;
        let more = offending.len().saturating_sub(SHOWN);
        let mut message = format!(
            "{} spacing violation(s) against {interval_minutes}-minute interval: {}",
            offending.len(),
            offending[..offending.len().min(SHOWN)].join(", ")
        );
        if more > 0 {
            message.push_str(&format!(" (+{more} more)"));
        }
        return Err(Error::Ingestion {
            path: path.to_path_buf(),
            message,
        });
    }
    Ok(series)
}

/// Writes the series in the ingestion format. Floats use the shortest
/// representation that round-trips.
pub fn write_market_csv(series: &MarketSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", HEADER.join(",")).map_err(io)?;
    for ((ts, p), d) in series.timestamps.iter().zip(&series.price).zip(&series.demand) {
        writeln!(w, "{},{p:?},{d:?}", ts.format(TIMESTAMP_FORMAT)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Deterministic stand-in feed with a daily demand cycle and a price cycle.
///
/// Demand ranges over roughly 6000–9100 MW and price over 30–85 $/MWh. At
/// those levels the unconstrained output of the default generator fleet stays
/// below demand, so the demand constraint binds at every step.
pub fn synthetic_market(len: usize, interval_minutes: u32, seed: u64, region: &str) -> MarketSeries {
    let mut rng = rng_for(seed, 0, stream::MARKET);
    let start = NaiveDate::from_ymd_opt(2024, 7, 5)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let step = Duration::minutes(interval_minutes as i64);
    let mut timestamps = Vec::with_capacity(len);
    let mut price = Vec::with_capacity(len);
    let mut demand = Vec::with_capacity(len);
    for k in 0..len {
        let ts = start + step * k as i32;
        let hour = (k as f64 * interval_minutes as f64 / 60.0) % 24.0;
        let day = 2.0 * PI * hour / 24.0;
        let d = 7500.0 + 1200.0 * (day - 2.0 * PI * 8.0 / 24.0).sin() + 250.0 * (2.0 * day).sin()
            + rng.gen_range(-80.0..80.0);
        let p = 55.0 + 20.0 * (day - 2.0 * PI * 10.0 / 24.0).sin() + rng.gen_range(-8.0..8.0);
        timestamps.push(ts);
        price.push(p);
        demand.push(d);
    }
    MarketSeries {
        region: region.to_string(),
        interval_minutes,
        timestamps,
        price,
        demand,
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn full_length_series_ingests() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nsw.csv");
        let s = synthetic_market(2880, 5, 1, "NSW");
        write_market_csv(&s, &path).unwrap();
        let back = ingest_market_csv(&path, "NSW", 5).unwrap();
        assert_eq!(back.len(), 2880);
        assert_eq!(back, s);
    }

    #[test]
    fn missing_interval_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "gap.csv",
            "timestamp,price,demand\n2024-07-05T00:00:00,50,7000\n2024-07-05T00:05:00,51,7001\n2024-07-05T00:15:00,52,7002\n",
        );
        match ingest_market_csv(&p, "SA", 5) {
            Err(Error::Ingestion { message, .. }) => {
                assert!(message.contains("2024-07-05T00:05:00 -> 2024-07-05T00:15:00"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "empty.csv", "");
        assert!(matches!(ingest_market_csv(&p, "X", 5), Err(Error::Parse { .. })));
        let p = write(&dir, "header.csv", "timestamp,price,demand\n");
        assert!(matches!(ingest_market_csv(&p, "X", 5), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "bad.csv",
            "timestamp,price,demand\n2024-07-05T00:00:00,50,7000\n2024-07-05T00:05:00,abc,7001\n",
        );
        match ingest_market_csv(&p, "X", 5) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(&dir, "hdr.csv", "time,price,load\n2024-07-05T00:00:00,50,7000\n");
        assert!(matches!(ingest_market_csv(&p, "X", 5), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn non_positive_demand_warns_and_keeps_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "neg.csv",
            "timestamp,price,demand\n2024-07-05 00:00,50,7000\n2024-07-05 00:05,51,0\n",
        );
        let s = ingest_market_csv(&p, "TAS", 5).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.region, "TAS");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            ingest_market_csv("/nonexistent/feed.csv", "X", 5),
            Err(Error::Io { .. })
        ));
    }
}
