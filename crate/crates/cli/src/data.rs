//! CSV interchange files: offer bids and hourly covariates.
//!
//! Curves: `timestamp,owner,unit_id,price_eur_mwh,quantity_mwh`, one row per
//! bid, rows grouped by non-decreasing timestamp.
//! Covariates: `timestamp,demand_forecast,wind_forecast,solar_forecast,
//! realized_price,is_holiday`, one row per hour, strictly increasing. An
//! empty `realized_price` marks an hour whose price is not known yet.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use genco_core::curves::{CurveError, OfferBlock, Owner};
use thiserror::Error;

pub const CURVES_HEADER: [&str; 5] = ["timestamp", "owner", "unit_id", "price_eur_mwh", "quantity_mwh"];
pub const COVARIATES_HEADER: [&str; 6] = [
    "timestamp",
    "demand_forecast",
    "wind_forecast",
    "solar_forecast",
    "realized_price",
    "is_holiday",
];
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("header must be `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: timestamp {timestamp} goes backwards")]
    NonMonotone { line: u64, timestamp: NaiveDateTime },
    #[error("file has no data rows")]
    Empty,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Shortest text that parses back to the same value; NaN is empty.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn reader<R: Read>(input: R, expected: &[&str]) -> Result<csv::Reader<R>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|source| DataError::Csv { line: 1, source })?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(DataError::Header {
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(rdr)
}

struct Fields<'a> {
    record: &'a csv::StringRecord,
    line: u64,
}

impl Fields<'_> {
    fn err(&self, message: String) -> DataError {
        DataError::Row {
            line: self.line,
            message,
        }
    }

    fn text(&self, i: usize, name: &str) -> Result<&str, DataError> {
        self.record.get(i).ok_or_else(|| self.err(format!("missing `{name}`")))
    }

    fn timestamp(&self) -> Result<NaiveDateTime, DataError> {
        let s = self.text(0, "timestamp")?;
        parse_timestamp(s).ok_or_else(|| self.err(format!("bad timestamp `{s}`")))
    }

    fn number(&self, i: usize, name: &str) -> Result<f64, DataError> {
        let s = self.text(i, name)?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(format!("bad `{name}` value `{s}`"))),
        }
    }
}

fn records<R: Read>(
    rdr: &mut csv::Reader<R>,
    mut row: impl FnMut(&Fields) -> Result<(), DataError>,
) -> Result<usize, DataError> {
    let mut count = 0;
    for rec in rdr.records() {
        let record = rec.map_err(|source| DataError::Csv {
            line: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        row(&Fields { record: &record, line })?;
        count += 1;
    }
    if count == 0 {
        return Err(DataError::Empty);
    }
    Ok(count)
}

/// All bids of one hour, split by owner.
#[derive(Debug, Clone, PartialEq)]
pub struct HourOffers {
    pub timestamp: NaiveDateTime,
    pub genco: Vec<OfferBlock>,
    pub competitors: Vec<OfferBlock>,
}

impl HourOffers {
    pub fn new(timestamp: NaiveDateTime) -> Self {
        Self {
            timestamp,
            genco: Vec::new(),
            competitors: Vec::new(),
        }
    }

    pub fn push(&mut self, block: OfferBlock) {
        match block.owner {
            Owner::Genco => self.genco.push(block),
            Owner::Competitor => self.competitors.push(block),
        }
    }
}

pub fn read_curves<R: Read>(input: R, price_cap: f64) -> Result<Vec<HourOffers>, DataError> {
    let mut rdr = reader(input, &CURVES_HEADER)?;
    let mut hours: Vec<HourOffers> = Vec::new();
    records(&mut rdr, |f| {
        let timestamp = f.timestamp()?;
        let owner: Owner = f.text(1, "owner")?.parse().map_err(|e| f.err(e))?;
        let unit = f.text(2, "unit_id")?;
        let price = f.number(3, "price_eur_mwh")?;
        let quantity = f.number(4, "quantity_mwh")?;
        let block = OfferBlock::new(timestamp, owner, unit, price, quantity, price_cap)
            .map_err(|e: CurveError| f.err(e.to_string()))?;
        match hours.last_mut() {
            Some(h) if h.timestamp == timestamp => h.push(block),
            Some(h) if h.timestamp > timestamp => {
                return Err(DataError::NonMonotone {
                    line: f.line,
                    timestamp,
                })
            }
            _ => {
                let mut h = HourOffers::new(timestamp);
                h.push(block);
                hours.push(h);
            }
        }
        Ok(())
    })?;
    Ok(hours)
}

pub fn ingest_curves(path: &Path, price_cap: f64) -> Result<Vec<HourOffers>, DataError> {
    read_curves(File::open(path).map_err(io_err(path))?, price_cap)
}

pub fn write_curves<W: Write>(out: W, hours: &[HourOffers]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let werr = |source| DataError::Csv { line: 0, source };
    w.write_record(CURVES_HEADER).map_err(werr)?;
    for h in hours {
        for b in h.genco.iter().chain(&h.competitors) {
            w.write_record([
                format_timestamp(b.timestamp),
                b.owner.to_string(),
                b.unit_id.clone(),
                format_number(b.price),
                format_number(b.quantity),
            ])
            .map_err(werr)?;
        }
    }
    w.flush().map_err(|source| DataError::Io {
        path: "curves".into(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateRow {
    pub timestamp: NaiveDateTime,
    pub demand: f64,
    pub wind: f64,
    pub solar: f64,
    /// NaN when unknown.
    pub price: f64,
    pub holiday: bool,
}

pub fn read_covariates<R: Read>(input: R) -> Result<Vec<CovariateRow>, DataError> {
    let mut rdr = reader(input, &COVARIATES_HEADER)?;
    let mut rows: Vec<CovariateRow> = Vec::new();
    records(&mut rdr, |f| {
        let timestamp = f.timestamp()?;
        if rows.last().is_some_and(|r| r.timestamp >= timestamp) {
            return Err(DataError::NonMonotone {
                line: f.line,
                timestamp,
            });
        }
        let price = match f.text(4, "realized_price")? {
            "" => f64::NAN,
            _ => f.number(4, "realized_price")?,
        };
        let holiday = match f.text(5, "is_holiday")?.to_ascii_lowercase().as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(f.err(format!("bad `is_holiday` value `{other}`"))),
        };
        let row = CovariateRow {
            timestamp,
            demand: f.number(1, "demand_forecast")?,
            wind: f.number(2, "wind_forecast")?,
            solar: f.number(3, "solar_forecast")?,
            price,
            holiday,
        };
        if row.demand <= 0.0 || row.wind < 0.0 || row.solar < 0.0 {
            return Err(f.err("forecasts must be non-negative and demand positive".into()));
        }
        rows.push(row);
        Ok(())
    })?;
    Ok(rows)
}

pub fn ingest_covariates(path: &Path) -> Result<Vec<CovariateRow>, DataError> {
    read_covariates(File::open(path).map_err(io_err(path))?)
}

pub fn write_covariates<W: Write>(out: W, rows: &[CovariateRow]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let werr = |source| DataError::Csv { line: 0, source };
    w.write_record(COVARIATES_HEADER).map_err(werr)?;
    for r in rows {
        w.write_record([
            format_timestamp(r.timestamp),
            format_number(r.demand),
            format_number(r.wind),
            format_number(r.solar),
            format_number(r.price),
            u8::from(r.holiday).to_string(),
        ])
        .map_err(werr)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "covariates".into(),
        source,
    })
}

/// Writes a table to `path`, creating parent directories.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), DataError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let werr = |source| DataError::Csv { line: 0, source };
    w.write_record(header).map_err(werr)?;
    for r in rows {
        w.write_record(&r).map_err(werr)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a table written by [`write_table`], checking the header.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = reader(file, header)?;
    let mut out = Vec::new();
    records(&mut rdr, |f| {
        out.push(f.record.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Parses field `i` of a table row as a number.
pub fn field_number(r: &csv::StringRecord, i: usize) -> Result<f64, DataError> {
    let line = r.position().map_or(0, |p| p.line());
    let s = r.get(i).unwrap_or("");
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| DataError::Row {
        line,
        message: format!("bad number `{s}` in column {}", i + 1),
    })
}
