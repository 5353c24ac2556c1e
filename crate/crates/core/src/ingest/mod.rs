//! Raw CSV ingestion and cleaning: minute bucketing, outlier screening and
//! removal of vehicle start/stop segments.

mod clean;
mod parse;

use std::io::Write;

pub use clean::{
    bucket_average, clean_records, filter_outliers, haversine_km, remove_stationary_segments, Bound, CleaningConfig,
    CleaningReport, DeploymentMode, OutlierReport, StationaryReport,
};
pub use parse::{
    parse_csv, parse_timestamp, Canonical, ColumnMapping, ParseReport, TimestampFormat, UnitHint,
};

use crate::dataset::{Field, SampleRecord};
use crate::error::Result;

/// Header of the canonical CSV dialect.
pub const CANONICAL_HEADER: [&str; 8] = ["timestamp", "s", "t", "rh", "y", "lat", "lon", "speed"];

/// Writes records in the canonical dialect; missing fields are empty cells.
pub fn write_canonical_csv<W: Write>(records: &[SampleRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CANONICAL_HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(8);
    for r in records {
        row.clear();
        row.push(r.timestamp.to_string());
        for f in Field::ALL {
            row.push(r.get(f).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file in the canonical dialect.
pub fn read_canonical_csv<R: std::io::Read>(input: R) -> Result<(Vec<SampleRecord>, ParseReport)> {
    parse_csv(input, &ColumnMapping::canonical())
}
