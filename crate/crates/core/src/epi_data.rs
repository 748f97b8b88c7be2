//! Observed daily case counts and the cumulative series derived from them.
//!
//! Input CSV (UTF-8, header required):
//!
//! ```text
//! day,new_infected,new_died,new_recovered
//! ```
//!
//! `day` is either an integer day index or an ISO-8601 date (`YYYY-MM-DD`). Dates are
//! mapped to day indices with day 1 = first row. Days must be contiguous; gaps and
//! duplicates are rejected rather than interpolated. "Removed" is died + recovered.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{precondition, DataError, Result};
use crate::gld::GroupedCounts;
use crate::scalar::Scalar;

pub const INPUT_HEADER: [&str; 4] = ["day", "new_infected", "new_died", "new_recovered"];
pub const OUTPUT_HEADER: [&str; 7] =
    ["day", "new_infected", "new_died", "new_recovered", "cum_infected", "cum_removed", "active"];

/// One day of reported counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DailyRecord {
    pub day_index: i64,
    pub new_infected: u64,
    pub new_died: u64,
    pub new_recovered: u64,
}

impl DailyRecord {
    pub fn new_removed(&self) -> u64 {
        self.new_died + self.new_recovered
    }
}

/// A validated, contiguous daily series with cumulative infected `T`, cumulative removed
/// `R` and active `I = T - R`.
///
/// Series built from [`DailyRecord`]s carry integer counts. Model-generated series may
/// carry real-valued cumulative curves instead (see [`EpidemicSeries::from_cumulative`]);
/// those have no records and cannot be written back to the ingestion format.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicSeries<T> {
    first_day: i64,
    start_date: Option<NaiveDate>,
    records: Vec<DailyRecord>,
    cum_infected: Vec<T>,
    cum_removed: Vec<T>,
}

impl<T: Scalar> EpidemicSeries<T> {
    pub fn from_records(records: Vec<DailyRecord>) -> Result<Self, DataError> {
        Self::build(records, None)
    }

    fn build(records: Vec<DailyRecord>, start_date: Option<NaiveDate>) -> Result<Self, DataError> {
        let first = records.first().ok_or(DataError::Empty)?;
        let first_day = first.day_index;
        let mut cum_infected = Vec::with_capacity(records.len());
        let mut cum_removed = Vec::with_capacity(records.len());
        let (mut t, mut r) = (0u64, 0u64);
        for (i, rec) in records.iter().enumerate() {
            let expected = first_day + i as i64;
            if rec.day_index != expected {
                let message = if rec.day_index < expected {
                    format!("duplicate or out-of-order day {} (expected {expected})", rec.day_index)
                } else {
                    format!("missing day {expected} (found {})", rec.day_index)
                };
                return Err(DataError::Row { row: i + 1, message });
            }
            t += rec.new_infected;
            r += rec.new_removed();
            if r > t {
                return Err(DataError::Row {
                    row: i + 1,
                    message: format!("cumulative removed {r} exceeds cumulative infected {t}"),
                });
            }
            cum_infected.push(T::from_count(t));
            cum_removed.push(T::from_count(r));
        }
        Ok(Self { first_day, start_date, records, cum_infected, cum_removed })
    }

    /// Builds a series directly from cumulative curves, e.g. the output of a model run.
    pub fn from_cumulative(first_day: i64, cum_infected: Vec<T>, cum_removed: Vec<T>) -> Result<Self, DataError> {
        if cum_infected.is_empty() {
            return Err(DataError::Empty);
        }
        if cum_infected.len() != cum_removed.len() {
            return Err(DataError::Series("cumulative infected and removed lengths differ".into()));
        }
        for i in 0..cum_infected.len() {
            let (t, r) = (cum_infected[i], cum_removed[i]);
            let bad = |message: &str| DataError::Row { row: i + 1, message: message.to_string() };
            if !t.is_finite() || !r.is_finite() {
                return Err(bad("non-finite value"));
            }
            if t < T::zero() || r < T::zero() {
                return Err(bad("negative cumulative value"));
            }
            if r > t {
                return Err(bad("cumulative removed exceeds cumulative infected"));
            }
            if i > 0 && (t < cum_infected[i - 1] || r < cum_removed[i - 1]) {
                return Err(bad("cumulative series decreases"));
            }
        }
        Ok(Self { first_day, start_date: None, records: Vec::new(), cum_infected, cum_removed })
    }

    pub fn len(&self) -> usize {
        self.cum_infected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_infected.is_empty()
    }

    pub fn first_day(&self) -> i64 {
        self.first_day
    }

    pub fn last_day(&self) -> i64 {
        self.first_day + self.len() as i64 - 1
    }

    pub fn day(&self, idx: usize) -> i64 {
        self.first_day + idx as i64
    }

    pub fn days(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len()).map(move |i| self.first_day + i as i64)
    }

    pub fn index_of_day(&self, day: i64) -> Option<usize> {
        (day >= self.first_day && day <= self.last_day()).then(|| (day - self.first_day) as usize)
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.start_date
    }

    /// Original integer records; empty for series built from cumulative curves.
    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    /// Cumulative infected `T̃(t)`.
    pub fn cum_infected(&self) -> &[T] {
        &self.cum_infected
    }

    /// Cumulative removed `R̃(t)` (died + recovered).
    pub fn cum_removed(&self) -> &[T] {
        &self.cum_removed
    }

    /// Active infectious `Ĩ(t) = T̃(t) - R̃(t)`.
    pub fn active(&self) -> Vec<T> {
        self.cum_infected.iter().zip(&self.cum_removed).map(|(&t, &r)| t - r).collect()
    }

    pub fn active_at(&self, idx: usize) -> T {
        self.cum_infected[idx] - self.cum_removed[idx]
    }

    /// Daily new infections, `T̃(t) - T̃(t-1)`, with the first day carrying all prior mass.
    pub fn new_infected(&self) -> Vec<T> {
        let mut prev = T::zero();
        self.cum_infected
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    pub fn max_cum_infected(&self) -> T {
        self.cum_infected.iter().copied().fold(T::zero(), T::max)
    }

    /// The prefix of the series ending at `last_day` (inclusive).
    pub fn truncated(&self, last_day: i64) -> Result<Self> {
        let Some(idx) = self.index_of_day(last_day) else {
            return precondition(format!(
                "truncation day {last_day} outside series days {}..={}",
                self.first_day,
                self.last_day()
            ));
        };
        let n = idx + 1;
        Ok(Self {
            first_day: self.first_day,
            start_date: self.start_date,
            records: self.records.iter().take(n).copied().collect(),
            cum_infected: self.cum_infected[..n].to_vec(),
            cum_removed: self.cum_removed[..n].to_vec(),
        })
    }

    /// `S̃(t) = N - T̃(t)`.
    pub fn susceptible_series(&self, population: T) -> Result<Vec<T>> {
        let max_t = self.max_cum_infected();
        if !(population >= max_t) {
            return precondition(format!("population {population} is below the cumulative infected count {max_t}"));
        }
        Ok(self.cum_infected.iter().map(|&t| population - t).collect())
    }

    /// Daily bins for the grouped truncated likelihood: boundary `t_i` is the end of day `i`,
    /// `k_0` is everything observed up to the first day, `k_i` the new infections of each later day.
    pub fn grouped_counts(&self) -> GroupedCounts<T> {
        let boundaries = self.days().map(|d| T::lit(d as f64)).collect();
        GroupedCounts::new_unchecked(boundaries, self.new_infected())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        if self.records.is_empty() {
            return Err(DataError::Series("series has no integer records to serialize".into()));
        }
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| DataError::Io(e.to_string());
        w.write_record(OUTPUT_HEADER).map_err(io)?;
        let (mut t, mut r) = (0u64, 0u64);
        for (i, rec) in self.records.iter().enumerate() {
            t += rec.new_infected;
            r += rec.new_removed();
            let day = match self.start_date {
                Some(d0) => (d0 + chrono::Days::new(i as u64)).format("%Y-%m-%d").to_string(),
                None => rec.day_index.to_string(),
            };
            w.write_record([
                day,
                rec.new_infected.to_string(),
                rec.new_died.to_string(),
                rec.new_recovered.to_string(),
                t.to_string(),
                r.to_string(),
                (t - r).to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| DataError::Io(e.to_string()))
    }
}

/// Writes raw records in the ingestion format (no derived columns).
pub fn write_records<W: Write>(records: &[DailyRecord], writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| DataError::Io(e.to_string());
    w.write_record(INPUT_HEADER).map_err(io)?;
    for rec in records {
        w.write_record([
            rec.day_index.to_string(),
            rec.new_infected.to_string(),
            rec.new_died.to_string(),
            rec.new_recovered.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| DataError::Io(e.to_string()))
}

pub fn load_series<T: Scalar>(path: impl AsRef<Path>) -> Result<EpidemicSeries<T>, DataError> {
    let file = File::open(path.as_ref()).map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_series(file)
}

enum DayLabel {
    Index(i64),
    Date(NaiveDate),
}

fn parse_day(cell: &str) -> Option<DayLabel> {
    if let Ok(i) = cell.parse::<i64>() {
        return Some(DayLabel::Index(i));
    }
    NaiveDate::parse_from_str(cell, "%Y-%m-%d").ok().map(DayLabel::Date)
}

fn parse_count(cell: &str, column: &str, row: usize) -> Result<u64, DataError> {
    let err = |message: String| DataError::Row { row, message };
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(err(format!("negative count {cell} in column {column}"))),
        Ok(_) => Err(err(format!("non-integer count {cell} in column {column}"))),
        Err(_) => Err(err(format!("non-numeric value `{cell}` in column {column}"))),
    }
}

type ParsedRows = (Vec<DailyRecord>, Option<NaiveDate>, Vec<DataError>);

/// Reads every row, collecting per-row cell errors instead of stopping at the first.
fn parse_rows<R: Read>(reader: R) -> Result<ParsedRows, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DataError::Io(e.to_string()))?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found.is_empty() || (found.len() == 1 && found[0].is_empty()) {
        return Err(DataError::Empty);
    }
    if found != INPUT_HEADER {
        return Err(DataError::Header { expected: INPUT_HEADER.join(","), found: found.join(",") });
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut start_date = None;
    let mut uses_dates = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let parsed = (|| {
            let rec = rec.map_err(|e| DataError::Row { row, message: e.to_string() })?;
            if rec.len() != INPUT_HEADER.len() {
                return Err(DataError::Row { row, message: format!("expected 4 fields, found {}", rec.len()) });
            }
            let label = parse_day(&rec[0])
                .ok_or_else(|| DataError::Row { row, message: format!("invalid day `{}`", &rec[0]) })?;
            let day_index = match label {
                DayLabel::Index(d) => {
                    if uses_dates == Some(true) {
                        return Err(DataError::Row { row, message: "mixes day indices and dates".into() });
                    }
                    uses_dates = Some(false);
                    d
                }
                DayLabel::Date(date) => {
                    if uses_dates == Some(false) {
                        return Err(DataError::Row { row, message: "mixes day indices and dates".into() });
                    }
                    uses_dates = Some(true);
                    let d0 = *start_date.get_or_insert(date);
                    (date - d0).num_days() + 1
                }
            };
            Ok(DailyRecord {
                day_index,
                new_infected: parse_count(&rec[1], "new_infected", row)?,
                new_died: parse_count(&rec[2], "new_died", row)?,
                new_recovered: parse_count(&rec[3], "new_recovered", row)?,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => errors.push(e),
        }
    }
    Ok((records, start_date, errors))
}

fn assemble<T: Scalar>(
    records: Vec<DailyRecord>,
    start_date: Option<NaiveDate>,
) -> Result<EpidemicSeries<T>, DataError> {
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    EpidemicSeries::build(records, start_date).map_err(|e| match e {
        // translate record position to file line
        DataError::Row { row, message } => DataError::Row { row: row + 1, message },
        other => other,
    })
}

/// Parses and validates a series. Row numbers in errors are 1-based file lines (header = line 1).
pub fn read_series<T: Scalar, R: Read>(reader: R) -> Result<EpidemicSeries<T>, DataError> {
    let (records, start_date, mut errors) = parse_rows(reader)?;
    if !errors.is_empty() {
        return Err(errors.swap_remove(0));
    }
    assemble(records, start_date)
}

/// Every problem found in the input: all malformed rows, or, when every row parses, the first
/// sequence-level problem (gap, duplicate, removals exceeding infections). Empty when valid.
pub fn validate_series<R: Read>(reader: R) -> Vec<DataError> {
    match parse_rows(reader) {
        Err(e) => vec![e],
        Ok((_, _, errors)) if !errors.is_empty() => errors,
        Ok((records, start_date, _)) => assemble::<f64>(records, start_date).err().into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EpidemicSeries<f64>, DataError> {
        read_series(text.as_bytes())
    }

    #[test]
    fn running_sums() {
        let s = parse("day,new_infected,new_died,new_recovered\n1,2,0,0\n2,3,0,1\n3,5,1,0\n").unwrap();
        assert_eq!(s.cum_infected(), &[2.0, 5.0, 10.0]);
        assert_eq!(s.cum_removed(), &[0.0, 1.0, 2.0]);
        assert_eq!(s.active(), vec![2.0, 4.0, 8.0]);
    }

    #[test]
    fn all_zero_rows() {
        let s = parse("day,new_infected,new_died,new_recovered\n1,0,0,0\n2,0,0,0\n").unwrap();
        assert!(s.cum_infected().iter().chain(s.cum_removed()).all(|&v| v == 0.0));
        assert!(s.active().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_count_names_row() {
        let err = parse("day,new_infected,new_died,new_recovered\n1,2,0,0\n2,3,-1,0\n").unwrap_err();
        assert_eq!(err, DataError::Row { row: 3, message: "negative count -1 in column new_died".into() });
    }

    #[test]
    fn bad_cells_and_gaps() {
        let h = "day,new_infected,new_died,new_recovered\n";
        assert!(matches!(parse(&format!("{h}1,x,0,0\n")), Err(DataError::Row { row: 2, .. })));
        assert!(matches!(parse(&format!("{h}1,1.5,0,0\n")), Err(DataError::Row { row: 2, .. })));
        assert!(matches!(parse(&format!("{h}1,1,0,0\n3,1,0,0\n")), Err(DataError::Row { row: 3, .. })));
        assert!(matches!(parse(&format!("{h}1,1,0,0\n1,1,0,0\n")), Err(DataError::Row { row: 3, .. })));
        assert!(matches!(parse(&format!("{h}1.5,1,0,0\n")), Err(DataError::Row { row: 2, .. })));
        assert!(matches!(parse(&format!("{h}1,1,2,0\n")), Err(DataError::Row { row: 2, .. })));
        assert_eq!(parse(h).unwrap_err(), DataError::Empty);
        assert_eq!(parse("").unwrap_err(), DataError::Empty);
        assert!(matches!(parse("d,a,b,c\n1,1,1,1\n"), Err(DataError::Header { .. })));
    }

    #[test]
    fn validation_lists_every_bad_row() {
        let h = "day,new_infected,new_died,new_recovered\n";
        let errs = validate_series(format!("{h}1,1,0,0\n2,-1,0,0\n3,x,0,0\n4,1,0,0\n").as_bytes());
        let rows: Vec<usize> = errs
            .iter()
            .map(|e| match e {
                DataError::Row { row, .. } => *row,
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(rows, vec![3, 4]);
        assert!(validate_series(format!("{h}1,1,0,0\n").as_bytes()).is_empty());
        assert_eq!(validate_series("".as_bytes()), vec![DataError::Empty]);
    }

    #[test]
    fn dates_become_day_indices() {
        let s =
            parse("day,new_infected,new_died,new_recovered\n2020-01-30,4,0,0\n2020-01-31,1,0,0\n2020-02-01,2,0,1\n")
                .unwrap();
        assert_eq!(s.days().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(s.start_date(), NaiveDate::from_ymd_opt(2020, 1, 30));
        let gap = parse("day,new_infected,new_died,new_recovered\n2020-01-30,4,0,0\n2020-02-01,1,0,0\n");
        assert!(matches!(gap, Err(DataError::Row { row: 3, .. })));
    }

    #[test]
    fn susceptibles() {
        let s = EpidemicSeries::<f64>::from_cumulative(1, vec![2.0, 5.0, 10.0], vec![0.0; 3]).unwrap();
        assert_eq!(s.susceptible_series(100.0).unwrap(), vec![98.0, 95.0, 90.0]);
        assert_eq!(*s.susceptible_series(10.0).unwrap().last().unwrap(), 0.0);
        assert!(s.susceptible_series(9.0).is_err());
    }

    #[test]
    fn grouped_counts_conserve_mass() {
        let s = parse("day,new_infected,new_died,new_recovered\n1,4,0,0\n2,1,0,0\n3,2,0,0\n").unwrap();
        let g = s.grouped_counts();
        assert_eq!(g.counts(), &[4.0, 1.0, 2.0]);
        assert_eq!(g.n(), 2);
        assert_eq!(g.boundaries(), &[1.0, 2.0, 3.0]);
        assert_eq!(g.total(), *s.cum_infected().last().unwrap());

        let single = parse("day,new_infected,new_died,new_recovered\n1,9,0,0\n").unwrap().grouped_counts();
        assert_eq!(single.counts(), &[9.0]);
        assert_eq!(single.n(), 0);
    }

    #[test]
    fn truncation_keeps_prefix() {
        let s = parse("day,new_infected,new_died,new_recovered\n1,4,0,0\n2,1,0,0\n3,2,0,0\n").unwrap();
        let t = s.truncated(2).unwrap();
        assert_eq!(t.cum_infected(), &[4.0, 5.0]);
        assert_eq!(t.records().len(), 2);
        assert!(s.truncated(4).is_err());
    }

    #[test]
    fn cumulative_constructor_validates() {
        assert!(EpidemicSeries::<f64>::from_cumulative(1, vec![1.0, 0.5], vec![0.0, 0.0]).is_err());
        assert!(EpidemicSeries::<f64>::from_cumulative(1, vec![1.0], vec![2.0]).is_err());
        assert!(EpidemicSeries::<f64>::from_cumulative(1, vec![f64::NAN], vec![0.0]).is_err());
        let s = EpidemicSeries::<f64>::from_cumulative(1, vec![1.0], vec![0.0]).unwrap();
        assert!(s.write_csv(Vec::new()).is_err());
    }
}
