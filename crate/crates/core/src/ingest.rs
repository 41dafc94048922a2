//! Reader for the UCI Air Quality CSV dialect.
//!
//! The source file looks like this:
//!
//! ```text
//! Date;Time;CO(GT);PT08.S1(CO);NMHC(GT);C6H6(GT);...;T;RH;AH;;
//! 10/03/2004;18.00.00;2,6;1360;150;11,9;...;13,6;48,9;0,7578;;
//! ```
//!
//! Fields are `;`-separated, reals use a decimal comma, `-200` marks a
//! missing reading and every row carries trailing empty columns. Only the
//! eight channels of [`ChannelId`] are kept; the other sensor columns are
//! validated and then dropped.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%d/%m/%Y";
const TIME_FORMAT: &str = "%H.%M.%S";

/// The eight model inputs, in the fixed column order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    #[serde(rename = "CO")]
    Co,
    #[serde(rename = "NMHC")]
    Nmhc,
    #[serde(rename = "C6H6")]
    C6h6,
    #[serde(rename = "NOx")]
    Nox,
    #[serde(rename = "NO2")]
    No2,
    #[serde(rename = "T")]
    Temp,
    #[serde(rename = "RH")]
    Rh,
    #[serde(rename = "AH")]
    Ah,
}

impl ChannelId {
    pub const COUNT: usize = 8;

    pub const ALL: [ChannelId; Self::COUNT] = [
        ChannelId::Co,
        ChannelId::Nmhc,
        ChannelId::C6h6,
        ChannelId::Nox,
        ChannelId::No2,
        ChannelId::Temp,
        ChannelId::Rh,
        ChannelId::Ah,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Short name, used in model files and JSON frame streams.
    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Co => "CO",
            ChannelId::Nmhc => "NMHC",
            ChannelId::C6h6 => "C6H6",
            ChannelId::Nox => "NOx",
            ChannelId::No2 => "NO2",
            ChannelId::Temp => "T",
            ChannelId::Rh => "RH",
            ChannelId::Ah => "AH",
        }
    }

    /// Column header in the UCI file.
    pub fn header(self) -> &'static str {
        match self {
            ChannelId::Co => "CO(GT)",
            ChannelId::Nmhc => "NMHC(GT)",
            ChannelId::C6h6 => "C6H6(GT)",
            ChannelId::Nox => "NOx(GT)",
            ChannelId::No2 => "NO2(GT)",
            ChannelId::Temp => "T",
            ChannelId::Rh => "RH",
            ChannelId::Ah => "AH",
        }
    }

    /// Matches a header cell against the channel's accepted aliases
    /// (`CO(GT)` or `CO`, case-insensitive, surrounding whitespace ignored).
    pub fn from_header(cell: &str) -> Option<ChannelId> {
        let cell = cell.trim();
        ChannelId::ALL.into_iter().find(|ch| {
            cell.eq_ignore_ascii_case(ch.header()) || cell.eq_ignore_ascii_case(ch.name())
        })
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelId::from_header(s).ok_or_else(|| Error::Domain(format!("unknown channel `{s}`")))
    }
}

/// Field separator, decimal mark, missing-value sentinel and header presence.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDialect {
    pub delimiter: char,
    pub decimal: char,
    pub missing: f64,
    pub has_header: bool,
}

impl Default for CsvDialect {
    fn default() -> Self {
        CsvDialect {
            delimiter: ';',
            decimal: ',',
            missing: -200.0,
            has_header: true,
        }
    }
}

impl CsvDialect {
    fn validate(&self) -> Result<()> {
        if self.delimiter == self.decimal {
            return Err(Error::Config(
                "delimiter and decimal separator must differ".into(),
            ));
        }
        if !self.missing.is_finite() {
            return Err(Error::Config(
                "missing-value sentinel must be finite".into(),
            ));
        }
        Ok(())
    }

    fn parse_cell(&self, cell: &str) -> std::result::Result<Option<f64>, String> {
        let cell = cell.trim();
        if cell.is_empty() {
            return Ok(None);
        }
        if self.decimal != '.' && cell.contains('.') {
            return Err(format!("invalid number `{cell}`"));
        }
        let normalized = cell.replace(self.decimal, ".");
        let value: f64 = normalized
            .parse()
            .map_err(|_| format!("invalid number `{cell}`"))?;
        if !value.is_finite() {
            return Err(format!("non-finite number `{cell}`"));
        }
        if value == self.missing {
            return Ok(None);
        }
        Ok(Some(value))
    }

    fn format_value(&self, value: Option<f64>) -> String {
        let text = value.unwrap_or(self.missing).to_string();
        if self.decimal == '.' {
            text
        } else {
            text.replace('.', &self.decimal.to_string())
        }
    }
}

/// One parsed data row: its timestamp plus the eight channels, each either
/// absent or finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    channels: [Option<f64>; ChannelId::COUNT],
}

impl RawRecord {
    /// Builds a record, treating non-finite values as absent.
    pub fn new(timestamp: NaiveDateTime, channels: [Option<f64>; ChannelId::COUNT]) -> Self {
        let channels = channels.map(|v| v.filter(|x| x.is_finite()));
        RawRecord {
            timestamp,
            channels,
        }
    }

    pub fn get(&self, channel: ChannelId) -> Option<f64> {
        self.channels[channel.ordinal()]
    }

    pub fn channels(&self) -> &[Option<f64>; ChannelId::COUNT] {
        &self.channels
    }

    pub fn is_complete(&self) -> bool {
        self.channels.iter().all(Option::is_some)
    }
}

/// The eight raw readings of a complete record, in [`ChannelId`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawFeatureRow(pub [f64; ChannelId::COUNT]);

impl RawFeatureRow {
    pub fn get(&self, channel: ChannelId) -> f64 {
        self.0[channel.ordinal()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

/// Row accounting for one parse. `rows_read` counts every line after the
/// header, blank ones included.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub rows_read: usize,
    pub rows_parsed: usize,
    pub rows_rejected: usize,
    pub rejection_reasons: Vec<Rejection>,
}

impl ParseDiagnostics {
    fn reject(&mut self, line: usize, reason: impl Into<String>) {
        self.rows_rejected += 1;
        self.rejection_reasons.push(Rejection {
            line,
            reason: reason.into(),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Channel(ChannelId),
    Extra(String),
    Unnamed,
}

fn columns_from_header(header: &str, dialect: &CsvDialect) -> Result<Vec<Column>> {
    let header = header.trim_start_matches('\u{feff}');
    let cells: Vec<&str> = header.split(dialect.delimiter).collect();
    if cells.len() < 2 {
        return Err(Error::format(
            "header",
            "expected at least date and time columns",
        ));
    }
    let mut columns = Vec::with_capacity(cells.len().saturating_sub(2));
    let mut seen = [false; ChannelId::COUNT];
    for cell in &cells[2..] {
        let column = match ChannelId::from_header(cell) {
            Some(ch) => {
                if seen[ch.ordinal()] {
                    return Err(Error::format(
                        "header",
                        format!("duplicate column for channel {ch}"),
                    ));
                }
                seen[ch.ordinal()] = true;
                Column::Channel(ch)
            }
            None if cell.trim().is_empty() => Column::Unnamed,
            None => Column::Extra(cell.trim().to_string()),
        };
        columns.push(column);
    }
    if let Some(missing) = ChannelId::ALL.iter().find(|ch| !seen[ch.ordinal()]) {
        return Err(Error::format(
            "header",
            format!("missing column `{}`", missing.header()),
        ));
    }
    Ok(columns)
}

fn parse_timestamp(date: &str, time: &str) -> std::result::Result<NaiveDateTime, String> {
    let date = NaiveDate::parse_from_str(date.trim(), DATE_FORMAT)
        .map_err(|_| format!("invalid date `{}`", date.trim()))?;
    let time = NaiveTime::parse_from_str(time.trim(), TIME_FORMAT)
        .map_err(|_| format!("invalid time `{}`", time.trim()))?;
    Ok(NaiveDateTime::new(date, time))
}

fn parse_row(
    line: &str,
    columns: &[Column],
    dialect: &CsvDialect,
) -> std::result::Result<RawRecord, String> {
    let fields: Vec<&str> = line.split(dialect.delimiter).collect();
    let named = columns
        .iter()
        .rposition(|c| !matches!(c, Column::Unnamed))
        .map_or(2, |i| i + 3);
    if fields.len() < named {
        return Err(format!(
            "expected at least {named} fields, found {}",
            fields.len()
        ));
    }
    let timestamp = parse_timestamp(fields[0], fields[1])?;
    let mut channels = [None; ChannelId::COUNT];
    for (i, cell) in fields.iter().enumerate().skip(2) {
        match columns.get(i - 2).unwrap_or(&Column::Unnamed) {
            Column::Channel(ch) => {
                channels[ch.ordinal()] = dialect
                    .parse_cell(cell)
                    .map_err(|e| format!("column `{}`: {e}", ch.header()))?;
            }
            Column::Extra(name) => {
                dialect
                    .parse_cell(cell)
                    .map_err(|e| format!("column `{name}`: {e}"))?;
            }
            Column::Unnamed => {
                if !cell.trim().is_empty() {
                    return Err(format!(
                        "unexpected value `{}` in field {}",
                        cell.trim(),
                        i + 1
                    ));
                }
            }
        }
    }
    Ok(RawRecord {
        timestamp,
        channels,
    })
}

/// Parses an air-quality CSV stream. Malformed rows are rejected and
/// recorded in the diagnostics; only I/O failures and an unusable header
/// abort the parse.
pub fn parse_air_quality_csv<R: BufRead>(
    source: R,
    dialect: &CsvDialect,
) -> Result<(Vec<RawRecord>, ParseDiagnostics)> {
    dialect.validate()?;
    let mut lines = source.lines().enumerate();
    let columns = if dialect.has_header {
        match lines.next() {
            Some((_, header)) => columns_from_header(header?.trim_end_matches('\r'), dialect)?,
            None => return Ok((Vec::new(), ParseDiagnostics::default())),
        }
    } else {
        ChannelId::ALL
            .iter()
            .map(|&ch| Column::Channel(ch))
            .collect()
    };

    let mut records = Vec::new();
    let mut diag = ParseDiagnostics::default();
    for (index, line) in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let line_no = index + 1;
        diag.rows_read += 1;
        if line.split(dialect.delimiter).all(|f| f.trim().is_empty()) {
            diag.reject(line_no, "blank");
            continue;
        }
        match parse_row(line, &columns, dialect) {
            Ok(record) => {
                diag.rows_parsed += 1;
                records.push(record);
            }
            Err(reason) => diag.reject(line_no, reason),
        }
    }
    Ok((records, diag))
}

/// Writes records in the given dialect with a header of the eight channel
/// columns. Absent channels re-emit the missing sentinel.
pub fn write_air_quality_csv<W: Write>(
    records: &[RawRecord],
    dialect: &CsvDialect,
    mut out: W,
) -> Result<()> {
    dialect.validate()?;
    let sep = dialect.delimiter.to_string();
    if dialect.has_header {
        let mut header = vec!["Date", "Time"];
        header.extend(ChannelId::ALL.iter().map(|ch| ch.header()));
        writeln!(out, "{}", header.join(&sep))?;
    }
    for record in records {
        let mut fields = vec![
            record.timestamp.format(DATE_FORMAT).to_string(),
            record.timestamp.format(TIME_FORMAT).to_string(),
        ];
        fields.extend(record.channels.iter().map(|&v| dialect.format_value(v)));
        writeln!(out, "{}", fields.join(&sep))?;
    }
    Ok(())
}

/// Projects the eight channels out of a record; `None` if any is absent.
pub fn select_features(record: &RawRecord) -> Option<RawFeatureRow> {
    let mut values = [0.0; ChannelId::COUNT];
    for (slot, value) in values.iter_mut().zip(record.channels.iter()) {
        *slot = (*value)?;
    }
    Some(RawFeatureRow(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> (Vec<RawRecord>, ParseDiagnostics) {
        parse_air_quality_csv(text.as_bytes(), &CsvDialect::default()).unwrap()
    }

    const HEADER: &str = "Date;Time;CO(GT);NMHC(GT);C6H6(GT);NOx(GT);NO2(GT);T;RH;AH;;";

    #[test]
    fn decimal_comma_cell() {
        let d = CsvDialect::default();
        assert_eq!(d.parse_cell("2,6"), Ok(Some(2.6)));
        assert_eq!(d.parse_cell(" 13,6 "), Ok(Some(13.6)));
        assert_eq!(d.parse_cell("1360"), Ok(Some(1360.0)));
    }

    #[test]
    fn sentinel_cells_are_absent() {
        let d = CsvDialect::default();
        assert_eq!(d.parse_cell("-200"), Ok(None));
        assert_eq!(d.parse_cell("-200,0"), Ok(None));
        assert_eq!(d.parse_cell(""), Ok(None));
    }

    #[test]
    fn rejects_junk_cells() {
        let d = CsvDialect::default();
        assert!(d.parse_cell("abc").is_err());
        assert!(d.parse_cell("NaN").is_err());
        assert!(d.parse_cell("inf").is_err());
        assert!(d.parse_cell("2.6").is_err());
    }

    #[test]
    fn four_line_fixture() {
        let text = format!(
            "{HEADER}\n\
             10/03/2004;18.00.00;2,6;150;11,9;166;113;13,6;48,9;0,7578;;\n\
             10/03/2004;19.00.00;2;112;9,4;103;92;13,3;47,7;0,7255;;\n\
             10/03/2004;20.00.00;2,2;-200;9,0;131;114;11,9;54,0;0,7502;;\n"
        );
        let (records, diag) = parse(&text);
        assert_eq!(records.len(), 3);
        assert_eq!(diag.rows_rejected, 0);
        assert_eq!(diag.rows_read, 3);
        let with_absent: Vec<_> = records
            .iter()
            .filter(|r| r.channels().iter().any(Option::is_none))
            .collect();
        assert_eq!(with_absent.len(), 1);
        assert_eq!(
            with_absent[0]
                .channels()
                .iter()
                .filter(|c| c.is_none())
                .count(),
            1
        );
        assert_eq!(with_absent[0].get(ChannelId::Nmhc), None);
        assert_eq!(records[0].get(ChannelId::Co), Some(2.6));
        assert_eq!(records[0].get(ChannelId::Ah), Some(0.7578));
    }

    #[test]
    fn blank_lines_are_counted_as_rejected() {
        let text = format!(
            "{HEADER}\n\n10/03/2004;18.00.00;2,6;150;11,9;166;113;13,6;48,9;0,7578;;\n;;;;;;;;;;;;\n"
        );
        let (records, diag) = parse(&text);
        assert_eq!(records.len(), 1);
        assert_eq!(diag.rows_read, 3);
        assert_eq!(diag.rows_rejected, 2);
        assert!(diag.rejection_reasons.iter().all(|r| r.reason == "blank"));
        assert_eq!(diag.rejection_reasons[0].line, 2);
    }

    #[test]
    fn extra_columns_are_ignored_but_validated() {
        let text = "Date;Time;CO(GT);PT08.S1(CO);NMHC(GT);C6H6(GT);NOx(GT);NO2(GT);T;RH;AH;;\n\
                    10/03/2004;18.00.00;2,6;1360;150;11,9;166;113;13,6;48,9;0,7578;;\n\
                    10/03/2004;19.00.00;2,6;oops;150;11,9;166;113;13,6;48,9;0,7578;;\n";
        let (records, diag) = parse(text);
        assert_eq!(records.len(), 1);
        assert_eq!(diag.rows_rejected, 1);
        assert!(diag.rejection_reasons[0].reason.contains("PT08.S1(CO)"));
    }

    #[test]
    fn missing_channel_column_is_a_format_error() {
        let text = "Date;Time;CO(GT);NMHC(GT)\n";
        let err = parse_air_quality_csv(text.as_bytes(), &CsvDialect::default()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn headerless_dialect_uses_channel_order() {
        let dialect = CsvDialect {
            has_header: false,
            ..CsvDialect::default()
        };
        let text = "10/03/2004;18.00.00;1;2;3;4;5;6;7;8\n";
        let (records, _) = parse_air_quality_csv(text.as_bytes(), &dialect).unwrap();
        let row = select_features(&records[0]).unwrap();
        assert_eq!(row.0, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn short_rows_and_bad_timestamps_are_rejected() {
        let text = format!(
            "{HEADER}\n10/03/2004;18.00.00;2,6;150\n32/03/2004;18.00.00;1;2;3;4;5;6;7;8;;\n"
        );
        let (records, diag) = parse(&text);
        assert!(records.is_empty());
        assert_eq!(diag.rows_rejected, 2);
        assert!(diag.rejection_reasons[1].reason.contains("invalid date"));
    }

    #[test]
    fn select_features_projects_in_order() {
        let ts = NaiveDate::from_ymd_opt(2004, 3, 10)
            .unwrap()
            .and_hms_opt(18, 0, 0)
            .unwrap();
        let full = RawRecord::new(
            ts,
            [
                Some(1.0),
                Some(2.0),
                Some(3.0),
                Some(4.0),
                Some(5.0),
                Some(6.0),
                Some(7.0),
                Some(8.0),
            ],
        );
        assert_eq!(
            select_features(&full).unwrap().0,
            [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        );
        let mut channels = *full.channels();
        channels[ChannelId::Nox.ordinal()] = None;
        assert_eq!(select_features(&RawRecord::new(ts, channels)), None);
    }

    #[test]
    fn header_aliases() {
        assert_eq!(ChannelId::from_header("CO(GT)"), Some(ChannelId::Co));
        assert_eq!(ChannelId::from_header(" nox(gt) "), Some(ChannelId::Nox));
        assert_eq!(ChannelId::from_header("NO2"), Some(ChannelId::No2));
        assert_eq!(ChannelId::from_header("PT08.S1(CO)"), None);
        for (i, ch) in ChannelId::ALL.iter().enumerate() {
            assert_eq!(ch.ordinal(), i);
        }
    }
}
