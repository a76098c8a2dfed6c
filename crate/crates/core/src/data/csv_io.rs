//! YooChoose-format CSV files.
//!
//! Clicks: `session,timestamp,item,category`. Buys:
//! `session,timestamp,item,price,quantity`. No header, comma-separated,
//! UTF-8, LF or CRLF line endings. Timestamps are ISO-8601 UTC with
//! milliseconds, e.g. `2014-04-07T10:51:09.277Z`.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::{ClickEvent, DataError, Session};
use crate::vocab::Token;

/// Fraction of malformed lines above which loading fails.
pub const MALFORMED_LIMIT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: u64,
    pub reason: String,
}

/// Parsed records plus the lines that were skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub malformed: Vec<MalformedLine>,
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
    DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc))
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn read_lines<T>(
    path: &Path,
    arity: usize,
    mut parse: impl FnMut(&[&str]) -> Result<T, String>,
) -> Result<Loaded<T>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut out = Loaded {
        records: Vec::new(),
        malformed: Vec::new(),
    };
    let mut total = 0usize;
    for rec in reader.byte_records() {
        let rec = rec.map_err(|source| DataError::Csv {
            path: path.to_owned(),
            source,
        })?;
        total += 1;
        let line = rec.position().map_or(total as u64, |p| p.line());
        let fields: Result<Vec<&str>, _> = rec.iter().map(std::str::from_utf8).collect();
        let result = match fields {
            Err(_) => Err("invalid UTF-8".to_owned()),
            Ok(f) if f.len() != arity => Err(format!("expected {arity} fields, found {}", f.len())),
            Ok(f) => parse(&f),
        };
        match result {
            Ok(r) => out.records.push(r),
            Err(reason) => out.malformed.push(MalformedLine { line, reason }),
        }
    }
    if total == 0 {
        log::warn!("{}: file is empty", path.display());
    }
    if let Some(first) = out.malformed.first() {
        if out.malformed.len() as f64 > MALFORMED_LIMIT * total as f64 {
            return Err(DataError::TooManyMalformed {
                path: path.to_owned(),
                bad: out.malformed.len(),
                total,
                first_line: first.line,
                first_reason: first.reason.clone(),
            });
        }
        log::warn!(
            "{}: skipped {} malformed lines (first at line {}: {})",
            path.display(),
            out.malformed.len(),
            first.line,
            first.reason
        );
    }
    Ok(out)
}

fn session_field(f: &str) -> Result<String, String> {
    if f.is_empty() {
        Err("empty session id".into())
    } else {
        Ok(f.to_owned())
    }
}

fn timestamp_field(f: &str) -> Result<DateTime<Utc>, String> {
    parse_timestamp(f).map_err(|e| format!("bad timestamp {f:?}: {e}"))
}

pub fn load_clicks(path: impl AsRef<Path>) -> Result<Loaded<ClickEvent>, DataError> {
    read_lines(path.as_ref(), 4, |f| {
        Ok(ClickEvent {
            session_id: session_field(f[0])?,
            timestamp: timestamp_field(f[1])?,
            item: Token::new(f[2]).map_err(|e| format!("bad item: {e}"))?,
            category: (!f[3].is_empty()).then(|| f[3].to_owned()),
        })
    })
}

/// Session ids of every purchase line.
pub fn load_buys(path: impl AsRef<Path>) -> Result<Loaded<String>, DataError> {
    let loaded = read_lines(path.as_ref(), 5, |f| {
        timestamp_field(f[1])?;
        session_field(f[0])
    })?;
    let mut seen = HashSet::new();
    Ok(Loaded {
        records: loaded.records.into_iter().filter(|s| seen.insert(s.clone())).collect(),
        malformed: loaded.malformed,
    })
}

fn create(path: &Path) -> Result<csv::Writer<File>, DataError> {
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<(), DataError> {
    w.flush().map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |source| DataError::Csv {
        path: path.to_owned(),
        source,
    }
}

pub fn write_clicks<'a>(
    path: impl AsRef<Path>,
    sessions: impl IntoIterator<Item = &'a Session>,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for s in sessions {
        for ((item, cat), t) in s.items.iter().zip(&s.categories).zip(&s.timestamps) {
            w.write_record([
                s.session_id.as_str(),
                &format_timestamp(*t),
                item.as_str(),
                cat.as_deref().unwrap_or(""),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

/// One buy line (last clicked item, price 0, quantity 1) per positive session.
pub fn write_buys<'a>(
    path: impl AsRef<Path>,
    sessions: impl IntoIterator<Item = &'a Session>,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for s in sessions.into_iter().filter(|s| s.label) {
        let last = s.len() - 1;
        w.write_record([
            s.session_id.as_str(),
            &format_timestamp(s.timestamps[last]),
            s.items[last].as_str(),
            "0",
            "1",
        ])
        .map_err(csv_err(path))?;
    }
    finish(path, w)
}
