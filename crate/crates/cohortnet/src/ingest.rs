//! JSONL and CSV event readers.
//!
//! Both encodings share one field model: every column is looked up by name,
//! empty strings and JSON nulls count as absent. Timestamps are integer
//! epoch seconds or ISO-8601 (offset-less values are read as UTC).

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use cohortnet_core::events::{EventGate, RejectReason, ValidationReport};
use cohortnet_core::{EventKind, InteractionEvent, Platform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json" => Some(InputFormat::Jsonl),
            "csv" => Some(InputFormat::Csv),
            _ => None,
        }
    }
}

/// Accepted events plus the row accounting for every input file.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub events: Vec<InteractionEvent>,
    pub report: ValidationReport,
}

enum Field<'a> {
    Missing,
    Text(Cow<'a, str>),
    Int(i64),
    Float(f64),
    Other,
}

fn json_field(obj: &serde_json::Map<String, serde_json::Value>, name: &str) -> Field<'static> {
    use serde_json::Value;
    match obj.get(name) {
        None | Some(Value::Null) => Field::Missing,
        Some(Value::String(s)) if s.trim().is_empty() => Field::Missing,
        Some(Value::String(s)) => Field::Text(Cow::Owned(s.trim().to_owned())),
        Some(Value::Number(n)) => match n.as_i64() {
            Some(i) => Field::Int(i),
            None => n.as_f64().map_or(Field::Other, Field::Float),
        },
        Some(_) => Field::Other,
    }
}

fn text_field(raw: Option<&str>) -> Field<'_> {
    match raw.map(str::trim) {
        None | Some("") => Field::Missing,
        Some(s) => Field::Text(Cow::Borrowed(s)),
    }
}

fn required_id(f: Field) -> std::result::Result<String, RejectReason> {
    match f {
        Field::Missing => Err(RejectReason::MissingField),
        Field::Text(s) => Ok(s.into_owned()),
        Field::Int(i) => Ok(i.to_string()),
        Field::Float(_) | Field::Other => Err(RejectReason::Malformed),
    }
}

fn optional_number(f: Field) -> std::result::Result<Option<f64>, RejectReason> {
    let v = match f {
        Field::Missing => return Ok(None),
        Field::Int(i) => i as f64,
        Field::Float(x) => x,
        Field::Text(s) => s.parse::<f64>().map_err(|_| RejectReason::BadNumber)?,
        Field::Other => return Err(RejectReason::BadNumber),
    };
    if v.is_finite() {
        Ok(Some(v))
    } else {
        Err(RejectReason::BadNumber)
    }
}

fn parse_platform(s: &str) -> std::result::Result<Platform, RejectReason> {
    match s.to_ascii_lowercase().as_str() {
        "source" | "reddit" => Ok(Platform::Source),
        "receiver" | "voat" => Ok(Platform::Receiver),
        _ => Err(RejectReason::BadPlatform),
    }
}

fn parse_kind(s: &str) -> std::result::Result<EventKind, RejectReason> {
    match s.to_ascii_lowercase().as_str() {
        "post" | "submission" => Ok(EventKind::Post),
        "comment" => Ok(EventKind::Comment),
        _ => Err(RejectReason::BadKind),
    }
}

/// Integer epoch seconds or ISO-8601; naive values are UTC.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp())
}

fn parse_event<'a>(get: impl Fn(&str) -> Field<'a>) -> std::result::Result<InteractionEvent, RejectReason> {
    let event_id = required_id(get("event_id"))?;
    let user_id = required_id(get("user_id"))?;
    let community_id = required_id(get("community_id"))?;
    let platform = match get("platform") {
        Field::Missing => return Err(RejectReason::MissingField),
        Field::Text(s) => parse_platform(&s)?,
        _ => return Err(RejectReason::BadPlatform),
    };
    let kind = match get("kind") {
        Field::Missing => return Err(RejectReason::MissingField),
        Field::Text(s) => parse_kind(&s)?,
        _ => return Err(RejectReason::BadKind),
    };
    let parent_post_id = match get("parent_post_id") {
        Field::Missing => None,
        f => Some(required_id(f)?),
    };
    let timestamp = match get("timestamp") {
        Field::Missing => return Err(RejectReason::MissingField),
        Field::Int(i) => i,
        Field::Float(x) if x.is_finite() && x.fract() == 0.0 => x as i64,
        Field::Text(s) => parse_timestamp(&s).ok_or(RejectReason::BadTimestamp)?,
        _ => return Err(RejectReason::BadTimestamp),
    };
    Ok(InteractionEvent {
        event_id,
        user_id,
        community_id,
        platform,
        kind,
        parent_post_id,
        timestamp,
        toxicity: optional_number(get("toxicity"))?,
        sentiment: optional_number(get("sentiment"))?,
    })
}

fn parse_json_line(line: &str) -> std::result::Result<InteractionEvent, RejectReason> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|_| RejectReason::Malformed)?;
    let obj = value.as_object().ok_or(RejectReason::Malformed)?;
    parse_event(|name| json_field(obj, name))
}

/// Ingestion state carried across input files.
struct Reader<'g> {
    gate: &'g mut EventGate,
    events: Vec<InteractionEvent>,
    strict: bool,
    next_row: usize,
}

impl Reader<'_> {
    fn offer(
        &mut self,
        path: &Path,
        file_row: usize,
        parsed: std::result::Result<InteractionEvent, RejectReason>,
    ) -> Result<()> {
        let row = self.next_row;
        self.next_row += 1;
        match self.gate.offer(row, parsed) {
            Ok(ev) => self.events.push(ev),
            Err(reason) if self.strict => {
                return Err(Error::StrictReject { path: path.to_path_buf(), row: file_row, reason: reason.code() })
            }
            Err(_) => {}
        }
        Ok(())
    }

    fn read_jsonl(&mut self, path: &Path) -> Result<()> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut buf = Vec::new();
        let mut file_row = 0;
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            let parsed = match std::str::from_utf8(&buf) {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => parse_json_line(line),
                Err(_) => Err(RejectReason::Malformed),
            };
            file_row += 1;
            self.offer(path, file_row, parsed)?;
        }
        Ok(())
    }

    fn read_csv(&mut self, path: &Path) -> Result<()> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(BufReader::new(file));
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|h| h.trim().to_owned())
            .collect();
        let mut record = csv::ByteRecord::new();
        let mut file_row = 0;
        loop {
            match reader.read_byte_record(&mut record) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) if e.is_io_error() => return Err(csv_error(path, e)),
                Err(_) => {
                    file_row += 1;
                    self.offer(path, file_row, Err(RejectReason::Malformed))?;
                    continue;
                }
            }
            file_row += 1;
            let parsed = match csv::StringRecord::from_byte_record(record.clone()) {
                Ok(rec) if rec.len() == headers.len() => {
                    parse_event(|name| text_field(headers.iter().position(|h| h == name).and_then(|i| rec.get(i))))
                }
                _ => Err(RejectReason::Malformed),
            };
            self.offer(path, file_row, parsed)?;
        }
        Ok(())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Domain(format!("{}: {other:?}", path.display())),
    }
}

/// Reads every input in order. Row numbers in the report run across files;
/// strict mode stops at the first rejection and names the file row.
pub fn load(paths: &[PathBuf], format: Option<InputFormat>, strict: bool) -> Result<Corpus> {
    let mut gate = EventGate::new();
    let mut reader = Reader { gate: &mut gate, events: Vec::new(), strict, next_row: 1 };
    for path in paths {
        let fmt = format
            .or_else(|| InputFormat::from_path(path))
            .ok_or_else(|| Error::Config(format!("cannot infer input format of {}; pass --format", path.display())))?;
        match fmt {
            InputFormat::Jsonl => reader.read_jsonl(path)?,
            InputFormat::Csv => reader.read_csv(path)?,
        }
    }
    let events = std::mem::take(&mut reader.events);
    Ok(Corpus { events, report: gate.into_report() })
}

#[derive(Serialize)]
struct OutRecord<'a> {
    event_id: &'a str,
    user_id: &'a str,
    community_id: &'a str,
    platform: &'static str,
    kind: &'static str,
    parent_post_id: Option<&'a str>,
    timestamp: i64,
    toxicity: Option<f64>,
    sentiment: Option<f64>,
}

/// Writes events as JSONL in the schema [`load`] reads.
pub fn write_jsonl(events: &[InteractionEvent], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for ev in events {
        let rec = OutRecord {
            event_id: &ev.event_id,
            user_id: &ev.user_id,
            community_id: &ev.community_id,
            platform: ev.platform.as_str(),
            kind: ev.kind.as_str(),
            parent_post_id: ev.parent_post_id.as_deref(),
            timestamp: ev.timestamp,
            toxicity: ev.toxicity,
            sentiment: ev.sentiment,
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn timestamp_forms() {
        assert_eq!(parse_timestamp("1433894400"), Some(1_433_894_400));
        assert_eq!(parse_timestamp("2015-06-10T00:00:00Z"), Some(1_433_894_400));
        assert_eq!(parse_timestamp("2015-06-10T02:00:00+02:00"), Some(1_433_894_400));
        assert_eq!(parse_timestamp("2015-06-10 00:00:00"), Some(1_433_894_400));
        assert_eq!(parse_timestamp("2015-06-10"), Some(1_433_894_400));
        assert_eq!(parse_timestamp("June 10"), None);
    }

    #[test]
    fn jsonl_rows_and_reasons() {
        let dir = tempfile::tempdir().unwrap();
        let body = concat!(
            r#"{"event_id":"p1","user_id":"a","community_id":"funny","platform":"receiver","kind":"post","timestamp":"2016-01-03T10:00:00Z","toxicity":0.2}"#,
            "\n",
            r#"{"event_id":"c1","user_id":"b","community_id":"funny","platform":"voat","kind":"comment","parent_post_id":"p1","timestamp":1451815200}"#,
            "\n\n",
            r#"{"event_id":"c2","user_id":"b","community_id":"funny","platform":"receiver","kind":"comment","timestamp":1451815200}"#,
            "\n",
            "not json\n",
            r#"{"event_id":"p1","user_id":"z","community_id":"funny","platform":"receiver","kind":"post","timestamp":1}"#,
            "\n",
            r#"{"event_id":"p2","user_id":"z","community_id":"funny","platform":"receiver","kind":"post","timestamp":1,"toxicity":1.5}"#,
            "\n",
        );
        let path = write(dir.path(), "e.jsonl", body);
        let corpus = load(std::slice::from_ref(&path), None, false).unwrap();
        assert_eq!(corpus.events.len(), 2);
        assert_eq!(corpus.events[1].platform, Platform::Receiver);
        let r = &corpus.report;
        assert_eq!((r.rows_read, r.rows_accepted, r.rows_rejected), (6, 2, 4));
        let reasons: Vec<(usize, &str)> = r.rejections.iter().map(|x| (x.row, x.reason)).collect();
        assert_eq!(
            reasons,
            vec![(3, "missing_parent"), (4, "malformed"), (5, "duplicate_id"), (6, "toxicity_out_of_range")]
        );

        match load(&[path], None, true) {
            Err(Error::StrictReject { row, reason, .. }) => assert_eq!((row, reason), (3, "missing_parent")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let body = "event_id,user_id,community_id,platform,kind,parent_post_id,timestamp,toxicity,sentiment\n\
                    p1,a,funny,source,post,,2016-01-03 10:00:00,0.5,\n\
                    c1,b,funny,source,comment,p1,1451815200,,0.1\n\
                    c2,b,funny,source,comment,p1,yesterday,,\n\
                    c3,b,funny,source,comment,p1,1451815200,high,\n\
                    c4,b,funny\n";
        let path = write(dir.path(), "e.csv", body);
        let corpus = load(&[path], None, false).unwrap();
        assert_eq!(corpus.events.len(), 2);
        assert_eq!(corpus.events[0].toxicity, Some(0.5));
        assert_eq!(corpus.events[1].sentiment, Some(0.1));
        let codes: Vec<&str> = corpus.report.rejections.iter().map(|r| r.reason).collect();
        assert_eq!(codes, vec!["bad_timestamp", "bad_number", "malformed"]);
    }

    #[test]
    fn missing_file_is_io() {
        let err = load(&[PathBuf::from("/nonexistent/x.jsonl")], None, false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = load(&[PathBuf::from("x.parquet")], None, false).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ev = InteractionEvent {
            event_id: "c9".into(),
            user_id: "u".into(),
            community_id: "gaming".into(),
            platform: Platform::Source,
            kind: EventKind::Comment,
            parent_post_id: Some("p0".into()),
            timestamp: 1_500_000_000,
            toxicity: Some(0.125),
            sentiment: None,
        };
        let path = dir.path().join("out.jsonl");
        write_jsonl(std::slice::from_ref(&ev), &path).unwrap();
        let back = load(&[path], None, true).unwrap();
        assert_eq!(back.events, vec![ev]);
    }
}
