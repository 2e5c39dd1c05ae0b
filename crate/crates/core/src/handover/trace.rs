use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::classify::HoEvent;
use super::context::TraceRow;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    time_ms: u64,
    user: usize,
    event: String,
    source: Option<usize>,
    target: Option<usize>,
    slice: usize,
}

impl From<&TraceRow> for CsvRow {
    fn from(row: &TraceRow) -> Self {
        let (source, target) = match row.event {
            HoEvent::Trigger { source, target } | HoEvent::Complete { source, target } => {
                (Some(source), Some(target))
            }
            HoEvent::Rlf { serving } => (Some(serving), None),
            HoEvent::Reestablish { cell } => (None, Some(cell)),
        };
        CsvRow {
            time_ms: row.time_ms,
            user: row.user,
            event: row.event.name().to_string(),
            source,
            target,
            slice: row.slice,
        }
    }
}

impl TryFrom<CsvRow> for TraceRow {
    type Error = Error;

    fn try_from(row: CsvRow) -> Result<Self> {
        let missing = |what: &str| Error::Parse(format!("{} event without {what}", row.event));
        let event = match row.event.as_str() {
            "trigger" | "complete" => {
                let source = row.source.ok_or_else(|| missing("source"))?;
                let target = row.target.ok_or_else(|| missing("target"))?;
                if row.event == "trigger" {
                    HoEvent::Trigger { source, target }
                } else {
                    HoEvent::Complete { source, target }
                }
            }
            "rlf" => HoEvent::Rlf {
                serving: row.source.ok_or_else(|| missing("source"))?,
            },
            "reestablish" => HoEvent::Reestablish {
                cell: row.target.ok_or_else(|| missing("target"))?,
            },
            other => return Err(Error::Parse(format!("unknown event `{other}`"))),
        };
        Ok(TraceRow {
            time_ms: row.time_ms,
            user: row.user,
            slice: row.slice,
            event,
        })
    }
}

/// Writes an event trace as CSV with columns `time_ms,user,event,source,target,slice`.
pub fn write_trace<W: Write>(writer: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(CsvRow::from(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<CsvRow>()
        .map(|row| TraceRow::try_from(row?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![
            TraceRow {
                time_ms: 100,
                user: 3,
                slice: 1,
                event: HoEvent::Trigger {
                    source: 0,
                    target: 4,
                },
            },
            TraceRow {
                time_ms: 200,
                user: 3,
                slice: 1,
                event: HoEvent::Complete {
                    source: 0,
                    target: 4,
                },
            },
            TraceRow {
                time_ms: 900,
                user: 3,
                slice: 1,
                event: HoEvent::Rlf { serving: 4 },
            },
            TraceRow {
                time_ms: 1100,
                user: 3,
                slice: 1,
                event: HoEvent::Reestablish { cell: 0 },
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_ms,user,event,source,target,slice\n"));
        assert!(text.contains("900,3,rlf,4,,1"));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn unknown_event_is_rejected() {
        let text = "time_ms,user,event,source,target,slice\n1,0,teleport,0,1,0\n";
        assert!(read_trace(text.as_bytes()).is_err());
    }
}
