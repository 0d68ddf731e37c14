use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ACTION_CSV_HEADER: [&str; 5] = ["time_ms", "event", "w_ms", "ssim", "battery_pct"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionEvent {
    BackOn,
    BackOff,
    MotionTrigger,
    WUpdate,
}

impl ActionEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BackOn => "back_on",
            Self::BackOff => "back_off",
            Self::MotionTrigger => "motion_trigger",
            Self::WUpdate => "w_update",
        }
    }
}

impl FromStr for ActionEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "back_on" => Self::BackOn,
            "back_off" => Self::BackOff,
            "motion_trigger" => Self::MotionTrigger,
            "w_update" => Self::WUpdate,
            other => return Err(Error::Format { format: "action csv", message: format!("unknown event {other:?}") }),
        })
    }
}

/// One row of the action log. `w_ms` is the interval in force after the
/// event; `ssim` is set only on `w_update` rows that compared frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionRecord {
    pub time_ms: u64,
    pub event: ActionEvent,
    pub w_ms: u64,
    pub ssim: Option<f64>,
    pub battery_pct: f64,
}

/// Writes the log with fixed 6-decimal floats so output is byte-stable.
pub fn write_action_csv<W: Write>(out: W, records: &[ActionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt_err = |e: csv::Error| Error::Format { format: "action csv", message: e.to_string() };
    w.write_record(ACTION_CSV_HEADER).map_err(fmt_err)?;
    for r in records {
        let ssim = r.ssim.map(|s| format!("{s:.6}")).unwrap_or_default();
        w.write_record([
            r.time_ms.to_string(),
            r.event.as_str().to_string(),
            r.w_ms.to_string(),
            ssim,
            format!("{:.6}", r.battery_pct),
        ])
        .map_err(fmt_err)?;
    }
    w.flush().map_err(|e| Error::Format { format: "action csv", message: e.to_string() })?;
    Ok(())
}

pub fn parse_action_csv<R: Read>(input: R) -> Result<Vec<ActionRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let bad = |line: usize, message: String| Error::Format { format: "action csv", message: format!("line {line}: {message}") };
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?;
    if header.iter().ne(ACTION_CSV_HEADER) {
        return Err(bad(1, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(line, format!("expected 5 fields, got {}", rec.len())));
        }
        let num = |k: usize| rec[k].parse::<f64>().map_err(|e| bad(line, format!("{}: {e}", ACTION_CSV_HEADER[k])));
        let int = |k: usize| rec[k].parse::<u64>().map_err(|e| bad(line, format!("{}: {e}", ACTION_CSV_HEADER[k])));
        out.push(ActionRecord {
            time_ms: int(0)?,
            event: rec[1].parse().map_err(|e: Error| bad(line, e.to_string()))?,
            w_ms: int(2)?,
            ssim: if rec[3].is_empty() { None } else { Some(num(3)?) },
            battery_pct: num(4)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let records = vec![
            ActionRecord { time_ms: 0, event: ActionEvent::BackOn, w_ms: 1000, ssim: None, battery_pct: 0.0 },
            ActionRecord { time_ms: 1000, event: ActionEvent::WUpdate, w_ms: 500, ssim: Some(0.5), battery_pct: 0.25 },
            ActionRecord { time_ms: 1300, event: ActionEvent::MotionTrigger, w_ms: 500, ssim: None, battery_pct: 0.3 },
        ];
        let mut buf = Vec::new();
        write_action_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_ms,event,w_ms,ssim,battery_pct\n0,back_on,1000,,0.000000\n"));
        assert_eq!(parse_action_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_action_csv("a,b\n".as_bytes()).is_err());
        assert!(parse_action_csv("time_ms,event,w_ms,ssim,battery_pct\n1,jump,1,,0\n".as_bytes()).is_err());
        assert!(parse_action_csv("time_ms,event,w_ms,ssim,battery_pct\nx,back_on,1,,0\n".as_bytes()).is_err());
    }
}
