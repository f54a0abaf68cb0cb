//! File formats: the CSI/power capture format, ground-truth sidecars and
//! detection-event logs.
//!
//! Capture files are plain text. The first line is a header
//!
//! ```text
//! csi,v1,<num_subcarriers>,<sample_rate_hz>,<center_freq_hz>,<bandwidth_hz>
//! ```
//!
//! followed by one CSV row per frame: `timestamp,re_0,im_0,...,re_{N-1},im_{N-1}`.
//! The `power,v1,...` variant stores rows `timestamp,g_0,...,g_{N-1}` instead.
//! Floats are written with Rust's shortest round-trip formatting, so
//! write-then-read reproduces values bit-exactly.
//!
//! Ground-truth sidecars and event logs are JSON-lines. An optional leading
//! meta object `{"duration": <seconds>}` records the stream span (needed to
//! define empty segments for false-alarm accounting); every other line is one
//! event object.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi::{CsiFrame, PowerFrame};
use crate::fsm::{DetectionEvent, EventKind, StateKind};
use crate::synth::GroundTruthEvent;

#[derive(Debug, Error)]
pub enum FileFormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
}

/// Which quantity a capture file stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Csi,
    Power,
}

/// Parsed `csi,v1,...` / `power,v1,...` header line.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureHeader {
    pub kind: StreamKind,
    pub num_subcarriers: usize,
    pub sample_rate: f64,
    pub center_freq: f64,
    pub bandwidth: f64,
}

impl CaptureHeader {
    /// Evenly spaced subcarrier center frequencies across the band.
    pub fn subcarrier_freqs(&self) -> Arc<[f64]> {
        subcarrier_frequencies(self.center_freq, self.bandwidth, self.num_subcarriers)
    }

    fn to_line(&self) -> String {
        let tag = match self.kind {
            StreamKind::Csi => "csi",
            StreamKind::Power => "power",
        };
        format!(
            "{tag},v1,{},{},{},{}",
            self.num_subcarriers, self.sample_rate, self.center_freq, self.bandwidth
        )
    }

    fn parse(line: &str, line_no: usize) -> Result<Self, FileFormatError> {
        let err = |msg: String| FileFormatError::Header { line: line_no, msg };
        let parts: Vec<&str> = line.trim_end().split(',').collect();
        if parts.len() != 6 {
            return Err(err(format!("expected 6 header fields, got {}", parts.len())));
        }
        let kind = match parts[0] {
            "csi" => StreamKind::Csi,
            "power" => StreamKind::Power,
            other => return Err(err(format!("unknown stream kind `{other}`"))),
        };
        if parts[1] != "v1" {
            return Err(err(format!("unsupported version `{}`", parts[1])));
        }
        let num_subcarriers: usize =
            parts[2].parse().map_err(|e| err(format!("bad subcarrier count: {e}")))?;
        if num_subcarriers == 0 {
            return Err(err("subcarrier count must be positive".into()));
        }
        let f = |s: &str, what: &str| -> Result<f64, FileFormatError> {
            s.parse::<f64>().map_err(|e| FileFormatError::Header {
                line: line_no,
                msg: format!("bad {what}: {e}"),
            })
        };
        Ok(Self {
            kind,
            num_subcarriers,
            sample_rate: f(parts[3], "sample rate")?,
            center_freq: f(parts[4], "center frequency")?,
            bandwidth: f(parts[5], "bandwidth")?,
        })
    }
}

/// Subcarrier grid for a band: `center - bw/2 + (i + 0.5) * bw / n`.
pub fn subcarrier_frequencies(center: f64, bandwidth: f64, n: usize) -> Arc<[f64]> {
    let step = bandwidth / n as f64;
    let lo = center - bandwidth / 2.0;
    (0..n).map(|i| lo + (i as f64 + 0.5) * step).collect()
}

/// Streaming reader over a CSI capture file.
pub struct CsiFileReader<R: BufRead> {
    reader: R,
    header: CaptureHeader,
    freqs: Arc<[f64]>,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> CsiFileReader<R> {
    pub fn new(mut reader: R) -> Result<Self, FileFormatError> {
        let mut buf = String::new();
        if reader.read_line(&mut buf)? == 0 {
            return Err(FileFormatError::Header { line: 1, msg: "empty file".into() });
        }
        let header = CaptureHeader::parse(&buf, 1)?;
        if header.kind != StreamKind::Csi {
            return Err(FileFormatError::Header {
                line: 1,
                msg: "expected a `csi` stream".into(),
            });
        }
        let freqs = header.subcarrier_freqs();
        Ok(Self { reader, header, freqs, line_no: 1, buf })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }
}

impl<R: BufRead> Iterator for CsiFileReader<R> {
    type Item = Result<CsiFrame, FileFormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            if self.buf.trim().is_empty() {
                continue;
            }
            return Some(parse_csi_row(
                &self.buf,
                self.line_no,
                self.header.num_subcarriers,
                &self.freqs,
            ));
        }
    }
}

fn parse_csi_row(
    line: &str,
    line_no: usize,
    n: usize,
    freqs: &Arc<[f64]>,
) -> Result<CsiFrame, FileFormatError> {
    let err = |msg: String| FileFormatError::Row { line: line_no, msg };
    let mut it = line.trim_end().split(',');
    let ts: f64 = it
        .next()
        .ok_or_else(|| err("missing timestamp".into()))?
        .parse()
        .map_err(|e| err(format!("bad timestamp: {e}")))?;
    let mut csi = Vec::with_capacity(n);
    for i in 0..n {
        let re: f64 = it
            .next()
            .ok_or_else(|| err(format!("row truncated: expected {} values, got {}", 2 * n, 2 * i)))?
            .parse()
            .map_err(|e| err(format!("bad value at column {}: {e}", 1 + 2 * i)))?;
        let im: f64 = it
            .next()
            .ok_or_else(|| {
                err(format!("row truncated: expected {} values, got {}", 2 * n, 2 * i + 1))
            })?
            .parse()
            .map_err(|e| err(format!("bad value at column {}: {e}", 2 + 2 * i)))?;
        csi.push(Complex64::new(re, im));
    }
    if it.next().is_some() {
        return Err(err(format!("row has more than {} values", 2 * n)));
    }
    CsiFrame::new(ts, csi, Arc::clone(freqs)).map_err(|e| err(e.to_string()))
}

/// Writes a CSI capture file from an iterator of frames.
pub fn write_csi_file<W: Write>(
    w: &mut W,
    header: &CaptureHeader,
    frames: impl Iterator<Item = CsiFrame>,
) -> Result<u64, FileFormatError> {
    writeln!(w, "{}", header.to_line())?;
    let mut count = 0u64;
    let mut line = String::new();
    for frame in frames {
        line.clear();
        push_f64(&mut line, frame.timestamp);
        for c in &frame.csi {
            line.push(',');
            push_f64(&mut line, c.re);
            line.push(',');
            push_f64(&mut line, c.im);
        }
        writeln!(w, "{line}")?;
        count += 1;
    }
    Ok(count)
}

/// Streaming reader over a power capture file.
pub struct PowerFileReader<R: BufRead> {
    reader: R,
    header: CaptureHeader,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> PowerFileReader<R> {
    pub fn new(mut reader: R) -> Result<Self, FileFormatError> {
        let mut buf = String::new();
        if reader.read_line(&mut buf)? == 0 {
            return Err(FileFormatError::Header { line: 1, msg: "empty file".into() });
        }
        let header = CaptureHeader::parse(&buf, 1)?;
        if header.kind != StreamKind::Power {
            return Err(FileFormatError::Header {
                line: 1,
                msg: "expected a `power` stream".into(),
            });
        }
        Ok(Self { reader, header, line_no: 1, buf })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }
}

impl<R: BufRead> Iterator for PowerFileReader<R> {
    type Item = Result<PowerFrame, FileFormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            if self.buf.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            let err = |msg: String| FileFormatError::Row { line: line_no, msg };
            let mut it = self.buf.trim_end().split(',');
            let ts: f64 = match it.next().ok_or_else(|| err("missing timestamp".into())) {
                Ok(s) => match s.parse() {
                    Ok(v) => v,
                    Err(e) => return Some(Err(err(format!("bad timestamp: {e}")))),
                },
                Err(e) => return Some(Err(e)),
            };
            let n = self.header.num_subcarriers;
            let mut g = Vec::with_capacity(n);
            for i in 0..n {
                match it.next() {
                    Some(s) => match s.parse::<f64>() {
                        Ok(v) => g.push(v),
                        Err(e) => {
                            return Some(Err(err(format!("bad value at column {}: {e}", i + 1))))
                        }
                    },
                    None => {
                        return Some(Err(err(format!(
                            "row truncated: expected {n} values, got {i}"
                        ))))
                    }
                }
            }
            if it.next().is_some() {
                return Some(Err(err(format!("row has more than {n} values"))));
            }
            return Some(PowerFrame::new(ts, g).map_err(|e| err(e.to_string())));
        }
    }
}

/// Writes a power capture file from an iterator of frames.
pub fn write_power_file<W: Write>(
    w: &mut W,
    header: &CaptureHeader,
    frames: impl Iterator<Item = PowerFrame>,
) -> Result<u64, FileFormatError> {
    writeln!(w, "{}", header.to_line())?;
    let mut count = 0u64;
    let mut line = String::new();
    for frame in frames {
        line.clear();
        push_f64(&mut line, frame.timestamp);
        for &v in &frame.g {
            line.push(',');
            push_f64(&mut line, v);
        }
        writeln!(w, "{line}")?;
        count += 1;
    }
    Ok(count)
}

fn push_f64(s: &mut String, v: f64) {
    use std::fmt::Write as _;
    write!(s, "{v}").expect("formatting to String cannot fail");
}

/// Optional first line of JSON-lines files, recording the stream span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub duration: f64,
}

/// One detection event as serialized to the events log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub t: f64,
    pub state_before: StateKind,
    pub state_after: StateKind,
}

impl From<&DetectionEvent> for EventRecord {
    fn from(e: &DetectionEvent) -> Self {
        // Entry events are only ever emitted on Approaching -> Near and exit
        // events on Leaving -> Faraway.
        let (state_before, state_after) = match e.kind {
            EventKind::NearEntered => (StateKind::Approaching, StateKind::Near),
            EventKind::NearExited => (StateKind::Leaving, StateKind::Faraway),
        };
        EventRecord { kind: e.kind, t: e.t, state_before, state_after }
    }
}

/// Writes an events log: meta line first, then one JSON object per event.
pub fn write_events<W: Write>(
    w: &mut W,
    meta: Option<StreamMeta>,
    events: &[DetectionEvent],
) -> Result<(), FileFormatError> {
    if let Some(m) = meta {
        serde_json::to_writer(&mut *w, &m).map_err(io_from_json)?;
        writeln!(w)?;
    }
    for e in events {
        serde_json::to_writer(&mut *w, &EventRecord::from(e)).map_err(io_from_json)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Reads an events log; returns the optional meta and the events.
pub fn read_events<R: BufRead>(
    r: R,
) -> Result<(Option<StreamMeta>, Vec<DetectionEvent>), FileFormatError> {
    let mut meta = None;
    let mut events = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line_no == 1 && events.is_empty() {
            if let Ok(m) = serde_json::from_str::<StreamMeta>(&line) {
                meta = Some(m);
                continue;
            }
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| FileFormatError::Row { line: line_no, msg: e.to_string() })?;
        events.push(DetectionEvent { kind: rec.kind, t: rec.t });
    }
    Ok((meta, events))
}

/// Writes a ground-truth sidecar: meta line first, then one event per line.
pub fn write_ground_truth<W: Write>(
    w: &mut W,
    meta: Option<StreamMeta>,
    events: &[GroundTruthEvent],
) -> Result<(), FileFormatError> {
    if let Some(m) = meta {
        serde_json::to_writer(&mut *w, &m).map_err(io_from_json)?;
        writeln!(w)?;
    }
    for e in events {
        serde_json::to_writer(&mut *w, e).map_err(io_from_json)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a ground-truth sidecar.
pub fn read_ground_truth<R: BufRead>(
    r: R,
) -> Result<(Option<StreamMeta>, Vec<GroundTruthEvent>), FileFormatError> {
    let mut meta = None;
    let mut events = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line_no == 1 && events.is_empty() {
            // A meta line has no enter_t, so it never parses as an event.
            if let Ok(m) = serde_json::from_str::<StreamMeta>(&line) {
                if serde_json::from_str::<GroundTruthEvent>(&line).is_err() {
                    meta = Some(m);
                    continue;
                }
            }
        }
        let ev: GroundTruthEvent = serde_json::from_str(&line)
            .map_err(|e| FileFormatError::Row { line: line_no, msg: e.to_string() })?;
        events.push(ev);
    }
    Ok((meta, events))
}

fn io_from_json(e: serde_json::Error) -> FileFormatError {
    FileFormatError::Io(std::io::Error::other(e))
}
