//! NDJSON trace files.
//!
//! Line 1 is `{"header":{..}}`, then one event object per line, then a final
//! `{"fnv1a64":"<16 hex digits>"}` covering every byte before it.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sass_core::trace::{Event, Trace, TraceHeader};

use crate::scenario_file::fnv1a64;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("trace is truncated: {0}")]
    Truncated(&'static str),
    #[error("line {line}: malformed trace record: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace hash mismatch: stored {stored:016x}, computed {computed:016x}")]
    HashMismatch { stored: u64, computed: u64 },
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HashLine {
    fnv1a64: String,
}

/// Serializes a trace, hash line included.
pub fn encode_trace(trace: &Trace) -> Vec<u8> {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &HeaderLine { header: trace.header.clone() }).expect("header serializes");
    out.push(b'\n');
    for e in &trace.events {
        serde_json::to_writer(&mut out, e).expect("event serializes");
        out.push(b'\n');
    }
    let hash = fnv1a64(&out);
    writeln!(out, "{{\"fnv1a64\":\"{hash:016x}\"}}").expect("write to vec");
    out
}

/// FNV-1a 64 of the encoded trace body, i.e. the value on its hash line.
pub fn trace_hash(trace: &Trace) -> u64 {
    let bytes = encode_trace(trace);
    let body = body_len(&bytes).expect("encoded trace has a hash line");
    fnv1a64(&bytes[..body])
}

fn body_len(bytes: &[u8]) -> Option<usize> {
    let trimmed = bytes.strip_suffix(b"\n")?;
    Some(trimmed.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1))
}

/// Checks the hash line and parses the records.
pub fn decode_trace(bytes: &[u8]) -> Result<Trace, TraceError> {
    if bytes.is_empty() {
        return Err(TraceError::Truncated("empty file"));
    }
    let body = body_len(bytes).ok_or(TraceError::Truncated("missing final newline"))?;
    let last = std::str::from_utf8(&bytes[body..]).map_err(|_| TraceError::Truncated("missing hash line"))?;
    let hash: HashLine = serde_json::from_str(last.trim_end()).map_err(|_| TraceError::Truncated("missing hash line"))?;
    let stored = u64::from_str_radix(&hash.fnv1a64, 16).map_err(|_| TraceError::Truncated("unreadable hash line"))?;
    let computed = fnv1a64(&bytes[..body]);
    if stored != computed {
        return Err(TraceError::HashMismatch { stored, computed });
    }
    let text = std::str::from_utf8(&bytes[..body])
        .map_err(|e| TraceError::Malformed { line: 0, message: e.to_string() })?;
    let mut lines = text.lines();
    let header: HeaderLine = serde_json::from_str(lines.next().ok_or(TraceError::Truncated("missing header"))?)
        .map_err(|e| TraceError::Malformed { line: 1, message: e.to_string() })?;
    let mut events = Vec::new();
    let mut last_tick = 0;
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let e: Event = serde_json::from_str(l).map_err(|e| TraceError::Malformed { line, message: e.to_string() })?;
        if e.tick < last_tick {
            return Err(TraceError::Malformed { line, message: format!("tick {} after tick {last_tick}", e.tick) });
        }
        last_tick = e.tick;
        events.push(e);
    }
    Ok(Trace { header: header.header, events })
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<(), TraceError> {
    std::fs::write(path, encode_trace(trace)).map_err(|source| TraceError::Io { path: path.display().to_string(), source })
}

pub fn read_trace(path: &Path) -> Result<Trace, TraceError> {
    let bytes = std::fs::read(path).map_err(|source| TraceError::Io { path: path.display().to_string(), source })?;
    decode_trace(&bytes)
}
