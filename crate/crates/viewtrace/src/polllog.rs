//! Append-only poll log: one `{"video_id","timestamp","total"}` object per
//! line. Each batch is flushed and synced before the call returns. A crash
//! can only leave a partial final line, which readers drop and writers cut
//! off before appending again.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::FixedOffset;
use serde::{Deserialize, Serialize};
use viewtrace_core::collector::PollRecord;

use crate::error::DataError;
use crate::time::{format_timestamp, parse_timestamp};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PollLine {
    video_id: String,
    timestamp: String,
    total: u64,
}

/// Records recovered from a log and the byte length of its intact prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogContents {
    pub records: Vec<PollRecord>,
    pub valid_len: u64,
    pub torn_tail: bool,
}

fn parse_line(line: &str, zone: FixedOffset) -> Result<PollRecord, String> {
    let l: PollLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    Ok(PollRecord {
        video_id: l.video_id,
        at: parse_timestamp(&l.timestamp, zone)?,
        total: l.total,
    })
}

pub fn read_log(path: &Path, zone: FixedOffset) -> anyhow::Result<LogContents> {
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes)
                .with_context(|| format!("reading {}", path.display()))?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(e).with_context(|| format!("opening {}", path.display())),
    }
    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, complete) = match rest.iter().position(|&b| b == b'\n') {
            Some(n) => (&rest[..n], true),
            None => (rest, false),
        };
        let text = std::str::from_utf8(line).map_err(|e| e.to_string());
        let parsed = text.and_then(|t| {
            if t.trim().is_empty() {
                Ok(None)
            } else {
                parse_line(t, zone).map(Some)
            }
        });
        match (parsed, complete) {
            (Ok(r), true) => {
                records.extend(r);
                offset += line.len() + 1;
            }
            (Ok(r), false) => {
                records.extend(r);
                offset += line.len();
            }
            (Err(_), false) => {
                return Ok(LogContents {
                    records,
                    valid_len: offset as u64,
                    torn_tail: true,
                });
            }
            (Err(e), true) => return Err(DataError::at_line(path, line_no, e).into()),
        }
    }
    Ok(LogContents {
        records,
        valid_len: offset as u64,
        torn_tail: false,
    })
}

pub struct PollLog {
    path: PathBuf,
    file: File,
}

impl PollLog {
    /// Opens for appending, returning the records already present. A torn
    /// final line is truncated away.
    pub fn open(path: &Path, zone: FixedOffset) -> anyhow::Result<(Self, Vec<PollRecord>)> {
        let contents = read_log(path, zone)?;
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        file.set_len(contents.valid_len)?;
        file.seek(SeekFrom::End(0))?;
        if contents.valid_len > 0 {
            // an intact last line may still lack its newline
            let mut last = [0u8; 1];
            file.seek(SeekFrom::Start(contents.valid_len - 1))?;
            file.read_exact(&mut last)?;
            file.seek(SeekFrom::End(0))?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            contents.records,
        ))
    }

    pub fn append(&mut self, records: &[PollRecord]) -> anyhow::Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for r in records {
            let line = PollLine {
                video_id: r.video_id.clone(),
                timestamp: format_timestamp(r.at),
                total: r.total,
            };
            serde_json::to_writer(&mut buf, &line)?;
            buf.push(b'\n');
        }
        self.file
            .write_all(&buf)
            .and_then(|_| self.file.sync_data())
            .with_context(|| format!("appending to {}", self.path.display()))
    }
}
