//! Append-only statement log.
//!
//! One record per line: `position \t type \t repository \t statement`, where the
//! statement is in its canonical single-line DSL form. Positions start at 1 and are
//! contiguous.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::dsl::{parse_statement, Statement, StatementKind};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("corrupt log at position {position}: {reason}")]
    CorruptLog { position: u64, reason: String },
    #[error("log i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub position: u64,
    pub repository: String,
    pub statement: Statement,
}

impl LogRecord {
    pub fn kind(&self) -> StatementKind {
        self.statement.kind()
    }

    /// Parses one line, which must carry `expected` as its position.
    pub fn parse(line: &str, expected: u64) -> Result<Self, LogError> {
        let corrupt = |reason: String| LogError::CorruptLog { position: expected, reason };
        let mut fields = line.splitn(4, '\t');
        let (Some(pos), Some(kind), Some(repo), Some(payload)) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(corrupt("expected four tab-separated fields".into()));
        };
        let position: u64 = pos.parse().map_err(|_| corrupt(format!("bad position `{pos}`")))?;
        if position != expected {
            return Err(corrupt(format!("found position {position}")));
        }
        let kind: StatementKind = kind.parse().map_err(corrupt)?;
        let statement = parse_statement(payload).map_err(|e| corrupt(e.to_string()))?;
        if statement.kind() != kind {
            return Err(corrupt(format!("record type `{kind}` does not match its statement")));
        }
        if repo.is_empty() {
            return Err(corrupt("empty repository field".into()));
        }
        Ok(LogRecord { position, repository: repo.to_string(), statement })
    }
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}", self.position, self.kind(), self.repository, self.statement)
    }
}

/// Parses a whole log. A trailing newline is fine; blank lines are not.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, LogError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n').enumerate().map(|(i, line)| LogRecord::parse(line, i as u64 + 1)).collect()
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_log(&text),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

/// Appends records to a file; every append is flushed.
#[derive(Debug)]
pub struct LogWriter {
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn append_to(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(LogWriter { out: BufWriter::new(file) })
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), LogError> {
        writeln!(self.out, "{record}")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: u64, s: &str) -> LogRecord {
        LogRecord { position: p, repository: "hr".into(), statement: parse_statement(s).unwrap() }
    }

    #[test]
    fn records_round_trip() {
        let text = format!("{}\n{}\n", rec(1, "repository hr"), rec(2, r#"individual V { t = "a\tb" }"#));
        let back = parse_log(&text).unwrap();
        assert_eq!(back, vec![rec(1, "repository hr"), rec(2, r#"individual V { t = "a\tb" }"#)]);
        assert!(parse_log("").unwrap().is_empty());
    }

    #[test]
    fn gaps_and_garbage_are_reported_by_position() {
        let text = format!("{}\n{}\n", rec(1, "tick"), rec(3, "tick"));
        assert!(matches!(parse_log(&text), Err(LogError::CorruptLog { position: 2, .. })));
        let text = format!("{}\n2\tclock\thr\tnot a statement\n", rec(1, "tick"));
        assert!(matches!(parse_log(&text), Err(LogError::CorruptLog { position: 2, .. })));
        assert!(matches!(parse_log("1\tdata\thr\ttick\n"), Err(LogError::CorruptLog { position: 1, .. })));
    }

    #[test]
    fn writer_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.tsv");
        let mut w = LogWriter::append_to(&path).unwrap();
        w.append(&rec(1, "tick")).unwrap();
        drop(w);
        let mut w = LogWriter::append_to(&path).unwrap();
        w.append(&rec(2, "tick")).unwrap();
        assert_eq!(read_log(&path).unwrap().len(), 2);
        assert!(read_log(&dir.path().join("missing")).unwrap().is_empty());
    }
}
