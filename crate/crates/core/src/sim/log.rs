//! Event log: the simulation's append-only record of what happened at
//! which tick. Line-delimited text with a version header; serialization
//! round-trips byte-exactly so logs can be audited, diffed and replayed
//! by other tools.

use std::fmt;
use std::str::FromStr;

pub const LOG_HEADER: &str = "tandem-log-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Robot,
    Human,
    Classifier,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Robot => "robot",
            Source::Human => "human",
            Source::Classifier => "classifier",
        })
    }
}

impl FromStr for Source {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "robot" => Ok(Source::Robot),
            "human" => Ok(Source::Human),
            "classifier" => Ok(Source::Classifier),
            _ => Err(()),
        }
    }
}

/// One record: tick, source, and ordered key=value payload fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: u64,
    pub source: Source,
    pub fields: Vec<(String, String)>,
}

impl Event {
    pub fn new(tick: u64, source: Source, fields: &[(&str, &str)]) -> Self {
        for (k, v) in fields {
            assert!(token_ok(k) && token_ok(v), "log token with whitespace or '=': {k}={v}");
        }
        Event {
            tick,
            source,
            fields: fields.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Convenience: the `ev` field, present on every event we emit.
    pub fn kind(&self) -> &str {
        self.get("ev").unwrap_or("")
    }
}

fn token_ok(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace) && !s.contains('=')
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} src={}", self.tick, self.source)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogParseError {
    #[error("line 1: expected header {LOG_HEADER:?}")]
    BadHeader,
    #[error("line {line}: {what}")]
    Malformed { line: usize, what: String },
    #[error("line {line}: tick went backwards ({prev} then {got})")]
    OutOfOrder { line: usize, prev: u64, got: u64 },
}

impl EventLog {
    /// Appends one event. Ticks must be non-decreasing.
    pub fn push(&mut self, event: Event) {
        if let Some(last) = self.events.last() {
            assert!(event.tick >= last.tick, "event tick went backwards");
        }
        self.events.push(event);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LogParseError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, LOG_HEADER)) => {}
            _ => return Err(LogParseError::BadHeader),
        }
        let mut events = Vec::new();
        let mut prev_tick = 0u64;
        for (i, line) in lines {
            let line_no = i + 1;
            let malformed =
                |what: &str| LogParseError::Malformed { line: line_no, what: what.into() };
            let mut parts = line.split(' ');
            let tick = parts
                .next()
                .and_then(|p| p.strip_prefix("t="))
                .and_then(|v| v.parse::<u64>().ok())
                .ok_or_else(|| malformed("expected t=<tick>"))?;
            let source = parts
                .next()
                .and_then(|p| p.strip_prefix("src="))
                .and_then(|v| v.parse::<Source>().ok())
                .ok_or_else(|| malformed("expected src=robot|human|classifier"))?;
            let mut fields = Vec::new();
            for part in parts {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| malformed("expected key=value"))?;
                if !token_ok(k) || !token_ok(v) {
                    return Err(malformed("empty key or value"));
                }
                fields.push((k.to_string(), v.to_string()));
            }
            if !events.is_empty() && tick < prev_tick {
                return Err(LogParseError::OutOfOrder { line: line_no, prev: prev_tick, got: tick });
            }
            prev_tick = tick;
            events.push(Event { tick, source, fields });
        }
        Ok(EventLog { events })
    }

    /// Events of one kind, in order.
    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Event> {
        self.events.iter().filter(move |e| e.kind() == kind)
    }
}
