//! Newline-delimited JSON episode logs.
//!
//! A log is one `header` line followed by one `step` line per transition and
//! an optional trailing `summary` line. Every line is a JSON object whose
//! `kind` field names its type.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use socnav_core::env::{EpisodeRecord, RecordHeader, RecordedStep};
use socnav_core::metrics::EpisodeSummary;
use socnav_core::World;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Header(RecordHeader),
    Step(Box<RecordedStep>),
    Summary(Box<EpisodeSummary>),
    /// A bare world snapshot; what external scorers receive.
    State {
        state: Box<World>,
    },
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("log is empty")]
    Empty,
    #[error("line {line}: expected {expected}, found a `{found}` record")]
    Unexpected {
        line: usize,
        expected: &'static str,
        found: &'static str,
    },
}

impl LogLine {
    fn kind(&self) -> &'static str {
        match self {
            LogLine::Header(_) => "header",
            LogLine::Step(_) => "step",
            LogLine::Summary(_) => "summary",
            LogLine::State { .. } => "state",
        }
    }
}

pub fn write_line<W: Write>(w: &mut W, line: &LogLine) -> Result<(), LogError> {
    serde_json::to_writer(&mut *w, line).map_err(|source| LogError::Json { line: 0, source })?;
    w.write_all(b"\n")?;
    Ok(())
}

/// The scorer request for `world`, without the trailing newline.
pub fn state_line(world: &World) -> String {
    serde_json::to_string(&LogLine::State {
        state: Box::new(world.clone()),
    })
    .expect("worlds serialize")
}

pub fn write_record<W: Write>(
    w: &mut W,
    record: &EpisodeRecord,
    summary: Option<&EpisodeSummary>,
) -> Result<(), LogError> {
    write_line(w, &LogLine::Header(record.header.clone()))?;
    for s in &record.steps {
        write_line(w, &LogLine::Step(Box::new(s.clone())))?;
    }
    if let Some(s) = summary {
        write_line(w, &LogLine::Summary(Box::new(s.clone())))?;
    }
    Ok(())
}

pub fn record_to_string(record: &EpisodeRecord, summary: Option<&EpisodeSummary>) -> String {
    let mut buf = Vec::new();
    write_record(&mut buf, record, summary).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Reads one episode log; blank lines are skipped.
pub fn read_record<R: BufRead>(r: R) -> Result<(EpisodeRecord, Option<EpisodeSummary>), LogError> {
    let mut header = None;
    let mut steps = Vec::new();
    let mut summary = None;
    for (i, text) in r.lines().enumerate() {
        let text = text?;
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: LogLine =
            serde_json::from_str(&text).map_err(|source| LogError::Json { line, source })?;
        let unexpected = |expected, found: &LogLine| LogError::Unexpected {
            line,
            expected,
            found: found.kind(),
        };
        match (parsed, header.is_some(), summary.is_some()) {
            (LogLine::Header(h), false, _) => header = Some(h),
            (p, false, _) => return Err(unexpected("a header", &p)),
            (LogLine::Step(s), true, false) => steps.push(*s),
            (LogLine::Summary(s), true, false) => summary = Some(*s),
            (p, true, false) => return Err(unexpected("a step or summary", &p)),
            (p, true, true) => return Err(unexpected("end of log after the summary", &p)),
        }
    }
    let header = header.ok_or(LogError::Empty)?;
    Ok((EpisodeRecord { header, steps }, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use socnav_core::{preset, Action, Env};

    fn short_record() -> (EpisodeRecord, EpisodeSummary) {
        let mut env = Env::new(preset(2).unwrap()).unwrap();
        env.reset(3).unwrap();
        env.start_recording();
        for i in 0..5 {
            if env
                .step(&Action::Discrete { index: i % 7 })
                .unwrap()
                .terminated
            {
                break;
            }
        }
        (env.stop_recording().unwrap(), env.summary().unwrap())
    }

    #[test]
    fn round_trip_is_exact() {
        let (rec, summary) = short_record();
        let text = record_to_string(&rec, Some(&summary));
        assert_eq!(text.lines().count(), rec.steps.len() + 2);
        assert!(text.lines().all(|l| l.starts_with("{\"kind\":")));
        let (back, s) = read_record(text.as_bytes()).unwrap();
        assert_eq!(back.header, rec.header);
        for (a, b) in back.steps.iter().zip(&rec.steps) {
            assert!(a.state.same_state(&b.state) && a.next_state.same_state(&b.next_state));
            assert_eq!(
                (a.action, a.reward.to_bits(), &a.info),
                (b.action, b.reward.to_bits(), &b.info)
            );
        }
        assert_eq!(back.steps.len(), rec.steps.len());
        assert_eq!(s.as_ref().unwrap(), &summary);
        assert_eq!(record_to_string(&back, s.as_ref()), text);
    }

    #[test]
    fn malformed_logs_are_rejected() {
        let (rec, _) = short_record();
        let text = record_to_string(&rec, None);
        let steps_only: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            read_record(steps_only.as_bytes()),
            Err(LogError::Unexpected { line: 1, .. })
        ));
        assert!(matches!(read_record("".as_bytes()), Err(LogError::Empty)));
        assert!(matches!(
            read_record("{nope".as_bytes()),
            Err(LogError::Json { line: 1, .. })
        ));
        let doubled = format!("{text}{}", text.lines().next().unwrap());
        assert!(matches!(
            read_record(doubled.as_bytes()),
            Err(LogError::Unexpected { .. })
        ));
    }
}
