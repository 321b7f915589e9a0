//! Two-column annotation files: `onset_seconds duration_seconds` per line.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AnnotationSet, Event};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShortEventPolicy {
    /// Fail the parse.
    #[default]
    Reject,
    /// Drop the event and log a warning.
    Warn,
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationOptions {
    /// Lines skipped unconditionally before parsing.
    pub header_lines: usize,
    /// Minimum accepted event duration (0.5 s for spindles).
    pub min_duration_s: Option<f64>,
    pub short_events: ShortEventPolicy,
}

/// Parses an annotation file. A first line whose leading token is not a
/// number is taken as a header; blank lines and lines starting with `#` are ignored.
pub fn read_annotations(text: &str, expert_id: u32, opts: &AnnotationOptions) -> Result<AnnotationSet> {
    let mut events = Vec::new();
    let mut seen_content = false;
    for (idx, line) in text.lines().enumerate().skip(opts.header_lines) {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let first_content = !seen_content;
        seen_content = true;
        if first_content && tokens[0].parse::<f64>().is_err() {
            continue;
        }
        if tokens.len() < 2 {
            return Err(Error::Annotation {
                line: lineno,
                reason: format!("expected onset and duration, found {line:?}"),
            });
        }
        let parse = |t: &str, what: &str| {
            t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Annotation {
                line: lineno,
                reason: format!("{what} {t:?} is not a number"),
            })
        };
        let onset_s = parse(tokens[0], "onset")?;
        let duration_s = parse(tokens[1], "duration")?;
        if onset_s < 0.0 {
            return Err(Error::Annotation {
                line: lineno,
                reason: format!("negative onset {onset_s}"),
            });
        }
        if duration_s <= 0.0 {
            return Err(Error::Annotation {
                line: lineno,
                reason: format!("duration must be positive, got {duration_s}"),
            });
        }
        if let Some(min) = opts.min_duration_s {
            if duration_s < min {
                match opts.short_events {
                    ShortEventPolicy::Reject => {
                        return Err(Error::Annotation {
                            line: lineno,
                            reason: format!("duration {duration_s} s below minimum {min} s"),
                        })
                    }
                    ShortEventPolicy::Warn => {
                        log::warn!("line {lineno}: dropping {duration_s} s event (minimum {min} s)");
                        continue;
                    }
                }
            }
        }
        events.push(Event { onset_s, duration_s });
    }
    AnnotationSet::new(expert_id, events)
}

/// Inverse of [`read_annotations`] for valid event lists.
pub fn format_annotations(set: &AnnotationSet) -> String {
    let mut out = String::new();
    for e in &set.events {
        // `{}` on f64 prints the shortest string that parses back exactly.
        writeln!(out, "{} {}", e.onset_s, e.duration_s).unwrap();
    }
    out
}
