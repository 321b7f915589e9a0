//! Recordings, annotation files, resampling and the synthetic generator.

mod annotations;
mod edf;
mod resample;
mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use annotations::{format_annotations, read_annotations, AnnotationOptions, ShortEventPolicy};
pub use edf::{read_edf, write_edf};
pub use resample::{resample_cubic, NaturalCubicSpline};
pub use synth::{synth_recording, EventKind, SynthConfig, SynthOutput};

/// One sampled signal, in microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub label: String,
    pub rate_hz: f64,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(label: impl Into<String>, rate_hz: f64, samples: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "channel {label}: sampling rate must be positive, got {rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::invalid(format!("channel {label}: no samples")));
        }
        Ok(Channel {
            label,
            rate_hz,
            samples,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Recording {
    pub channels: Vec<Channel>,
    pub subject_meta: BTreeMap<String, String>,
}

impl Recording {
    pub fn new(channels: Vec<Channel>) -> Result<Self> {
        let rec = Recording {
            channels,
            subject_meta: BTreeMap::new(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.channels.iter().enumerate() {
            if !(c.rate_hz > 0.0) {
                return Err(Error::invalid(format!("channel {}: nonpositive rate", c.label)));
            }
            if c.samples.is_empty() {
                return Err(Error::invalid(format!("channel {}: no samples", c.label)));
            }
            if self.channels[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::invalid(format!("duplicate channel label {}", c.label)));
            }
        }
        Ok(())
    }

    /// Longest channel duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.channels
            .iter()
            .map(Channel::duration_s)
            .fold(0.0, f64::max)
    }

    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }

    /// Resamples every channel whose rate differs from `target_hz`.
    pub fn resampled(&self, target_hz: f64) -> Result<Recording> {
        let channels = self
            .channels
            .iter()
            .map(|c| resample_cubic(c, target_hz))
            .collect::<Result<Vec<_>>>()?;
        Ok(Recording {
            channels,
            subject_meta: self.subject_meta.clone(),
        })
    }
}

/// A scored event, in seconds from the start of the excerpt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub onset_s: f64,
    pub duration_s: f64,
}

impl Event {
    pub fn end_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }
}

/// One expert's event list, sorted by onset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub expert_id: u32,
    pub events: Vec<Event>,
}

impl AnnotationSet {
    /// Builds a set from arbitrary events, sorting them by onset.
    pub fn new(expert_id: u32, mut events: Vec<Event>) -> Result<Self> {
        for e in &events {
            if !(e.onset_s >= 0.0) || !(e.duration_s > 0.0) || !e.end_s().is_finite() {
                return Err(Error::invalid(format!(
                    "invalid event onset={} duration={}",
                    e.onset_s, e.duration_s
                )));
            }
        }
        events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
        Ok(AnnotationSet { expert_id, events })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks every event ends within `duration_s` (small slack for rounding).
    pub fn check_within(&self, duration_s: f64) -> Result<()> {
        match self.events.iter().find(|e| e.end_s() > duration_s + 1e-6) {
            Some(e) => Err(Error::invalid(format!(
                "expert {}: event at {} s ends after the recording ({} s)",
                self.expert_id, e.onset_s, duration_s
            ))),
            None => Ok(()),
        }
    }
}
