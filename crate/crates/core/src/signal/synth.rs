//! Synthetic three-channel recordings with planted spindles or K-complexes,
//! scored by two simulated experts whose onsets disagree by a seeded jitter.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AnnotationSet, Channel, Event, Recording};
use crate::seed::{rng_for, stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Spindle,
    Kcomplex,
}

/// Channel labels emitted by the generator, central channel first.
pub const SYNTH_LABELS: [&str; 3] = ["C3-A1", "FP1-A1", "O1-A1"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub kind: EventKind,
    pub n_events: usize,
    /// White-noise standard deviation, µV.
    pub noise_uv: f64,
    /// Peak event amplitude on the central channel, µV. Defaults by kind.
    pub event_amplitude_uv: Option<f64>,
    /// Event gain on the frontal and occipital channels relative to central.
    pub side_gain: f64,
    /// Standard deviation of each expert's onset error, seconds.
    pub jitter_s: f64,
    /// Minimum spacing between events (and from the edges), seconds.
    pub min_gap_s: f64,
    /// Overrides the seed passed to [`synth_recording`] when set.
    pub seed: Option<u64>,
    /// Copied into the recording's subject metadata (e.g. `sex = "F"`).
    pub meta: BTreeMap<String, String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_s: 1800.0,
            rate_hz: 200.0,
            kind: EventKind::Spindle,
            n_events: 50,
            noise_uv: 4.0,
            event_amplitude_uv: None,
            side_gain: 0.15,
            jitter_s: 0.1,
            min_gap_s: 1.0,
            seed: None,
            meta: BTreeMap::new(),
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn amplitude_uv(&self) -> f64 {
        self.event_amplitude_uv.unwrap_or(match self.kind {
            EventKind::Spindle => 18.0,
            EventKind::Kcomplex => 75.0,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.rate_hz > 0.0) {
            return Err(Error::config("synth: duration and rate must be positive"));
        }
        if self.noise_uv < 0.0 || self.jitter_s < 0.0 || self.min_gap_s < 0.0 || self.side_gain < 0.0 {
            return Err(Error::config("synth: noise, jitter, gap and gain must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub recording: Recording,
    pub expert1: AnnotationSet,
    pub expert2: AnnotationSet,
    /// The planted events before expert jitter.
    pub truth: Vec<Event>,
}

/// One background band: `count` sinusoids with random frequency and phase.
struct Bank {
    lo_hz: f64,
    hi_hz: f64,
    amplitude: f64,
    count: usize,
}

// Roughly 1/f amplitudes: delta, theta, alpha/beta.
const BANKS: [Bank; 3] = [
    Bank { lo_hz: 0.5, hi_hz: 4.0, amplitude: 12.0, count: 8 },
    Bank { lo_hz: 4.0, hi_hz: 8.0, amplitude: 5.0, count: 8 },
    Bank { lo_hz: 8.0, hi_hz: 30.0, amplitude: 1.5, count: 12 },
];

fn event_waveform(kind: EventKind, duration_s: f64, freq_hz: f64, t: f64) -> f64 {
    match kind {
        EventKind::Spindle => {
            let envelope = 0.5 * (1.0 - (2.0 * PI * t / duration_s).cos());
            envelope * (2.0 * PI * freq_hz * t).sin()
        }
        EventKind::Kcomplex => {
            let split = 0.35 * duration_s;
            if t < split {
                -(PI * t / split).sin()
            } else {
                0.5 * (PI * (t - split) / (duration_s - split)).sin()
            }
        }
    }
}

/// Generates a recording, two expert annotation sets, and the true events.
pub fn synth_recording(cfg: &SynthConfig, seed: u64) -> Result<SynthOutput> {
    cfg.validate()?;
    let seed = cfg.seed.unwrap_or(seed);
    let mut rng = rng_for(seed, &[stream::SYNTH, 0]);

    let (dur_lo, dur_hi) = match cfg.kind {
        EventKind::Spindle => (0.5, 1.5),
        EventKind::Kcomplex => (0.6, 1.2),
    };
    let durations: Vec<f64> = (0..cfg.n_events).map(|_| rng.random_range(dur_lo..dur_hi)).collect();
    let required = durations.iter().sum::<f64>() + (cfg.n_events + 1) as f64 * cfg.min_gap_s;
    if required > cfg.duration_s {
        return Err(Error::config(format!(
            "{} events need at least {required:.1} s but the recording lasts {} s",
            cfg.n_events, cfg.duration_s
        )));
    }
    // Spread the slack over the n+1 gaps using sorted uniform cut points.
    let slack = cfg.duration_s - required;
    let mut cuts: Vec<f64> = (0..cfg.n_events).map(|_| rng.random::<f64>() * slack).collect();
    cuts.sort_by(f64::total_cmp);
    let mut truth = Vec::with_capacity(cfg.n_events);
    let mut used = 0.0;
    for (i, d) in durations.iter().enumerate() {
        let onset_s = cuts[i] + (i + 1) as f64 * cfg.min_gap_s + used;
        used += d;
        truth.push(Event { onset_s, duration_s: *d });
    }
    let freqs: Vec<f64> = (0..cfg.n_events).map(|_| rng.random_range(12.0..14.0)).collect();
    let gains: Vec<f64> = (0..cfg.n_events).map(|_| rng.random_range(0.8..1.2)).collect();

    let n = (cfg.duration_s * cfg.rate_hz).round() as usize;
    let amp = cfg.amplitude_uv();
    let white = Normal::new(0.0, cfg.noise_uv).map_err(|e| Error::config(e.to_string()))?;
    let mut channels = Vec::with_capacity(3);
    for (ci, label) in SYNTH_LABELS.iter().enumerate() {
        let mut crng = rng_for(seed, &[stream::SYNTH, 1 + ci as u64]);
        let mut x = vec![0.0; n];
        for bank in &BANKS {
            for _ in 0..bank.count {
                let f = crng.random_range(bank.lo_hz..bank.hi_hz);
                let phase = crng.random_range(0.0..2.0 * PI);
                let a = bank.amplitude * crng.random_range(0.5..1.0);
                let w = 2.0 * PI * f / cfg.rate_hz;
                for (k, v) in x.iter_mut().enumerate() {
                    *v += a * (w * k as f64 + phase).sin();
                }
            }
        }
        for v in x.iter_mut() {
            *v += white.sample(&mut crng);
        }
        let gain = if ci == 0 { 1.0 } else { cfg.side_gain };
        for ((e, f), g) in truth.iter().zip(&freqs).zip(&gains) {
            let start = (e.onset_s * cfg.rate_hz).ceil() as usize;
            let end = ((e.end_s() * cfg.rate_hz).floor() as usize).min(n.saturating_sub(1));
            for (k, v) in x.iter_mut().enumerate().take(end + 1).skip(start) {
                let t = k as f64 / cfg.rate_hz - e.onset_s;
                *v += gain * amp * g * event_waveform(cfg.kind, e.duration_s, *f, t);
            }
        }
        channels.push(Channel::new(*label, cfg.rate_hz, x)?);
    }
    let mut recording = Recording::new(channels)?;
    recording.subject_meta = cfg.meta.clone();

    let expert = |id: u32| -> Result<AnnotationSet> {
        let mut erng = rng_for(seed, &[stream::SYNTH, 10 + id as u64]);
        let events = truth
            .iter()
            .map(|e| {
                let jitter = if cfg.jitter_s > 0.0 {
                    Normal::new(0.0, cfg.jitter_s).unwrap().sample(&mut erng)
                } else {
                    0.0
                };
                Event {
                    onset_s: (e.onset_s + jitter).clamp(0.0, cfg.duration_s - e.duration_s),
                    duration_s: e.duration_s,
                }
            })
            .collect();
        AnnotationSet::new(id, events)
    };
    Ok(SynthOutput {
        expert1: expert(1)?,
        expert2: expert(2)?,
        recording,
        truth,
    })
}
