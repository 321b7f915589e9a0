//! Plain EDF (no EDF+ annotation channels).
//!
//! Layout: a 256-byte fixed header, then 256 bytes of per-signal header per
//! signal (stored field-major: all labels, then all transducers, ...), then
//! data records. Each record holds `samples_per_record[i]` little-endian
//! 16-bit two's-complement samples for signal 0, then signal 1, and so on.

use std::collections::BTreeMap;

use super::{Channel, Recording};
use crate::{Error, Result};

const FIXED_HEADER: usize = 256;
const SIGNAL_HEADER: usize = 256;

/// Per-signal field widths, in on-disk order.
const SIGNAL_FIELDS: [(&str, usize); 10] = [
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
];

fn edf_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Edf {
        field: field.into(),
        reason: reason.into(),
    }
}

fn ascii_field<'a>(bytes: &'a [u8], at: usize, len: usize, field: &str) -> Result<&'a str> {
    let raw = bytes
        .get(at..at + len)
        .ok_or_else(|| edf_err(field, "header truncated"))?;
    if !raw.is_ascii() {
        return Err(edf_err(field, "non-ASCII bytes in header field"));
    }
    // ASCII is valid UTF-8.
    Ok(std::str::from_utf8(raw).unwrap().trim())
}

fn numeric<T: std::str::FromStr>(s: &str, field: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| edf_err(field, format!("expected a number, found {s:?}")))
}

struct SignalHeader {
    label: String,
    physical_min: f64,
    physical_max: f64,
    digital_min: i32,
    digital_max: i32,
    samples_per_record: usize,
}

impl SignalHeader {
    fn gain_offset(&self) -> (f64, f64) {
        let gain = (self.physical_max - self.physical_min)
            / (self.digital_max - self.digital_min) as f64;
        (gain, self.physical_min - self.digital_min as f64 * gain)
    }
}

/// Parses a plain EDF file into a [`Recording`].
pub fn read_edf(bytes: &[u8]) -> Result<Recording> {
    if bytes.len() < FIXED_HEADER {
        return Err(edf_err("header", format!("file has {} bytes, need at least 256", bytes.len())));
    }
    let patient = ascii_field(bytes, 8, 80, "patient")?.to_string();
    let recording_id = ascii_field(bytes, 88, 80, "recording")?.to_string();
    let start_date = ascii_field(bytes, 168, 8, "start_date")?.to_string();
    let start_time = ascii_field(bytes, 176, 8, "start_time")?.to_string();
    let header_bytes: usize = numeric(ascii_field(bytes, 184, 8, "header_bytes")?, "header_bytes")?;
    let n_records: i64 = numeric(ascii_field(bytes, 236, 8, "n_records")?, "n_records")?;
    let record_duration: f64 =
        numeric(ascii_field(bytes, 244, 8, "record_duration")?, "record_duration")?;
    let ns: usize = numeric(ascii_field(bytes, 252, 4, "n_signals")?, "n_signals")?;

    if ns == 0 {
        return Err(edf_err("n_signals", "file declares no signals"));
    }
    if header_bytes != FIXED_HEADER + ns * SIGNAL_HEADER {
        return Err(edf_err(
            "header_bytes",
            format!("declared {header_bytes}, expected {} for {ns} signals", FIXED_HEADER + ns * SIGNAL_HEADER),
        ));
    }
    if bytes.len() < header_bytes {
        return Err(edf_err("signal_header", "signal header blocks truncated"));
    }
    if !(record_duration > 0.0) {
        return Err(edf_err("record_duration", format!("must be positive, got {record_duration}")));
    }

    // Field-major: offset of field f for signal i = start_f + i * width_f.
    let mut field_start = FIXED_HEADER;
    let mut fields: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (name, width) in SIGNAL_FIELDS {
        fields.insert(name, (field_start, width));
        field_start += width * ns;
    }
    let get = |name: &str, i: usize| -> Result<&str> {
        let (start, width) = fields[name];
        ascii_field(bytes, start + i * width, width, &format!("signal {i} {name}"))
    };

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let label = get("label", i)?.to_string();
        let tag = |f: &str| format!("signal {i} ({label}) {f}");
        let sig = SignalHeader {
            physical_min: numeric(get("physical_min", i)?, &tag("physical_min"))?,
            physical_max: numeric(get("physical_max", i)?, &tag("physical_max"))?,
            digital_min: numeric(get("digital_min", i)?, &tag("digital_min"))?,
            digital_max: numeric(get("digital_max", i)?, &tag("digital_max"))?,
            samples_per_record: numeric(get("samples_per_record", i)?, &tag("samples_per_record"))?,
            label: label.clone(),
        };
        if sig.digital_max <= sig.digital_min {
            return Err(edf_err(tag("digital_range"), "digital_max must exceed digital_min"));
        }
        if sig.samples_per_record == 0 {
            return Err(edf_err(tag("samples_per_record"), "must be positive"));
        }
        signals.push(sig);
    }

    let record_samples: usize = signals.iter().map(|s| s.samples_per_record).sum();
    let record_bytes = 2 * record_samples;
    let payload = &bytes[header_bytes..];
    let n_records = if n_records < 0 {
        // -1 means "unknown" while recording; infer from the payload.
        payload.len() / record_bytes
    } else {
        n_records as usize
    };
    if n_records == 0 {
        return Err(edf_err("n_records", "file has no data records"));
    }
    let needed = n_records * record_bytes;
    if payload.len() < needed {
        // Name the first signal whose data is cut off.
        let short_at = payload.len() % record_bytes;
        let mut acc = 0;
        let mut culprit = &signals[0].label;
        for s in &signals {
            acc += 2 * s.samples_per_record;
            if short_at < acc {
                culprit = &s.label;
                break;
            }
        }
        return Err(edf_err(
            format!("payload ({culprit})"),
            format!("truncated: {} bytes of data, header implies {needed}", payload.len()),
        ));
    }
    if payload.len() > needed {
        log::warn!("EDF payload has {} trailing bytes", payload.len() - needed);
    }

    let mut channels: Vec<Channel> = signals
        .iter()
        .map(|s| Channel {
            label: s.label.clone(),
            rate_hz: s.samples_per_record as f64 / record_duration,
            samples: Vec::with_capacity(s.samples_per_record * n_records),
        })
        .collect();
    let maps: Vec<(f64, f64)> = signals.iter().map(SignalHeader::gain_offset).collect();

    for record in payload[..needed].chunks_exact(record_bytes) {
        let mut at = 0;
        for (ch, (sig, &(gain, offset))) in channels.iter_mut().zip(signals.iter().zip(&maps)) {
            let block = &record[at..at + 2 * sig.samples_per_record];
            ch.samples.extend(
                block
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 * gain + offset),
            );
            at += block.len();
        }
    }

    let mut subject_meta = BTreeMap::new();
    if !patient.is_empty() {
        // EDF+ style "code sex birthdate name"; plain files may hold free text.
        let tokens: Vec<&str> = patient.split_whitespace().collect();
        if tokens.len() >= 2 && matches!(tokens[1], "M" | "F") {
            subject_meta.insert("sex".to_string(), tokens[1].to_string());
        }
        subject_meta.insert("patient".to_string(), patient);
    }
    if !recording_id.is_empty() {
        subject_meta.insert("recording".to_string(), recording_id);
    }
    subject_meta.insert("start_date".to_string(), start_date);
    subject_meta.insert("start_time".to_string(), start_time);

    let rec = Recording {
        channels,
        subject_meta,
    };
    rec.validate()?;
    Ok(rec)
}

fn pad_field(out: &mut Vec<u8>, value: &str, width: usize) {
    let mut v: Vec<u8> = value.bytes().filter(|b| b.is_ascii() && !b.is_ascii_control()).take(width).collect();
    v.resize(width, b' ');
    out.extend_from_slice(&v);
}

/// Formats `v` into at most 8 characters, rounding away from the interior
/// of the data range (`down` for minima) so the range still covers `v`.
fn fmt_bound(v: f64, down: bool) -> String {
    for decimals in (0..=6).rev() {
        let scale = 10f64.powi(decimals);
        let r = if down { (v * scale).floor() / scale } else { (v * scale).ceil() / scale };
        let s = format!("{r:.*}", decimals as usize);
        if s.len() <= 8 {
            return s;
        }
    }
    // Out of the representable 8-char range; clamp.
    if down { "-9999999".into() } else { "99999999".into() }
}

/// Writes `rec` as plain EDF with 1-second records and a full 16-bit
/// digital range. Each channel's rate must be a whole number of samples per
/// second; a partial final record is padded with the channel's last value.
pub fn write_edf(rec: &Recording) -> Result<Vec<u8>> {
    rec.validate()?;
    let ns = rec.channels.len();
    if ns == 0 {
        return Err(Error::invalid("recording has no channels"));
    }
    let mut spr = Vec::with_capacity(ns);
    for c in &rec.channels {
        if c.rate_hz.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "channel {}: rate {} Hz is not a whole number of samples per record",
                c.label, c.rate_hz
            )));
        }
        spr.push(c.rate_hz as usize);
    }
    let n_records = rec
        .channels
        .iter()
        .zip(&spr)
        .map(|(c, &n)| c.samples.len().div_ceil(n))
        .max()
        .unwrap();

    let (dmin, dmax) = (i16::MIN as i32, i16::MAX as i32);
    let mut bounds = Vec::with_capacity(ns);
    for c in &rec.channels {
        let lo = c.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi - lo < 1e-6 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
        let (lo_s, hi_s) = (fmt_bound(lo, true), fmt_bound(hi, false));
        let (lo_v, hi_v): (f64, f64) = (lo_s.parse().unwrap(), hi_s.parse().unwrap());
        bounds.push((lo_s, hi_s, lo_v, hi_v));
    }

    let header_bytes = FIXED_HEADER + ns * SIGNAL_HEADER;
    let mut out = Vec::with_capacity(header_bytes + n_records * 2 * spr.iter().sum::<usize>());
    pad_field(&mut out, "0", 8);
    let patient = rec.subject_meta.get("patient").cloned().unwrap_or_else(|| {
        let sex = rec.subject_meta.get("sex").map(String::as_str).unwrap_or("X");
        format!("X {sex} X X")
    });
    pad_field(&mut out, &patient, 80);
    let recording = rec.subject_meta.get("recording").cloned().unwrap_or_default();
    pad_field(&mut out, &recording, 80);
    pad_field(&mut out, rec.subject_meta.get("start_date").map(String::as_str).unwrap_or("01.01.00"), 8);
    pad_field(&mut out, rec.subject_meta.get("start_time").map(String::as_str).unwrap_or("00.00.00"), 8);
    pad_field(&mut out, &header_bytes.to_string(), 8);
    pad_field(&mut out, "", 44);
    pad_field(&mut out, &n_records.to_string(), 8);
    pad_field(&mut out, "1", 8);
    pad_field(&mut out, &ns.to_string(), 4);

    for c in &rec.channels {
        pad_field(&mut out, &c.label, 16);
    }
    for _ in 0..ns {
        pad_field(&mut out, "AgAgCl electrode", 80);
    }
    for _ in 0..ns {
        pad_field(&mut out, "uV", 8);
    }
    for b in &bounds {
        pad_field(&mut out, &b.0, 8);
    }
    for b in &bounds {
        pad_field(&mut out, &b.1, 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, &dmin.to_string(), 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, &dmax.to_string(), 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, "", 80);
    }
    for &n in &spr {
        pad_field(&mut out, &n.to_string(), 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, "", 32);
    }
    debug_assert_eq!(out.len(), header_bytes);

    for r in 0..n_records {
        for (c, (&n, b)) in rec.channels.iter().zip(spr.iter().zip(&bounds)) {
            let gain = (b.3 - b.2) / (dmax - dmin) as f64;
            let last = *c.samples.last().unwrap();
            for k in r * n..(r + 1) * n {
                let x = c.samples.get(k).copied().unwrap_or(last);
                let d = ((x - b.2) / gain + dmin as f64).round().clamp(dmin as f64, dmax as f64);
                out.extend_from_slice(&(d as i16).to_le_bytes());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-assembled single-signal file, independent of `write_edf`.
    fn minimal_edf(digital: &[i16], declared_signals: usize) -> Vec<u8> {
        let ns = declared_signals;
        let mut out = Vec::new();
        pad_field(&mut out, "0", 8);
        pad_field(&mut out, "X M X X", 80);
        pad_field(&mut out, "", 80);
        pad_field(&mut out, "01.01.00", 8);
        pad_field(&mut out, "00.00.00", 8);
        pad_field(&mut out, &(256 + 256 * ns).to_string(), 8);
        pad_field(&mut out, "", 44);
        pad_field(&mut out, "1", 8);
        pad_field(&mut out, "1", 8);
        pad_field(&mut out, &ns.to_string(), 4);
        let per = |out: &mut Vec<u8>, f: &dyn Fn(usize) -> String, w: usize| {
            for i in 0..ns {
                pad_field(out, &f(i), w);
            }
        };
        per(&mut out, &|i| format!("S{i}"), 16);
        per(&mut out, &|_| String::new(), 80);
        per(&mut out, &|_| "uV".into(), 8);
        per(&mut out, &|_| "-100".into(), 8);
        per(&mut out, &|_| "100".into(), 8);
        per(&mut out, &|_| "-32768".into(), 8);
        per(&mut out, &|_| "32767".into(), 8);
        per(&mut out, &|_| String::new(), 80);
        per(&mut out, &|_| digital.len().to_string(), 8);
        per(&mut out, &|_| String::new(), 32);
        for d in digital {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    #[test]
    fn affine_map_on_minimal_file() {
        let rec = read_edf(&minimal_edf(&[0, -32768, 32767, 1], 1)).unwrap();
        assert_eq!(rec.channels.len(), 1);
        let ch = &rec.channels[0];
        assert_eq!(ch.rate_hz, 4.0);
        // gain = 200/65535, offset = -100 + 32768 * gain
        let gain = 200.0 / 65535.0;
        let offset = -100.0 + 32768.0 * gain;
        assert!((ch.samples[0] - offset).abs() < 1e-12);
        assert!((ch.samples[0] - 0.0015259).abs() < 1e-6);
        assert_eq!(ch.samples[1], -100.0);
        assert!((ch.samples[2] - 100.0).abs() < 1e-12);
        assert_eq!(rec.subject_meta.get("sex").map(String::as_str), Some("M"));
    }

    #[test]
    fn declared_signals_without_payload() {
        let err = read_edf(&minimal_edf(&[1, 2, 3, 4], 2)).unwrap_err();
        match err {
            Error::Edf { field, reason } => {
                assert!(field.contains("S1"), "{field}");
                assert!(reason.contains("truncated"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_numeric_field() {
        let mut b = minimal_edf(&[0; 4], 1);
        b[256 + 16 + 80 + 8..256 + 16 + 80 + 16].copy_from_slice(b"abc     ");
        let err = read_edf(&b).unwrap_err().to_string();
        assert!(err.contains("physical_min"), "{err}");
    }

    #[test]
    fn zero_digital_range() {
        let mut b = minimal_edf(&[0; 4], 1);
        let at = 256 + 16 + 80 + 8 + 8 + 8;
        b[at..at + 8].copy_from_slice(b"32767   ");
        let err = read_edf(&b).unwrap_err().to_string();
        assert!(err.contains("digital"), "{err}");
    }

    #[test]
    fn short_file() {
        assert!(read_edf(&[b' '; 100]).is_err());
    }

    #[test]
    fn round_trip_within_quantization() {
        let samples: Vec<f64> = (0..300).map(|i| 40.0 * (i as f64 * 0.1).sin() + 3.0).collect();
        let rec = Recording::new(vec![
            Channel::new("C3-A1", 100.0, samples.clone()).unwrap(),
            Channel::new("O1-A1", 50.0, samples[..150].to_vec()).unwrap(),
        ])
        .unwrap();
        let back = read_edf(&write_edf(&rec).unwrap()).unwrap();
        assert_eq!(back.channels.len(), 2);
        for (a, b) in rec.channels.iter().zip(&back.channels) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.rate_hz, b.rate_hz);
            assert_eq!(a.samples.len(), b.samples.len());
            let lo = a.samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = a.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let step = (hi - lo + 2e-6) / 65535.0;
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x - y).abs() <= step, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn bound_formatting_covers_value() {
        for v in [-123.456789, 0.000123, 98765.4321, -0.5] {
            let lo: f64 = fmt_bound(v, true).parse().unwrap();
            let hi: f64 = fmt_bound(v, false).parse().unwrap();
            assert!(lo <= v && hi >= v);
            assert!(fmt_bound(v, true).len() <= 8);
        }
    }
}
