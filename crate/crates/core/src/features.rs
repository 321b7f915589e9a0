//! Windowed statistics of wavelet detail coefficients.
//!
//! Column layout for the three-channel table:
//! `ARG(25*channel + 5*(level-1) + stat)` with channels ordered central,
//! FP1, O1 and statistics ordered average, SD, symmetry, PSD, curve length.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dwt::{dwt_multilevel, Boundary, WaveletSpec};
use crate::signal::Recording;
use crate::{Error, Result};

pub const LEVELS: usize = 5;
pub const STATS_PER_LEVEL: usize = 5;
pub const ATTRS_PER_CHANNEL: usize = LEVELS * STATS_PER_LEVEL;
pub const N_CHANNELS: usize = 3;
pub const N_ATTRS: usize = N_CHANNELS * ATTRS_PER_CHANNEL;
pub const BASE_RATE_HZ: f64 = 256.0;

pub const STAT_NAMES: [&str; STATS_PER_LEVEL] = ["Average", "SD", "Symmetry", "PSD", "Curve Length"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EegChannel {
    Central,
    Fp1,
    O1,
}

impl EegChannel {
    pub const ALL: [EegChannel; 3] = [EegChannel::Central, EegChannel::Fp1, EegChannel::O1];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EegChannel::Central => "central",
            EegChannel::Fp1 => "fp1",
            EegChannel::O1 => "o1",
        }
    }

    /// Classifies an EDF channel label (C3-A1/CZ-A1, FP1-A1, O1-A1).
    pub fn from_label(label: &str) -> Option<Self> {
        let l = label.to_ascii_uppercase();
        let l = l.trim_start_matches("EEG").trim();
        if l.starts_with("C3") || l.starts_with("CZ") {
            Some(EegChannel::Central)
        } else if l.starts_with("FP1") {
            Some(EegChannel::Fp1)
        } else if l.starts_with("O1") {
            Some(EegChannel::O1)
        } else {
            None
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "central" | "c3" | "cz" => Some(EegChannel::Central),
            "fp1" => Some(EegChannel::Fp1),
            "o1" => Some(EegChannel::O1),
            _ => None,
        }
    }
}

/// What a canonical attribute measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttrInfo {
    pub channel: EegChannel,
    /// 1-based decomposition level (D1..D5).
    pub level: usize,
    /// Index into [`STAT_NAMES`].
    pub stat: usize,
}

pub fn attr_index(channel: EegChannel, level: usize, stat: usize) -> usize {
    ATTRS_PER_CHANNEL * channel.index() + STATS_PER_LEVEL * (level - 1) + stat
}

pub fn attr_info(index: usize) -> Option<AttrInfo> {
    if index >= N_ATTRS {
        return None;
    }
    Some(AttrInfo {
        channel: EegChannel::ALL[index / ATTRS_PER_CHANNEL],
        level: (index % ATTRS_PER_CHANNEL) / STATS_PER_LEVEL + 1,
        stat: index % STATS_PER_LEVEL,
    })
}

/// Parses `ARG<n>`.
pub fn parse_attr_name(name: &str) -> Option<usize> {
    name.strip_prefix("ARG")?.parse().ok()
}

pub fn attr_name(index: usize) -> String {
    format!("ARG{index}")
}

/// Rows of real attributes with per-row window indices and optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub attr_names: Vec<String>,
    pub window_index: Vec<usize>,
    pub labels: Option<Vec<u8>>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>, attr_names: Vec<String>, window_index: Vec<usize>) -> Result<Self> {
        let fm = FeatureMatrix {
            rows,
            attr_names,
            window_index,
            labels: None,
        };
        fm.validate()?;
        Ok(fm)
    }

    pub fn validate(&self) -> Result<()> {
        let width = self.attr_names.len();
        if let Some(i) = self.rows.iter().position(|r| r.len() != width) {
            return Err(Error::invalid(format!(
                "row {i} has {} values, expected {width}",
                self.rows[i].len()
            )));
        }
        if self.window_index.len() != self.rows.len() {
            return Err(Error::invalid("window_index length differs from row count"));
        }
        if let Some(l) = &self.labels {
            if l.len() != self.rows.len() {
                return Err(Error::invalid("label count differs from row count"));
            }
        }
        if self.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.attr_names.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Keeps rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            attr_names: self.attr_names.clone(),
            window_index: indices.iter().map(|&i| self.window_index[i]).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Writes `window_index`, the attributes, then `label` when present.
    /// Values carry 9 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["window_index".to_string()];
        header.extend(self.attr_names.iter().cloned());
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.window_index[i].to_string());
            rec.extend(row.iter().map(|v| format!("{v:.8e}")));
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let wi = header.iter().position(|h| h == "window_index");
        let li = header.iter().position(|h| h == "label");
        let attr_cols: Vec<usize> = (0..header.len()).filter(|&i| Some(i) != wi && Some(i) != li).collect();
        let attr_names = attr_cols.iter().map(|&i| header[i].clone()).collect();
        let mut rows = Vec::new();
        let mut window_index = Vec::new();
        let mut labels = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Csv(format!("line {line}, column {}: not a number", header[i])))
            };
            rows.push(attr_cols.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?);
            window_index.push(match wi {
                Some(i) => num(i)? as usize,
                None => n,
            });
            if let Some(i) = li {
                let v = num(i)?;
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Csv(format!("line {line}: label must be 0 or 1")));
                }
                labels.push(v as u8);
            }
        }
        let fm = FeatureMatrix {
            rows,
            attr_names,
            window_index,
            labels: li.map(|_| labels),
        };
        fm.validate()?;
        Ok(fm)
    }
}

/// Five summary statistics of one coefficient segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    pub average: f64,
    /// Population standard deviation.
    pub sd: f64,
    /// Fisher-Pearson skewness `m3 / m2^1.5`; 0 when `m2 < 1e-12`.
    pub symmetry: f64,
    /// Mean squared coefficient.
    pub psd: f64,
    pub curve_length: f64,
}

impl SegmentStats {
    pub fn as_array(&self) -> [f64; STATS_PER_LEVEL] {
        [self.average, self.sd, self.symmetry, self.psd, self.curve_length]
    }
}

pub fn segment_stats(seg: &[f64]) -> Result<SegmentStats> {
    if seg.len() < 2 {
        return Err(Error::invalid(format!("segment of length {} is too short", seg.len())));
    }
    let n = seg.len() as f64;
    let average = seg.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut sq) = (0.0, 0.0, 0.0);
    for &v in seg {
        let d = v - average;
        m2 += d * d;
        m3 += d * d * d;
        sq += v * v;
    }
    m2 /= n;
    m3 /= n;
    let symmetry = if m2 < 1e-12 { 0.0 } else { m3 / m2.powf(1.5) };
    let curve_length = seg.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(SegmentStats {
        average,
        sd: m2.sqrt(),
        symmetry,
        psd: sq / n,
        curve_length,
    })
}

/// Splits level-`level` coefficients into consecutive windows of
/// `window_s * base_rate_hz / 2^level` coefficients, dropping any tail.
pub fn window_partition(coeffs: &[f64], level: usize, window_s: f64, base_rate_hz: f64) -> Result<Vec<&[f64]>> {
    let exact = window_s * base_rate_hz / (1u64 << level) as f64;
    let seg_len = exact.round();
    if (exact - seg_len).abs() > 1e-9 || seg_len < 2.0 {
        return Err(Error::invalid(format!(
            "level {level}: window of {window_s} s at {base_rate_hz} Hz gives {exact} coefficients per segment (need an integer >= 2)"
        )));
    }
    Ok(coeffs.chunks_exact(seg_len as usize).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    pub window_s: f64,
    pub wavelet: String,
    pub boundary: Boundary,
    /// Rate every channel is resampled to before decomposition.
    pub resample_hz: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            window_s: 2.0,
            wavelet: "db4".into(),
            boundary: Boundary::Periodic,
            resample_hz: BASE_RATE_HZ,
        }
    }
}

/// Builds the 75-column table from a recording holding exactly the central,
/// FP1 and O1 channels at `opts.resample_hz`.
pub fn build_feature_matrix(rec: &Recording, w: &WaveletSpec, opts: &FeatureOptions) -> Result<FeatureMatrix> {
    let mut by_slot: [Option<&crate::signal::Channel>; N_CHANNELS] = [None; N_CHANNELS];
    for c in &rec.channels {
        let slot = EegChannel::from_label(&c.label)
            .ok_or_else(|| Error::invalid(format!("unexpected channel {:?}", c.label)))?;
        if by_slot[slot.index()].replace(c).is_some() {
            return Err(Error::invalid(format!("more than one {} channel", slot.name())));
        }
        if c.rate_hz != opts.resample_hz {
            return Err(Error::invalid(format!(
                "channel {} is at {} Hz, expected {} Hz",
                c.label, c.rate_hz, opts.resample_hz
            )));
        }
    }
    let channels: Vec<_> = by_slot
        .iter()
        .zip(EegChannel::ALL)
        .map(|(c, slot)| c.ok_or_else(|| Error::invalid(format!("missing {} channel", slot.name()))))
        .collect::<Result<_>>()?;

    // stats[channel][level] = per-window statistics
    let mut stats: Vec<Vec<Vec<SegmentStats>>> = Vec::with_capacity(N_CHANNELS);
    for c in &channels {
        let dec = dwt_multilevel(&c.samples, LEVELS, w, opts.boundary)?;
        let mut per_level = Vec::with_capacity(LEVELS);
        for (l, coeffs) in dec.details.iter().enumerate() {
            let segs = window_partition(coeffs, l + 1, opts.window_s, opts.resample_hz)?;
            per_level.push(segs.into_iter().map(segment_stats).collect::<Result<Vec<_>>>()?);
        }
        stats.push(per_level);
    }
    let n_windows = stats.iter().flatten().map(Vec::len).min().unwrap_or(0);
    if n_windows == 0 {
        return Err(Error::invalid("recording is shorter than one window"));
    }
    let rows = (0..n_windows)
        .map(|k| {
            let mut row = Vec::with_capacity(N_ATTRS);
            for per_level in &stats {
                for level in per_level {
                    row.extend_from_slice(&level[k].as_array());
                }
            }
            row
        })
        .collect();
    FeatureMatrix::new(rows, (0..N_ATTRS).map(attr_name).collect(), (0..n_windows).collect())
}

/// Selects the 25 columns of one channel from a canonical 75-column table.
pub fn channel_filter(fm: &FeatureMatrix, channel: EegChannel) -> Result<FeatureMatrix> {
    let canonical = fm.n_cols() == N_ATTRS
        && fm
            .attr_names
            .iter()
            .enumerate()
            .all(|(i, n)| parse_attr_name(n) == Some(i));
    if !canonical {
        return Err(Error::invalid(format!(
            "channel filter needs the canonical {N_ATTRS}-column table, got {} columns",
            fm.n_cols()
        )));
    }
    let start = channel.index() * ATTRS_PER_CHANNEL;
    let cols = start..start + ATTRS_PER_CHANNEL;
    Ok(FeatureMatrix {
        rows: fm.rows.iter().map(|r| r[cols.clone()].to_vec()).collect(),
        attr_names: fm.attr_names[cols].to_vec(),
        window_index: fm.window_index.clone(),
        labels: fm.labels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Moments computed directly from their definitions.
    fn moment_oracle(seg: &[f64]) -> (f64, f64, f64) {
        let n = seg.len() as f64;
        let mean = seg.iter().sum::<f64>() / n;
        let m = |p: i32| seg.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
        (mean, m(2), m(3))
    }

    #[test]
    fn constant_segment() {
        let s = segment_stats(&[2.5; 8]).unwrap();
        assert_eq!(s.as_array(), [2.5, 0.0, 0.0, 6.25, 0.0]);
    }

    #[test]
    fn alternating_segment() {
        let s = segment_stats(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(s.as_array(), [0.0, 1.0, 0.0, 1.0, 6.0]);
    }

    #[test]
    fn skewed_segment() {
        let seg = [0.0, 1.0, 0.0, 0.0];
        let (_, m2, m3) = moment_oracle(&seg);
        assert!((m2 - 3.0 / 16.0).abs() < 1e-15);
        assert!((m3 - 3.0 / 32.0).abs() < 1e-15);
        let s = segment_stats(&seg).unwrap();
        assert!((s.symmetry - 1.154_700_538_379_251_5).abs() < 1e-12);
        assert!((s.symmetry - m3 / m2.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn short_segment() {
        assert!(segment_stats(&[1.0]).is_err());
    }

    #[test]
    fn partition_lengths() {
        let level1 = vec![0.0; 460_800 / 2];
        let segs = window_partition(&level1, 1, 2.0, 256.0).unwrap();
        assert_eq!(segs.len(), 900);
        assert!(segs.iter().all(|s| s.len() == 256));
        let level5 = vec![0.0; 460_800 / 32];
        let segs = window_partition(&level5, 5, 2.0, 256.0).unwrap();
        assert_eq!(segs.len(), 900);
        assert_eq!(segs[0].len(), 16);
        let extra = vec![0.0; 901 * 16 + 5];
        assert_eq!(window_partition(&extra, 5, 2.0, 256.0).unwrap().len(), 901);
        assert!(window_partition(&level5, 5, 0.1, 256.0).is_err());
    }

    #[test]
    fn table_layout() {
        assert_eq!(attr_index(EegChannel::Central, 3, 1), 11);
        assert_eq!(attr_index(EegChannel::O1, 1, 4), 54);
        let info = attr_info(54).unwrap();
        assert_eq!((info.channel, info.level, STAT_NAMES[info.stat]), (EegChannel::O1, 1, "Curve Length"));
        for i in 0..N_ATTRS {
            let a = attr_info(i).unwrap();
            assert_eq!(attr_index(a.channel, a.level, a.stat), i);
        }
        assert!(attr_info(75).is_none());
    }

    #[test]
    fn channel_labels() {
        assert_eq!(EegChannel::from_label("EEG Cz-A1"), Some(EegChannel::Central));
        assert_eq!(EegChannel::from_label("C3-A1"), Some(EegChannel::Central));
        assert_eq!(EegChannel::from_label("FP1-A1"), Some(EegChannel::Fp1));
        assert_eq!(EegChannel::from_label("O1-A1"), Some(EegChannel::O1));
        assert_eq!(EegChannel::from_label("EOG"), None);
    }

    fn canonical(n_rows: usize) -> FeatureMatrix {
        let rows = (0..n_rows).map(|r| (0..N_ATTRS).map(|c| (r * 100 + c) as f64).collect()).collect();
        FeatureMatrix::new(rows, (0..N_ATTRS).map(attr_name).collect(), (0..n_rows).collect()).unwrap()
    }

    #[test]
    fn channel_filter_columns() {
        let fm = canonical(3);
        let c = channel_filter(&fm, EegChannel::Central).unwrap();
        assert_eq!(c.n_cols(), 25);
        assert_eq!(c.attr_names[0], "ARG0");
        assert_eq!(c.attr_names[24], "ARG24");
        let f = channel_filter(&fm, EegChannel::Fp1).unwrap();
        assert_eq!(f.attr_names[0], "ARG25");
        assert_eq!(f.rows[1][0], 125.0);
        assert_eq!(channel_filter(&fm, EegChannel::O1).unwrap().attr_names[24], "ARG74");
        assert!(channel_filter(&c, EegChannel::Central).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut fm = canonical(4);
        fm.rows[2][7] = -1.234_567_891_2e-7;
        fm.labels = Some(vec![0, 1, 1, 0]);
        let mut buf = Vec::new();
        fm.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("window_index,ARG0,ARG1"));
        assert!(text.lines().next().unwrap().ends_with(",ARG74,label"));
        let back = FeatureMatrix::read_csv(&buf[..]).unwrap();
        assert_eq!(back.labels, fm.labels);
        assert_eq!(back.attr_names, fm.attr_names);
        assert!((back.rows[2][7] - fm.rows[2][7]).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn scaling_law(seg in prop::collection::vec(-50.0f64..50.0, 2..64), alpha in 0.01f64..100.0) {
            let s = segment_stats(&seg).unwrap();
            let scaled: Vec<f64> = seg.iter().map(|v| alpha * v).collect();
            let t = segment_stats(&scaled).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
            prop_assert!(close(t.average, alpha * s.average));
            prop_assert!(close(t.sd, alpha * s.sd));
            prop_assert!(close(t.curve_length, alpha * s.curve_length));
            prop_assert!(close(t.psd, alpha * alpha * s.psd));
            if s.sd > 1e-3 {
                prop_assert!(close(t.symmetry, s.symmetry));
            }
        }

        #[test]
        fn stats_match_moment_oracle(seg in prop::collection::vec(-10.0f64..10.0, 2..40)) {
            let s = segment_stats(&seg).unwrap();
            let (mean, m2, m3) = moment_oracle(&seg);
            prop_assert!((s.average - mean).abs() < 1e-12);
            prop_assert!((s.sd - m2.sqrt()).abs() < 1e-9);
            if m2 >= 1e-12 {
                prop_assert!((s.symmetry - m3 / m2.powf(1.5)).abs() < 1e-6);
            }
        }
    }
}
