//! Audio onset and motion beat extraction.
//!
//! Audio beats are peaks of the positive first difference of a short-window
//! RMS envelope. Motion beats are local minima of mean joint speed.

use std::fmt::Write as _;

use thiserror::Error;

use crate::motion::{JointGroup, JointPartition, PositionTrack};

#[derive(Debug, Error, PartialEq)]
pub enum BeatError {
    #[error("window of {window_s} s is shorter than one sample at {sample_rate} Hz")]
    WindowTooShort { window_s: f64, sample_rate: u32 },
    #[error("envelope is empty")]
    EmptyEnvelope,
    #[error("joint subset is empty")]
    NoJoints,
    #[error("beat times must be finite, non-negative and strictly increasing")]
    NotIncreasing,
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, BeatError>;

/// Strictly increasing event times in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeatSequence {
    times: Vec<f64>,
}

impl BeatSequence {
    pub fn new(times: Vec<f64>) -> Result<BeatSequence> {
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BeatError::NotIncreasing);
        }
        Ok(BeatSequence { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_seconds\n");
        for b in &self.times {
            let _ = writeln!(out, "{b:.6}");
        }
        out
    }

    /// Reads a one-column CSV with a `t_seconds` header.
    pub fn from_csv(text: &str) -> Result<BeatSequence> {
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line == "t_seconds") {
                continue;
            }
            let t = line
                .split(',')
                .next()
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|_| BeatError::Invalid(format!("line {}: `{line}` is not a time", i + 1)))?;
            times.push(t);
        }
        BeatSequence::new(times)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        EnvelopeParams {
            window_s: 0.05,
            hop_s: 1.0 / 30.0,
        }
    }
}

/// Per-hop RMS amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub hop: f64,
    pub values: Vec<f64>,
}

/// RMS over `[k·hop, k·hop + window)` for every hop start inside the signal.
/// Samples past the end count as zeros.
pub fn rms_envelope(samples: &[f64], sample_rate: u32, params: EnvelopeParams) -> Result<Envelope> {
    if sample_rate == 0 {
        return Err(BeatError::Invalid("sample rate must be positive".into()));
    }
    if !(params.hop_s > 0.0) || !(params.window_s >= params.hop_s) {
        return Err(BeatError::Invalid(format!(
            "need window >= hop > 0, got window {} hop {}",
            params.window_s, params.hop_s
        )));
    }
    let rate = sample_rate as f64;
    let window = (params.window_s * rate).round() as usize;
    if window < 1 {
        return Err(BeatError::WindowTooShort {
            window_s: params.window_s,
            sample_rate,
        });
    }
    let count = (samples.len() as f64 / (params.hop_s * rate)).ceil() as usize;
    let values = (0..count)
        .map(|k| {
            let start = (k as f64 * params.hop_s * rate).round() as usize;
            let sq: f64 = samples.iter().skip(start).take(window).map(|x| x * x).sum();
            (sq / window as f64).sqrt()
        })
        .collect();
    Ok(Envelope {
        hop: params.hop_s,
        values,
    })
}

/// Onset strength: `max(0, e[k] − e[k−1])`, with `e[−1] = 0`.
pub fn onset_strength(envelope: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    envelope
        .iter()
        .map(|&e| {
            let d = (e - prev).max(0.0);
            prev = e;
            d
        })
        .collect()
}

pub const DEFAULT_ONSET_THRESHOLD: f64 = 0.3;

/// Onsets: local maxima of the positive envelope delta that reach
/// `threshold × max(delta)`.
pub fn audio_beats(envelope: &Envelope, threshold: f64) -> Result<BeatSequence> {
    if envelope.values.is_empty() {
        return Err(BeatError::EmptyEnvelope);
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(BeatError::Invalid(format!("onset threshold {threshold} outside (0, 1]")));
    }
    let p = onset_strength(&envelope.values);
    let peak = p.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(BeatSequence::default());
    }
    let floor = threshold * peak;
    let mut times = Vec::new();
    for k in 0..p.len() {
        let before = if k == 0 { 0.0 } else { p[k - 1] };
        let after = p.get(k + 1).copied().unwrap_or(0.0);
        if p[k] > 0.0 && p[k] > before && p[k] >= after && p[k] >= floor {
            times.push(k as f64 * envelope.hop);
        }
    }
    BeatSequence::new(times)
}

/// Envelope and onset picking in one step.
pub fn detect_audio_beats(
    samples: &[f64],
    sample_rate: u32,
    params: EnvelopeParams,
    threshold: f64,
) -> Result<BeatSequence> {
    audio_beats(&rms_envelope(samples, sample_rate, params)?, threshold)
}

/// Mean per-joint speed in units per second. `v[0]` repeats `v[1]`.
pub fn motion_velocity(positions: &PositionTrack, joints: &[usize]) -> Result<Vec<f64>> {
    if joints.is_empty() {
        return Err(BeatError::NoJoints);
    }
    let t = positions.num_frames();
    if t < 2 {
        return Err(BeatError::Invalid(format!("need at least 2 frames, got {t}")));
    }
    if let Some(&j) = joints.iter().find(|&&j| j >= positions.num_joints()) {
        return Err(BeatError::Invalid(format!("joint {j} out of range")));
    }
    let mut v = vec![0.0; t];
    for i in 1..t {
        let sum: f64 = joints
            .iter()
            .map(|&j| {
                let a = positions.position(i, j);
                let b = positions.position(i - 1, j);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            })
            .sum();
        v[i] = sum / joints.len() as f64 * positions.fps();
    }
    v[0] = v[1];
    Ok(v)
}

/// Speed minima: `v[t] < v[t−1]` and `v[t] ≤ v[t+1]`, so a plateau yields
/// its first frame.
pub fn motion_beats(velocity: &[f64], fps: f64) -> BeatSequence {
    let times = (1..velocity.len().saturating_sub(1))
        .filter(|&t| velocity[t] < velocity[t - 1] && velocity[t] <= velocity[t + 1])
        .map(|t| t as f64 / fps)
        .collect();
    BeatSequence { times }
}

/// Motion beats of one joint group.
pub fn group_motion_beats(
    positions: &PositionTrack,
    partition: &JointPartition,
    group: JointGroup,
) -> Result<BeatSequence> {
    let v = motion_velocity(positions, &partition.joints(group))?;
    Ok(motion_beats(&v, positions.fps()))
}
