use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MotionError, Result};

/// The 52 ARKit/FACS blendshape channels, in canonical order.
pub const BLENDSHAPE_NAMES: [&str; 52] = [
    "eyeBlinkLeft",
    "eyeLookDownLeft",
    "eyeLookInLeft",
    "eyeLookOutLeft",
    "eyeLookUpLeft",
    "eyeSquintLeft",
    "eyeWideLeft",
    "eyeBlinkRight",
    "eyeLookDownRight",
    "eyeLookInRight",
    "eyeLookOutRight",
    "eyeLookUpRight",
    "eyeSquintRight",
    "eyeWideRight",
    "jawForward",
    "jawLeft",
    "jawRight",
    "jawOpen",
    "mouthClose",
    "mouthFunnel",
    "mouthPucker",
    "mouthLeft",
    "mouthRight",
    "mouthSmileLeft",
    "mouthSmileRight",
    "mouthFrownLeft",
    "mouthFrownRight",
    "mouthDimpleLeft",
    "mouthDimpleRight",
    "mouthStretchLeft",
    "mouthStretchRight",
    "mouthRollLower",
    "mouthRollUpper",
    "mouthShrugLower",
    "mouthShrugUpper",
    "mouthPressLeft",
    "mouthPressRight",
    "mouthLowerDownLeft",
    "mouthLowerDownRight",
    "mouthUpperUpLeft",
    "mouthUpperUpRight",
    "browDownLeft",
    "browDownRight",
    "browInnerUp",
    "browOuterUpLeft",
    "browOuterUpRight",
    "cheekPuff",
    "cheekSquintLeft",
    "cheekSquintRight",
    "noseSneerLeft",
    "noseSneerRight",
    "tongueOut",
];

/// Facial blendshape weights, `T × 52`, each in `[0, 1]`, columns in
/// [`BLENDSHAPE_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendshapeTrack {
    fps: f64,
    data: Vec<f64>,
}

impl BlendshapeTrack {
    pub const CHANNELS: usize = 52;

    /// Builds a track from row-major weights; values outside `[0, 1]` are clamped.
    pub fn from_flat(fps: f64, mut data: Vec<f64>) -> Result<BlendshapeTrack> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(MotionError::Invalid(format!("fps must be positive, got {fps}")));
        }
        if data.len() % Self::CHANNELS != 0 {
            return Err(MotionError::Invalid("blendshape rows must have 52 weights".into()));
        }
        if data.iter().any(|w| !w.is_finite()) {
            return Err(MotionError::Invalid("non-finite blendshape weight".into()));
        }
        data.iter_mut().for_each(|w| *w = w.clamp(0.0, 1.0));
        Ok(BlendshapeTrack { fps, data })
    }

    pub fn neutral(fps: f64, frames: usize) -> BlendshapeTrack {
        BlendshapeTrack {
            fps,
            data: vec![0.0; frames * Self::CHANNELS],
        }
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn num_channels(&self) -> usize {
        Self::CHANNELS
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / Self::CHANNELS
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * Self::CHANNELS..(t + 1) * Self::CHANNELS]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    fps: f64,
    channels: BTreeMap<String, Vec<f64>>,
}

/// A parsed track plus the number of weights that had to be clamped into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedBlendshapes {
    pub track: BlendshapeTrack,
    pub clamped: usize,
}

/// Parses `{"fps": .., "channels": {"eyeBlinkLeft": [..], ...}}`.
pub fn parse_blendshapes(json: &str) -> Result<ParsedBlendshapes> {
    let doc: Document = serde_json::from_str(json)?;
    if let Some(unknown) = doc
        .channels
        .keys()
        .find(|name| !BLENDSHAPE_NAMES.contains(&name.as_str()))
    {
        return Err(MotionError::Invalid(format!("unknown blendshape channel `{unknown}`")));
    }
    let mut columns = Vec::with_capacity(BLENDSHAPE_NAMES.len());
    for name in BLENDSHAPE_NAMES {
        let column = doc
            .channels
            .get(name)
            .ok_or_else(|| MotionError::MissingChannel(name.to_string()))?;
        columns.push(column);
    }
    let frames = columns[0].len();
    if let Some((i, col)) = columns.iter().enumerate().find(|(_, c)| c.len() != frames) {
        return Err(MotionError::Invalid(format!(
            "ragged blendshape arrays: `{}` has {} frames, `{}` has {frames}",
            BLENDSHAPE_NAMES[i],
            col.len(),
            BLENDSHAPE_NAMES[0]
        )));
    }
    let mut data = Vec::with_capacity(frames * BLENDSHAPE_NAMES.len());
    for t in 0..frames {
        data.extend(columns.iter().map(|c| c[t]));
    }
    let clamped = data.iter().filter(|w| !(0.0..=1.0).contains(*w)).count();
    if clamped > 0 {
        log::warn!("clamped {clamped} blendshape weights into [0, 1]");
    }
    Ok(ParsedBlendshapes {
        track: BlendshapeTrack::from_flat(doc.fps, data)?,
        clamped,
    })
}

pub fn write_blendshapes(track: &BlendshapeTrack) -> String {
    let channels = BLENDSHAPE_NAMES
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let column = (0..track.num_frames()).map(|t| track.frame(t)[c]).collect();
            (name.to_string(), column)
        })
        .collect();
    let doc = Document {
        fps: track.fps(),
        channels,
    };
    serde_json::to_string(&doc).expect("plain numeric document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn document(frames: usize, fill: impl Fn(usize, usize) -> f64, skip: Option<&str>) -> String {
        let channels: BTreeMap<String, Vec<f64>> = BLENDSHAPE_NAMES
            .iter()
            .enumerate()
            .filter(|(_, n)| Some(**n) != skip)
            .map(|(c, n)| (n.to_string(), (0..frames).map(|t| fill(t, c)).collect()))
            .collect();
        serde_json::json!({ "fps": 60.0, "channels": channels }).to_string()
    }

    #[test]
    fn fifty_two_distinct_names() {
        let mut names = BLENDSHAPE_NAMES.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 52);
    }

    #[test]
    fn neutral_face() {
        let parsed = parse_blendshapes(&document(10, |_, _| 0.0, None)).unwrap();
        assert_eq!(parsed.track.num_frames(), 10);
        assert_eq!(parsed.clamped, 0);
        assert!(parsed.track.as_flat().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn clamps_and_counts() {
        let doc = document(3, |t, c| if t == 1 && c == 5 { 1.2 } else { 0.5 }, None);
        let parsed = parse_blendshapes(&doc).unwrap();
        assert_eq!(parsed.clamped, 1);
        assert_eq!(parsed.track.frame(1)[5], 1.0);
    }

    #[test]
    fn missing_channel_is_named() {
        let err = parse_blendshapes(&document(2, |_, _| 0.0, Some("jawOpen"))).unwrap_err();
        assert!(matches!(err, MotionError::MissingChannel(ref n) if n == "jawOpen"));
        assert!(err.to_string().contains("jawOpen"));
    }

    #[test]
    fn ragged_arrays_rejected() {
        let doc = document(2, |_, _| 0.0, None).replacen("[0.0,0.0]", "[0.0]", 1);
        assert!(matches!(parse_blendshapes(&doc), Err(MotionError::Invalid(_))));
    }

    #[test]
    fn writer_round_trips() {
        let parsed = parse_blendshapes(&document(4, |t, c| ((t * 52 + c) % 10) as f64 / 10.0, None)).unwrap();
        let again = parse_blendshapes(&write_blendshapes(&parsed.track)).unwrap();
        assert_eq!(again.track, parsed.track);
    }
}
