//! Motion, facial, audio and transcript formats.
//!
//! Everything here is pure: parsers take text or bytes and return immutable
//! values, so clips can be shared freely across threads.

mod audio;
mod blendshape;
mod bvh;
mod fk;
mod resample;
mod skeleton;
mod textgrid;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use audio::{frame_audio, read_audio, write_wav, AudioTrack};
pub use blendshape::{
    parse_blendshapes, write_blendshapes, BlendshapeTrack, ParsedBlendshapes, BLENDSHAPE_NAMES,
};
pub use bvh::{parse_bvh, write_bvh};
pub use fk::{forward_kinematics, positions_to_csv, PositionTrack, RotationMode};
pub use resample::Resample;
pub use skeleton::{beat_skeleton, JointGroup, JointPartition, BODY_JOINTS, HAND_JOINTS};
pub use textgrid::{frame_words, parse_textgrid, write_textgrid, AlignedTranscript, Token, WordInterval};

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid motion data: {0}")]
    Invalid(String),
    #[error("unknown rotation order `{0}`")]
    UnknownRotationOrder(String),
    #[error("missing blendshape channel `{0}`")]
    MissingChannel(String),
    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),
    #[error("truncated audio file")]
    TruncatedAudio,
    #[error("no word tier in TextGrid")]
    NoWordTier,
    #[error("intervals {first} and {second} overlap")]
    OverlappingIntervals { first: usize, second: usize },
    #[error("interval {index} starts before interval {previous}")]
    UnsortedIntervals { previous: usize, index: usize },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MotionError>;

pub(crate) fn parse_err(line: usize, message: impl Into<String>) -> MotionError {
    MotionError::Parse {
        line,
        message: message.into(),
    }
}

/// One BVH channel label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrotation | Channel::Yrotation | Channel::Zrotation)
    }

    pub fn is_position(self) -> bool {
        !self.is_rotation()
    }

    pub fn axis(self) -> Axis {
        match self {
            Channel::Xposition | Channel::Xrotation => Axis::X,
            Channel::Yposition | Channel::Yrotation => Axis::Y,
            Channel::Zposition | Channel::Zrotation => Axis::Z,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        };
        f.write_str(s)
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xposition" => Ok(Channel::Xposition),
            "yposition" => Ok(Channel::Yposition),
            "zposition" => Ok(Channel::Zposition),
            "xrotation" => Ok(Channel::Xrotation),
            "yrotation" => Ok(Channel::Yrotation),
            "zrotation" => Ok(Channel::Zrotation),
            _ => Err(format!("unknown channel `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Euler composition order, outermost rotation first (`ZXY` means `Rz * Rx * Ry`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RotationOrder(pub [Axis; 3]);

impl RotationOrder {
    pub const ZXY: RotationOrder = RotationOrder([Axis::Z, Axis::X, Axis::Y]);
    pub const XYZ: RotationOrder = RotationOrder([Axis::X, Axis::Y, Axis::Z]);
    pub const ZYX: RotationOrder = RotationOrder([Axis::Z, Axis::Y, Axis::X]);

    pub fn channels(self) -> [Channel; 3] {
        self.0.map(|axis| match axis {
            Axis::X => Channel::Xrotation,
            Axis::Y => Channel::Yrotation,
            Axis::Z => Channel::Zrotation,
        })
    }
}

impl Default for RotationOrder {
    fn default() -> Self {
        RotationOrder::ZXY
    }
}

impl FromStr for RotationOrder {
    type Err = MotionError;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        let axes: Vec<Axis> = upper
            .chars()
            .map(|c| match c {
                'X' => Some(Axis::X),
                'Y' => Some(Axis::Y),
                'Z' => Some(Axis::Z),
                _ => None,
            })
            .collect::<Option<_>>()
            .ok_or_else(|| MotionError::UnknownRotationOrder(s.to_string()))?;
        match axes.as_slice() {
            [a, b, c] if a != b && b != c && a != c => Ok(RotationOrder([*a, *b, *c])),
            _ => Err(MotionError::UnknownRotationOrder(s.to_string())),
        }
    }
}

impl fmt::Display for RotationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for axis in self.0 {
            let c = match axis {
                Axis::X => 'X',
                Axis::Y => 'Y',
                Axis::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A skeleton joint. Offsets are in centimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub channels: Vec<Channel>,
    /// Offset of the `End Site` leaf, when the joint has one.
    pub end_site: Option<[f64; 3]>,
}

impl Joint {
    pub fn root(name: impl Into<String>, offset: [f64; 3], order: RotationOrder) -> Joint {
        let mut channels = vec![Channel::Xposition, Channel::Yposition, Channel::Zposition];
        channels.extend(order.channels());
        Joint {
            name: name.into(),
            parent: None,
            offset,
            channels,
            end_site: None,
        }
    }

    pub fn child(
        name: impl Into<String>,
        parent: usize,
        offset: [f64; 3],
        order: RotationOrder,
    ) -> Joint {
        Joint {
            name: name.into(),
            parent: Some(parent),
            offset,
            channels: order.channels().to_vec(),
            end_site: None,
        }
    }

    /// Euler order declared by this joint's rotation channels.
    pub fn rotation_order(&self) -> Option<RotationOrder> {
        let axes: Vec<Axis> = self
            .channels
            .iter()
            .filter(|c| c.is_rotation())
            .map(|c| c.axis())
            .collect();
        match axes.as_slice() {
            [a, b, c] => Some(RotationOrder([*a, *b, *c])),
            _ => None,
        }
    }
}

/// Checks the joint-table invariants shared by the parser and constructors.
pub(crate) fn validate_skeleton(skeleton: &[Joint]) -> Result<()> {
    if skeleton.is_empty() {
        return Err(MotionError::Invalid("skeleton has no joints".into()));
    }
    for (i, joint) in skeleton.iter().enumerate() {
        match joint.parent {
            None if i != 0 => {
                return Err(MotionError::Invalid(format!(
                    "joint `{}` has no parent but is not the root",
                    joint.name
                )))
            }
            Some(_) if i == 0 => {
                return Err(MotionError::Invalid("first joint must be the root".into()))
            }
            Some(p) if p >= i => {
                return Err(MotionError::Invalid(format!(
                    "joint `{}` is not in topological order",
                    joint.name
                )))
            }
            Some(p) if !is_ancestor_or_self(skeleton, p, i - 1) => {
                return Err(MotionError::Invalid(format!(
                    "joint `{}` breaks depth-first joint order",
                    joint.name
                )))
            }
            _ => {}
        }
        let rotations = joint.channels.iter().filter(|c| c.is_rotation()).count();
        let positions = joint.channels.len() - rotations;
        let ok = if i == 0 {
            rotations == 3 && positions == 3
        } else {
            rotations == 3 && positions == 0
        };
        if !ok || joint.rotation_order().is_none() {
            return Err(MotionError::Invalid(format!(
                "joint `{}` has channels {:?}; root needs 3 position + 3 rotation channels, others exactly 3 rotations",
                joint.name, joint.channels
            )));
        }
    }
    Ok(())
}

fn is_ancestor_or_self(skeleton: &[Joint], candidate: usize, mut joint: usize) -> bool {
    loop {
        if joint == candidate {
            return true;
        }
        match skeleton[joint].parent {
            Some(p) => joint = p,
            None => return false,
        }
    }
}

/// Motion capture clip: rotations in degrees, root translation in centimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    skeleton: Vec<Joint>,
    fps: f64,
    channels: usize,
    data: Vec<f64>,
}

impl MotionClip {
    /// `frames` is row-major, one row of `Σ channels` values per frame.
    pub fn new(skeleton: Vec<Joint>, fps: f64, frames: Vec<Vec<f64>>) -> Result<MotionClip> {
        let channels: usize = skeleton.iter().map(|j| j.channels.len()).sum();
        let mut data = Vec::with_capacity(frames.len() * channels);
        for (t, row) in frames.iter().enumerate() {
            if row.len() != channels {
                return Err(MotionError::Invalid(format!(
                    "frame {t} has {} values, expected {channels}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(skeleton, fps, data)
    }

    pub fn from_flat(skeleton: Vec<Joint>, fps: f64, data: Vec<f64>) -> Result<MotionClip> {
        validate_skeleton(&skeleton)?;
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(MotionError::Invalid(format!("fps must be positive, got {fps}")));
        }
        let channels: usize = skeleton.iter().map(|j| j.channels.len()).sum();
        if data.len() % channels != 0 {
            return Err(MotionError::Invalid(format!(
                "{} values is not a whole number of {channels}-channel frames",
                data.len()
            )));
        }
        Ok(MotionClip {
            skeleton,
            fps,
            channels,
            data,
        })
    }

    /// All-zero clip on the given skeleton.
    pub fn zeros(skeleton: Vec<Joint>, fps: f64, frames: usize) -> Result<MotionClip> {
        let channels: usize = skeleton.iter().map(|j| j.channels.len()).sum();
        Self::from_flat(skeleton, fps, vec![0.0; channels * frames])
    }

    pub fn skeleton(&self) -> &[Joint] {
        &self.skeleton
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Index of the first channel belonging to each joint.
    pub fn channel_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.skeleton.len());
        let mut acc = 0;
        for joint in &self.skeleton {
            offsets.push(acc);
            acc += joint.channels.len();
        }
        offsets
    }

    /// Rotation triplets (degrees, in each joint's declared channel order) of the
    /// listed joints for every frame, flattened to `T × 3·len(joints)`.
    pub fn rotations_of(&self, joints: &[usize]) -> Vec<Vec<f64>> {
        let offsets = self.channel_offsets();
        self.frames()
            .map(|row| {
                joints
                    .iter()
                    .flat_map(|&j| {
                        let base = offsets[j];
                        self.skeleton[j]
                            .channels
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| c.is_rotation())
                            .map(move |(k, _)| row[base + k])
                    })
                    .collect()
            })
            .collect()
    }

    /// Copy of this clip with the rotation channels of `joints` replaced by `rotations`
    /// (same layout as [`MotionClip::rotations_of`]).
    pub fn with_rotations(&self, joints: &[usize], rotations: &[Vec<f64>]) -> Result<MotionClip> {
        if rotations.len() != self.num_frames() {
            return Err(MotionError::Invalid(format!(
                "{} rotation rows for a {}-frame clip",
                rotations.len(),
                self.num_frames()
            )));
        }
        let offsets = self.channel_offsets();
        let mut data = self.data.clone();
        for (t, row) in rotations.iter().enumerate() {
            if row.len() != joints.len() * 3 {
                return Err(MotionError::Invalid(format!(
                    "rotation row {t} has {} values, expected {}",
                    row.len(),
                    joints.len() * 3
                )));
            }
            let frame = &mut data[t * self.channels..(t + 1) * self.channels];
            let mut values = row.iter();
            for &j in joints {
                let base = offsets[j];
                for (k, c) in self.skeleton[j].channels.iter().enumerate() {
                    if c.is_rotation() {
                        frame[base + k] = *values.next().expect("length checked above");
                    }
                }
            }
        }
        Ok(MotionClip {
            skeleton: self.skeleton.clone(),
            fps: self.fps,
            channels: self.channels,
            data,
        })
    }

    /// Frames `[start, end)` as a new clip.
    pub fn slice(&self, start: usize, end: usize) -> MotionClip {
        let end = end.min(self.num_frames());
        let start = start.min(end);
        MotionClip {
            skeleton: self.skeleton.clone(),
            fps: self.fps,
            channels: self.channels,
            data: self.data[start * self.channels..end * self.channels].to_vec(),
        }
    }
}
