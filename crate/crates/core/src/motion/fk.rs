use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use super::{Axis, Channel, MotionClip, MotionError, Result, RotationOrder};

/// Global joint positions in centimeters, `T × J × 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionTrack {
    fps: f64,
    joints: usize,
    data: Vec<[f64; 3]>,
}

impl PositionTrack {
    /// `frames[t][j]` is the position of joint `j` at frame `t`.
    pub fn new(fps: f64, frames: Vec<Vec<[f64; 3]>>) -> Result<PositionTrack> {
        let joints = frames.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(frames.len() * joints);
        for (t, row) in frames.into_iter().enumerate() {
            if row.len() != joints {
                return Err(MotionError::Invalid(format!(
                    "frame {t} has {} joints, expected {joints}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_flat(fps, joints, data)
    }

    pub fn from_flat(fps: f64, joints: usize, data: Vec<[f64; 3]>) -> Result<PositionTrack> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(MotionError::Invalid(format!("fps must be positive, got {fps}")));
        }
        if joints == 0 && !data.is_empty() || joints > 0 && data.len() % joints != 0 {
            return Err(MotionError::Invalid("ragged position data".into()));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MotionError::Invalid("non-finite joint position".into()));
        }
        Ok(PositionTrack { fps, joints, data })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn num_joints(&self) -> usize {
        self.joints
    }

    pub fn num_frames(&self) -> usize {
        if self.joints == 0 {
            0
        } else {
            self.data.len() / self.joints
        }
    }

    pub fn frame(&self, t: usize) -> &[[f64; 3]] {
        &self.data[t * self.joints..(t + 1) * self.joints]
    }

    pub fn position(&self, t: usize, joint: usize) -> [f64; 3] {
        self.data[t * self.joints + joint]
    }

    /// Frames `[start, end)` flattened to one vector.
    pub fn flatten_range(&self, start: usize, end: usize) -> Vec<f64> {
        self.data[start * self.joints..end * self.joints]
            .iter()
            .flatten()
            .copied()
            .collect()
    }
}

/// How Euler angles are composed during forward kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationMode {
    /// Use the order in which each joint declares its rotation channels.
    #[default]
    FromChannels,
    /// Force one order for every joint.
    Fixed(RotationOrder),
}

fn axis_rotation(axis: Axis, degrees: f64) -> Matrix3<f64> {
    let (s, c) = degrees.to_radians().sin_cos();
    match axis {
        Axis::X => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Axis::Y => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Axis::Z => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

/// Computes global joint positions.
///
/// The root sits at its translation channels; every other joint sits at its
/// parent's position plus the parent's accumulated rotation applied to the
/// joint's offset.
pub fn forward_kinematics(clip: &MotionClip, mode: RotationMode) -> Result<PositionTrack> {
    let skeleton = clip.skeleton();
    let offsets = clip.channel_offsets();
    let joints = skeleton.len();

    // Per joint: (channel index, axis) in composition order, plus translation slots.
    let mut plans = Vec::with_capacity(joints);
    for (j, joint) in skeleton.iter().enumerate() {
        let base = offsets[j];
        let find = |target: Channel| {
            joint
                .channels
                .iter()
                .position(|&c| c == target)
                .map(|k| base + k)
                .ok_or_else(|| MotionError::Invalid(format!("joint `{}` lacks {target}", joint.name)))
        };
        let order = match mode {
            RotationMode::FromChannels => joint
                .rotation_order()
                .ok_or_else(|| MotionError::Invalid(format!("joint `{}` has no rotation order", joint.name)))?,
            RotationMode::Fixed(order) => order,
        };
        let mut rotation = Vec::with_capacity(3);
        for channel in order.channels() {
            rotation.push((find(channel)?, channel.axis()));
        }
        let translation = if joint.parent.is_none() {
            Some([
                find(Channel::Xposition)?,
                find(Channel::Yposition)?,
                find(Channel::Zposition)?,
            ])
        } else {
            None
        };
        plans.push((rotation, translation));
    }

    let mut data = Vec::with_capacity(clip.num_frames() * joints);
    let mut global_rot = vec![Matrix3::identity(); joints];
    let mut global_pos = vec![Vector3::zeros(); joints];
    for row in clip.frames() {
        for (j, joint) in skeleton.iter().enumerate() {
            let (rotation, translation) = &plans[j];
            let local = rotation
                .iter()
                .fold(Matrix3::identity(), |acc, &(idx, axis)| acc * axis_rotation(axis, row[idx]));
            match (joint.parent, translation) {
                (Some(p), _) => {
                    let offset = Vector3::from(joint.offset);
                    global_pos[j] = global_pos[p] + global_rot[p] * offset;
                    global_rot[j] = global_rot[p] * local;
                }
                (None, Some([x, y, z])) => {
                    global_pos[j] = Vector3::new(row[*x], row[*y], row[*z]);
                    global_rot[j] = local;
                }
                (None, None) => unreachable!("root always has translation channels"),
            }
            data.push([global_pos[j].x, global_pos[j].y, global_pos[j].z]);
        }
    }
    PositionTrack::from_flat(clip.fps(), joints, data)
}

/// CSV with columns `t,joint,x,y,z`, one row per joint per frame.
pub fn positions_to_csv(track: &PositionTrack, joint_names: &[String]) -> String {
    let mut out = String::from("t,joint,x,y,z\n");
    for t in 0..track.num_frames() {
        let time = t as f64 / track.fps();
        for (j, p) in track.frame(t).iter().enumerate() {
            let name = joint_names.get(j).map_or_else(|| j.to_string(), Clone::clone);
            let _ = writeln!(out, "{time:.6},{name},{:.6},{:.6},{:.6}", p[0], p[1], p[2]);
        }
    }
    out
}
