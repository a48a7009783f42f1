use std::str::FromStr;

use super::{Joint, RotationOrder};

pub const BODY_JOINTS: usize = 27;
pub const HAND_JOINTS: usize = 48;

const FINGERS: [&str; 5] = ["Thumb", "Index", "Middle", "Ring", "Pinky"];

/// Which joints a computation should look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JointGroup {
    #[default]
    Body,
    Hands,
    All,
}

impl FromStr for JointGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "body" => Ok(JointGroup::Body),
            "hands" => Ok(JointGroup::Hands),
            "all" => Ok(JointGroup::All),
            other => Err(format!("unknown joint group `{other}` (body|hands|all)")),
        }
    }
}

/// Body/hand split of a skeleton's non-root joints. Finger joints are hands,
/// everything else below the root is body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointPartition {
    pub body: Vec<usize>,
    pub hands: Vec<usize>,
    total: usize,
}

impl JointPartition {
    pub fn from_skeleton(skeleton: &[Joint]) -> JointPartition {
        let mut body = Vec::new();
        let mut hands = Vec::new();
        for (i, joint) in skeleton.iter().enumerate().skip(1) {
            if FINGERS.iter().any(|f| joint.name.contains(f)) {
                hands.push(i);
            } else {
                body.push(i);
            }
        }
        JointPartition {
            body,
            hands,
            total: skeleton.len(),
        }
    }

    pub fn joints(&self, group: JointGroup) -> Vec<usize> {
        match group {
            JointGroup::Body => self.body.clone(),
            JointGroup::Hands => self.hands.clone(),
            JointGroup::All => (0..self.total).collect(),
        }
    }

    /// True for the 27 body / 48 hand layout the gesture model expects.
    pub fn is_beat_layout(&self) -> bool {
        self.body.len() == BODY_JOINTS && self.hands.len() == HAND_JOINTS
    }
}

fn push(skeleton: &mut Vec<Joint>, name: String, parent: usize, offset: [f64; 3]) -> usize {
    skeleton.push(Joint::child(name, parent, offset, RotationOrder::ZXY));
    skeleton.len() - 1
}

fn add_hand(skeleton: &mut Vec<Joint>, side: &str, wrist: usize, sign: f64) {
    for (f, finger) in FINGERS.iter().enumerate() {
        let spread = (f as f64 - 2.0) * 1.5;
        let (first, segments) = if *finger == "Thumb" { (1, 4) } else { (0, 5) };
        let mut parent = wrist;
        for k in first..first + segments {
            let offset = if k == first {
                [sign * 3.0, 0.0, spread]
            } else {
                [sign * 2.5, 0.0, 0.0]
            };
            parent = push(skeleton, format!("{side}Hand{finger}{k}"), parent, offset);
        }
    }
}

fn add_arm(skeleton: &mut Vec<Joint>, side: &str, chest: usize, sign: f64) {
    let shoulder = push(skeleton, format!("{side}Shoulder"), chest, [sign * 4.0, 8.0, 0.0]);
    let arm = push(skeleton, format!("{side}Arm"), shoulder, [sign * 14.0, 0.0, 0.0]);
    let forearm = push(skeleton, format!("{side}Arm1"), arm, [sign * 28.0, 0.0, 0.0]);
    let hand = push(skeleton, format!("{side}Hand"), forearm, [sign * 25.0, 0.0, 0.0]);
    add_hand(skeleton, side, hand, sign);
}

fn add_leg(skeleton: &mut Vec<Joint>, side: &str, hips: usize, sign: f64) {
    let up = push(skeleton, format!("{side}UpLeg"), hips, [sign * 9.0, 0.0, 0.0]);
    let leg = push(skeleton, format!("{side}Leg"), up, [0.0, -44.0, 0.0]);
    let foot = push(skeleton, format!("{side}Foot"), leg, [0.0, -42.0, 0.0]);
    let foot_f = push(skeleton, format!("{side}FootF"), foot, [0.0, -5.0, 5.0]);
    let toe = push(skeleton, format!("{side}ToeBase"), foot_f, [0.0, -3.0, 8.0]);
    push(skeleton, format!("{side}ToeBaseEnd"), toe, [0.0, 0.0, 4.0]);
}

/// A 76-joint capture skeleton (root + 27 body + 48 hand joints), all ZXY.
///
/// Joint names follow the usual mocap convention; offsets are plausible adult
/// proportions in centimeters.
pub fn beat_skeleton() -> Vec<Joint> {
    let mut s = vec![Joint::root("Hips", [0.0, 0.0, 0.0], RotationOrder::ZXY)];
    let spine = push(&mut s, "Spine".into(), 0, [0.0, 10.0, 0.0]);
    let spine1 = push(&mut s, "Spine1".into(), spine, [0.0, 10.0, 0.0]);
    let spine2 = push(&mut s, "Spine2".into(), spine1, [0.0, 10.0, 0.0]);
    let spine3 = push(&mut s, "Spine3".into(), spine2, [0.0, 10.0, 0.0]);
    let neck = push(&mut s, "Neck".into(), spine3, [0.0, 12.0, 0.0]);
    let neck1 = push(&mut s, "Neck1".into(), neck, [0.0, 5.0, 0.0]);
    push(&mut s, "Head".into(), neck1, [0.0, 6.0, 1.0]);
    add_arm(&mut s, "R", spine3, -1.0);
    add_arm(&mut s, "L", spine3, 1.0);
    add_leg(&mut s, "R", 0, -1.0);
    add_leg(&mut s, "L", 0, 1.0);
    s
}
