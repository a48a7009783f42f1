use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{CamnError, Result};

/// An input stream that can be removed for ablation runs. `Semantic` drops
/// the relevance weighting rather than an encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Audio,
    Face,
    Emotion,
    Id,
    Semantic,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Text,
        Modality::Audio,
        Modality::Face,
        Modality::Emotion,
        Modality::Id,
        Modality::Semantic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Audio => "audio",
            Modality::Face => "face",
            Modality::Emotion => "emotion",
            Modality::Id => "id",
            Modality::Semantic => "semantic",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = CamnError;

    fn from_str(s: &str) -> Result<Modality> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| CamnError::Config(format!("unknown modality `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamnConfig {
    /// Half-width `f` of the temporal context each encoder sees.
    pub context: usize,
    pub z_text: usize,
    pub z_id: usize,
    pub z_emotion: usize,
    pub z_audio: usize,
    pub z_face: usize,
    pub z_body: usize,
    pub z_hands: usize,
    pub speakers: usize,
    pub emotions: usize,
    pub word_dim: usize,
    pub samples_per_frame: usize,
    pub face_dim: usize,
    pub body_dim: usize,
    pub hands_dim: usize,
    pub seed_len: usize,
    pub text_layers: usize,
    pub emotion_layers: usize,
    pub audio_layers: usize,
    pub face_layers: usize,
    pub disc_channels: usize,
    pub alpha: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub lr: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub drop: Vec<Modality>,
    #[serde(default)]
    pub freeze_discriminator: bool,
}

impl Default for CamnConfig {
    fn default() -> CamnConfig {
        CamnConfig::paper()
    }
}

impl CamnConfig {
    pub fn paper() -> CamnConfig {
        CamnConfig {
            context: 32,
            z_text: 128,
            z_id: 8,
            z_emotion: 8,
            z_audio: 128,
            z_face: 32,
            z_body: 256,
            z_hands: 256,
            speakers: 30,
            emotions: 8,
            word_dim: 300,
            samples_per_frame: 800,
            face_dim: 52,
            body_dim: 27 * 3,
            hands_dim: 48 * 3,
            seed_len: 8,
            text_layers: 8,
            emotion_layers: 4,
            audio_layers: 12,
            face_layers: 8,
            disc_channels: 64,
            alpha: 0.02,
            beta0: 100.0,
            beta1: 20.0,
            lr: 2e-4,
            batch_size: 16,
            drop: Vec::new(),
            freeze_discriminator: false,
        }
    }

    /// Paper latent widths divided by eight. Input and output widths other
    /// than the word and audio vectors are kept.
    pub fn toy() -> CamnConfig {
        let p = CamnConfig::paper();
        CamnConfig {
            z_text: p.z_text / 8,
            z_id: p.z_id / 8,
            z_emotion: p.z_emotion / 8,
            z_audio: p.z_audio / 8,
            z_face: p.z_face / 8,
            z_body: p.z_body / 8,
            z_hands: p.z_hands / 8,
            word_dim: p.word_dim / 8,
            samples_per_frame: p.samples_per_frame / 8,
            disc_channels: p.disc_channels / 8,
            ..p
        }
    }

    /// Width of the per-frame conditioning block (everything but the poses).
    pub fn condition_dim(&self) -> usize {
        self.z_text + self.z_id + self.z_emotion + self.z_audio + self.z_face
    }

    /// Width of the fused per-frame feature.
    pub fn fused_dim(&self) -> usize {
        self.condition_dim() + self.body_dim + self.hands_dim
    }

    pub fn drops(&self, m: Modality) -> bool {
        self.drop.contains(&m)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("context", self.context),
            ("z_text", self.z_text),
            ("z_id", self.z_id),
            ("z_emotion", self.z_emotion),
            ("z_audio", self.z_audio),
            ("z_face", self.z_face),
            ("z_body", self.z_body),
            ("z_hands", self.z_hands),
            ("speakers", self.speakers),
            ("emotions", self.emotions),
            ("word_dim", self.word_dim),
            ("samples_per_frame", self.samples_per_frame),
            ("face_dim", self.face_dim),
            ("body_dim", self.body_dim),
            ("hands_dim", self.hands_dim),
            ("seed_len", self.seed_len),
            ("disc_channels", self.disc_channels),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(CamnError::Config(format!("{name} must be positive")));
        }
        for (name, layers) in [
            ("text_layers", self.text_layers),
            ("emotion_layers", self.emotion_layers),
            ("audio_layers", self.audio_layers),
            ("face_layers", self.face_layers),
        ] {
            if layers == 0 || layers > self.context {
                return Err(CamnError::Config(format!(
                    "{name} = {layers} must be in 1..={} to fit the context",
                    self.context
                )));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta0", self.beta0), ("beta1", self.beta1)] {
            if !v.is_finite() || v < 0.0 {
                return Err(CamnError::Config(format!("{name} must be finite and non-negative")));
            }
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(CamnError::Config("lr must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_fused_dim() {
        let c = CamnConfig::paper();
        assert_eq!(c.fused_dim(), 128 + 8 + 8 + 128 + 32 + 81 + 144);
        assert_eq!(c.fused_dim(), 529);
        assert_eq!((c.body_dim, c.hands_dim), (81, 144));
    }

    #[test]
    fn toy_is_valid_and_smaller() {
        let t = CamnConfig::toy();
        t.validate().unwrap();
        assert_eq!((t.z_text, t.z_id, t.z_body, t.word_dim), (16, 1, 32, 37));
        assert_eq!(t.fused_dim(), 16 + 1 + 1 + 16 + 4 + 81 + 144);
    }

    #[test]
    fn rejects_zero_dims_and_deep_stacks() {
        let mut c = CamnConfig::toy();
        c.z_face = 0;
        assert!(c.validate().is_err());
        let mut c = CamnConfig::toy();
        c.context = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn modality_names_round_trip() {
        for m in Modality::ALL {
            assert_eq!(m.name().parse::<Modality>().unwrap(), m);
        }
        assert!("smell".parse::<Modality>().is_err());
    }
}
