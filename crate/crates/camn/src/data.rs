use std::collections::HashMap;
use std::f64::consts::PI;

use beat_core::motion::Token;
use ndiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CamnConfig, CamnError, Result};

/// Frozen word-vector table. Row 0 is the zero vector used for padding and
/// words missing from the table.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTable {
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl WordTable {
    pub fn empty(dim: usize) -> WordTable {
        WordTable {
            dim,
            index: HashMap::new(),
            vectors: vec![0.0; dim],
        }
    }

    /// Uniform random vectors in `[-1, 1)` for `words`, reproducible from `seed`.
    pub fn random<S: AsRef<str>>(words: &[S], dim: usize, seed: u64) -> WordTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = WordTable::empty(dim);
        for w in words {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            table.insert(w.as_ref(), &v);
        }
        table
    }

    /// Parses the plain-text vector format: an optional `count dim` header,
    /// then `word v1 … vdim` per line. Duplicate words keep the first vector.
    pub fn parse(text: &str) -> Result<WordTable> {
        let mut table: Option<WordTable> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| CamnError::WordTable {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let t = table.get_or_insert_with(|| WordTable::empty(values.len()));
            if values.len() != t.dim || values.is_empty() {
                return Err(CamnError::WordTable {
                    line: line_no,
                    message: format!("expected {} values, got {}", t.dim, values.len()),
                });
            }
            if !t.index.contains_key(&fields[0].to_lowercase()) {
                t.insert(fields[0], &values);
            }
        }
        table.ok_or(CamnError::WordTable {
            line: 0,
            message: "no vectors".into(),
        })
    }

    fn insert(&mut self, word: &str, v: &[f64]) {
        let id = self.vectors.len() / self.dim;
        self.vectors.extend_from_slice(v);
        self.index.insert(word.to_lowercase(), id);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of words, not counting the padding row.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Row index for a token; 0 for padding and unknown words.
    pub fn id(&self, token: &Token) -> usize {
        match token {
            Token::Pad => 0,
            Token::Word(w) => self.index.get(&w.to_lowercase()).copied().unwrap_or(0),
        }
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    /// `T×dim` matrix of per-frame word vectors.
    pub fn embed(&self, tokens: &[Token]) -> Tensor {
        let data = tokens.iter().flat_map(|t| self.vector(self.id(t)).to_vec()).collect();
        Tensor::new(vec![tokens.len(), self.dim], data).expect("rows of dim")
    }
}

/// Everything the generator reads except the poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    /// `T×word_dim` per-frame word vectors.
    pub words: Tensor,
    pub speaker: usize,
    /// Emotion id per frame.
    pub emotions: Vec<usize>,
    /// `T×samples_per_frame` raw audio windows.
    pub audio: Tensor,
    /// `T×face_dim` blendshape weights.
    pub face: Tensor,
}

impl Conditioning {
    pub fn frames(&self) -> usize {
        self.emotions.len()
    }

    pub fn validate(&self, config: &CamnConfig) -> Result<()> {
        let t = self.frames();
        if t == 0 {
            return Err(CamnError::Input("empty sequence".into()));
        }
        for (name, m, cols) in [
            ("words", &self.words, config.word_dim),
            ("audio", &self.audio, config.samples_per_frame),
            ("face", &self.face, config.face_dim),
        ] {
            if m.shape() != [t, cols] {
                return Err(CamnError::Input(format!(
                    "{name} has shape {:?}, expected [{t}, {cols}]",
                    m.shape()
                )));
            }
        }
        if self.speaker >= config.speakers {
            return Err(CamnError::Input(format!(
                "speaker {} out of range for {} speakers",
                self.speaker, config.speakers
            )));
        }
        if let Some(e) = self.emotions.iter().find(|&&e| e >= config.emotions) {
            return Err(CamnError::Input(format!(
                "emotion {e} out of range for {} emotions",
                config.emotions
            )));
        }
        Ok(())
    }

    /// Frames `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Conditioning {
        Conditioning {
            words: rows(&self.words, start, end),
            speaker: self.speaker,
            emotions: self.emotions[start..end].to_vec(),
            audio: rows(&self.audio, start, end),
            face: rows(&self.face, start, end),
        }
    }
}

pub(crate) fn rows(t: &Tensor, start: usize, end: usize) -> Tensor {
    let c = t.cols();
    Tensor::matrix(end - start, c, t.data()[start * c..end * c].to_vec()).expect("row slice")
}

/// One training sequence: conditioning, target poses and the per-frame
/// semantic-relevance score.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub cond: Conditioning,
    /// `T×body_dim`.
    pub body: Tensor,
    /// `T×hands_dim`.
    pub hands: Tensor,
    pub relevance: Vec<f64>,
}

impl Clip {
    pub fn frames(&self) -> usize {
        self.cond.frames()
    }

    pub fn validate(&self, config: &CamnConfig) -> Result<()> {
        self.cond.validate(config)?;
        let t = self.frames();
        if self.body.shape() != [t, config.body_dim] || self.hands.shape() != [t, config.hands_dim] {
            return Err(CamnError::Input(format!(
                "poses have shapes {:?} and {:?} for {t} frames",
                self.body.shape(),
                self.hands.shape()
            )));
        }
        if self.relevance.len() != t {
            return Err(CamnError::Input(format!(
                "{} relevance scores for {t} frames",
                self.relevance.len()
            )));
        }
        if self.relevance.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(CamnError::Input("relevance scores must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn seed_body(&self, len: usize) -> Tensor {
        rows(&self.body, 0, len)
    }

    pub fn seed_hands(&self, len: usize) -> Tensor {
        rows(&self.hands, 0, len)
    }

    /// Consecutive non-overlapping windows of `len` frames; a shorter tail is
    /// dropped.
    pub fn crops(&self, len: usize) -> Vec<Clip> {
        if len == 0 {
            return Vec::new();
        }
        (0..self.frames() / len).map(|k| self.slice(k * len, (k + 1) * len)).collect()
    }

    pub fn slice(&self, start: usize, end: usize) -> Clip {
        Clip {
            cond: self.cond.slice(start, end),
            body: rows(&self.body, start, end),
            hands: rows(&self.hands, start, end),
            relevance: self.relevance[start..end].to_vec(),
        }
    }
}

const TOY_WORDS: [&str; 12] = [
    "i", "think", "this", "is", "really", "big", "you", "know", "we", "never", "go", "there",
];

/// Synthetic multi-modal sequences sized for `config`. Poses are a fixed
/// per-channel rest offset plus a slow oscillation whose phase follows the
/// audio envelope, so they are predictable from the inputs.
pub fn toy_corpus(config: &CamnConfig, clips: usize, frames: usize, seed: u64) -> (WordTable, Vec<Clip>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = WordTable::random(&TOY_WORDS, config.word_dim, seed ^ 0x5eed);
    let body_rest: Vec<f64> = (0..config.body_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let hand_rest: Vec<f64> = (0..config.hands_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let body_phase: Vec<f64> = (0..config.body_dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let hand_phase: Vec<f64> = (0..config.hands_dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let out = (0..clips)
        .map(|_| {
            let period = rng.random_range(16.0..32.0);
            let speaker = rng.random_range(0..config.speakers);
            let emotion = rng.random_range(0..config.emotions);
            let tokens: Vec<Token> = (0..frames)
                .map(|t| {
                    if (t / 4) % 3 == 2 {
                        Token::Pad
                    } else {
                        Token::Word(TOY_WORDS[(t / 4 + speaker) % TOY_WORDS.len()].to_string())
                    }
                })
                .collect();
            let spf = config.samples_per_frame;
            let mut audio = Vec::with_capacity(frames * spf);
            for t in 0..frames {
                let env = 0.5 + 0.5 * (2.0 * PI * t as f64 / period).sin();
                for s in 0..spf {
                    let x = (t * spf + s) as f64;
                    audio.push(env * (0.3 * x).sin() + rng.random_range(-0.01..0.01));
                }
            }
            let face: Vec<f64> = (0..frames * config.face_dim)
                .map(|i| 0.5 + 0.3 * (2.0 * PI * (i / config.face_dim) as f64 / period).cos())
                .collect();
            let wave = |rest: &[f64], phase: &[f64]| -> Vec<f64> {
                (0..frames)
                    .flat_map(|t| {
                        rest.iter()
                            .zip(phase)
                            .map(move |(r, p)| r + 0.3 * (2.0 * PI * t as f64 / period + p).sin())
                    })
                    .collect()
            };
            Clip {
                cond: Conditioning {
                    words: table.embed(&tokens),
                    speaker,
                    emotions: vec![emotion; frames],
                    audio: Tensor::matrix(frames, spf, audio).expect("audio rows"),
                    face: Tensor::matrix(frames, config.face_dim, face).expect("face rows"),
                },
                body: Tensor::matrix(frames, config.body_dim, wave(&body_rest, &body_phase)).expect("body rows"),
                hands: Tensor::matrix(frames, config.hands_dim, wave(&hand_rest, &hand_phase)).expect("hand rows"),
                relevance: (0..frames).map(|_| rng.random_range(0.9..=1.0)).collect(),
            }
        })
        .collect();
    (table, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_vector_text_with_header() {
        let t = WordTable::parse("3 2\nhello 1 2\nWorld 3 4\nhello 9 9\n").unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.len(), 2);
        let e = t.embed(&[Token::Word("HELLO".into()), Token::Pad, Token::Word("zzz".into())]);
        assert_eq!(e.data(), &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.vector(t.id(&Token::Word("world".into()))), &[3.0, 4.0]);
    }

    #[test]
    fn rejects_ragged_vectors() {
        let err = WordTable::parse("a 1 2\nb 1\n").unwrap_err();
        assert!(matches!(err, CamnError::WordTable { line: 2, .. }));
        assert!(WordTable::parse("a 1 x\n").is_err());
        assert!(WordTable::parse("\n").is_err());
    }

    #[test]
    fn random_table_is_seeded() {
        assert_eq!(WordTable::random(&["a", "b"], 4, 1), WordTable::random(&["a", "b"], 4, 1));
        assert_ne!(WordTable::random(&["a", "b"], 4, 1), WordTable::random(&["a", "b"], 4, 2));
    }

    #[test]
    fn toy_corpus_matches_config() {
        let c = CamnConfig::toy();
        let (_, clips) = toy_corpus(&c, 3, 20, 0);
        for clip in &clips {
            clip.validate(&c).unwrap();
        }
        let s = clips[0].slice(2, 10);
        assert_eq!(s.frames(), 8);
        s.validate(&c).unwrap();
        let crops = clips[0].crops(6);
        assert_eq!(crops.len(), 3);
        assert_eq!(crops[1], clips[0].slice(6, 12));
    }
}
