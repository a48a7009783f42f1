//! Semantic-relevance and emotion annotations.
//!
//! Semantic annotation files are line oriented, one gesture segment per line:
//!
//! ```text
//! # start end segment_score keyword:score ...
//! 0.0 2.0 0.8 apple:0.5 tree:1.0
//! ```
//!
//! Blank lines and `#` comments are ignored. A keyword may itself contain
//! colons; the score is taken after the last one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::motion::{AlignedTranscript, Token};

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("segment end {end} is not after start {start}")]
    EmptySegment { start: f64, end: f64 },
    #[error("tracks have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("annotator tracks must be binary, found {0}")]
    NonBinary(f64),
    #[error("no annotator tracks given")]
    NoTracks,
    #[error("emotion id {0} is out of range (8 categories)")]
    EmotionOutOfRange(u8),
    #[error("score key {0} is not a multiple of 0.1")]
    NotTenth(f64),
}

pub type Result<T> = std::result::Result<T, AnnotationError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    pub word: String,
    pub score: f64,
}

/// A gesture segment with its averaged relevance vote and keyword scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSegment {
    pub start: f64,
    pub end: f64,
    pub score: f64,
    pub keywords: Vec<Keyword>,
}

fn check_score(score: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(AnnotationError::ScoreOutOfRange(score))
    }
}

impl SemanticSegment {
    pub fn new(start: f64, end: f64, score: f64, keywords: Vec<Keyword>) -> Result<SemanticSegment> {
        if !(end > start) {
            return Err(AnnotationError::EmptySegment { start, end });
        }
        check_score(score)?;
        for k in &keywords {
            check_score(k.score)?;
        }
        Ok(SemanticSegment {
            start,
            end,
            score,
            keywords,
        })
    }
}

pub fn parse_semantic_annotation(text: &str) -> Result<Vec<SemanticSegment>> {
    let mut segments = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |message: String| AnnotationError::Parse { line, message };
        let mut fields = content.split_whitespace();
        let mut number = |what: &str| -> Result<f64> {
            let f = fields.next().ok_or_else(|| perr(format!("missing {what}")))?;
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(format!("invalid {what} `{f}`")))
        };
        let start = number("start")?;
        let end = number("end")?;
        let score = number("segment score")?;
        let mut keywords = Vec::new();
        for pair in fields {
            let (word, value) = pair
                .rsplit_once(':')
                .ok_or_else(|| perr(format!("keyword `{pair}` lacks `:score`")))?;
            let kw_score: f64 = value
                .parse()
                .map_err(|_| perr(format!("invalid keyword score `{value}`")))?;
            if word.is_empty() {
                return Err(perr("empty keyword".into()));
            }
            keywords.push(Keyword {
                word: word.to_string(),
                score: kw_score,
            });
        }
        segments.push(SemanticSegment::new(start, end, score, keywords).map_err(|e| match e {
            AnnotationError::Parse { .. } => e,
            other => perr(other.to_string()),
        })?);
    }
    segments.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    Ok(segments)
}

/// Per-frame values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrack {
    pub fps: f64,
    scores: Vec<f64>,
}

impl ScoreTrack {
    pub fn new(fps: f64, scores: Vec<f64>) -> Result<ScoreTrack> {
        for &s in &scores {
            check_score(s)?;
        }
        Ok(ScoreTrack { fps, scores })
    }

    pub fn zeros(fps: f64, frames: usize) -> ScoreTrack {
        ScoreTrack {
            fps,
            scores: vec![0.0; frames],
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            0.0
        } else {
            self.scores.iter().sum::<f64>() / self.scores.len() as f64
        }
    }
}

/// How frames inside a segment but outside every keyword interval are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SegmentFill {
    /// Such frames score 0.
    #[default]
    KeywordsOnly,
    /// Such frames inherit the segment score.
    InheritSegment,
}

/// Result of [`frame_semantic_scores`]: the track plus keywords that could
/// not be located in the transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedScores {
    pub track: ScoreTrack,
    pub missing_keywords: Vec<String>,
}

fn same_word(a: &str, b: &str) -> bool {
    let clean = |s: &str| {
        s.trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase()
    };
    clean(a) == clean(b)
}

/// Frame-level semantic scores: a frame whose midpoint lies in a segment and in
/// the aligned interval of one of that segment's keywords scores
/// `segment_score × keyword_score`. Overlaps keep the largest value.
pub fn frame_semantic_scores(
    segments: &[SemanticSegment],
    transcript: &AlignedTranscript,
    fps: f64,
    frames: usize,
    fill: SegmentFill,
) -> FramedScores {
    let mut scores = vec![0.0f64; frames];
    let mut missing = Vec::new();
    let frame_range = |start: f64, end: f64| {
        // Frames whose midpoint (i + 0.5)/fps lies in [start, end).
        let first = (start * fps - 0.5).ceil().max(0.0) as usize;
        (first..frames).take_while(move |&i| (i as f64 + 0.5) / fps < end)
    };
    for seg in segments {
        if fill == SegmentFill::InheritSegment {
            for i in frame_range(seg.start, seg.end) {
                scores[i] = scores[i].max(seg.score);
            }
        }
        for kw in &seg.keywords {
            let hits: Vec<_> = transcript
                .entries()
                .iter()
                .filter(|e| e.start < seg.end && e.end > seg.start)
                .filter(|e| matches!(&e.token, Token::Word(w) if same_word(w, &kw.word)))
                .collect();
            if hits.is_empty() {
                log::warn!(
                    "keyword `{}` not found in transcript within [{}, {})",
                    kw.word,
                    seg.start,
                    seg.end
                );
                missing.push(kw.word.clone());
                continue;
            }
            let value = seg.score * kw.score;
            for hit in hits {
                for i in frame_range(hit.start.max(seg.start), hit.end.min(seg.end)) {
                    scores[i] = scores[i].max(value);
                }
            }
        }
    }
    FramedScores {
        track: ScoreTrack { fps, scores },
        missing_keywords: missing,
    }
}

/// Element-wise mean of binary annotator tracks.
pub fn average_annotators(tracks: &[ScoreTrack]) -> Result<ScoreTrack> {
    let first = tracks.first().ok_or(AnnotationError::NoTracks)?;
    let n = first.len();
    for t in tracks {
        if t.len() != n {
            return Err(AnnotationError::LengthMismatch(n, t.len()));
        }
        if let Some(&bad) = t.scores.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(AnnotationError::NonBinary(bad));
        }
    }
    let k = tracks.len() as f64;
    let scores = (0..n)
        .map(|i| tracks.iter().map(|t| t.scores[i]).sum::<f64>() / k)
        .collect();
    Ok(ScoreTrack {
        fps: first.fps,
        scores,
    })
}

pub const EMOTIONS: [&str; 8] = [
    "neutral",
    "anger",
    "happiness",
    "fear",
    "disgust",
    "sadness",
    "contempt",
    "surprise",
];

/// Per-frame emotion category ids (`0..8`, see [`EMOTIONS`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmotionTrack {
    fps: u32,
    labels: Vec<u8>,
}

impl EmotionTrack {
    pub fn new(fps: u32, labels: Vec<u8>) -> Result<EmotionTrack> {
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= EMOTIONS.len()) {
            return Err(AnnotationError::EmotionOutOfRange(bad));
        }
        Ok(EmotionTrack { fps, labels })
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// Fraction of frames on which two annotators chose the same emotion.
pub fn emotion_agreement(a: &EmotionTrack, b: &EmotionTrack) -> Result<f64> {
    if a.labels.len() != b.labels.len() {
        return Err(AnnotationError::LengthMismatch(a.labels.len(), b.labels.len()));
    }
    if a.labels.is_empty() {
        return Ok(1.0);
    }
    let same = a.labels.iter().zip(&b.labels).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub score: f64,
    pub frames: f64,
    pub percentage: f64,
    pub agreement: f64,
    /// `frames × agreement`.
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementTable {
    pub rows: Vec<AgreementRow>,
    pub average_with_zero: f64,
    pub average_without_zero: f64,
}

/// With ten binary voters, a mean score `s` means a fraction `max(s, 1 − s)`
/// of annotators agree with the majority.
pub fn score_agreement(score: f64) -> f64 {
    score.max(1.0 - score)
}

fn tenths(score: f64) -> Result<u32> {
    let scaled = score * 10.0;
    if !(0.0..=1.0).contains(&score) || (scaled - scaled.round()).abs() > 1e-9 {
        return Err(AnnotationError::NotTenth(score));
    }
    Ok(scaled.round() as u32)
}

/// Builds the inter-rater agreement table from a `score → frame count` histogram.
pub fn semantic_agreement_table(histogram: &[(f64, f64)]) -> Result<AgreementTable> {
    let mut buckets = BTreeMap::new();
    for &(score, frames) in histogram {
        *buckets.entry(tenths(score)?).or_insert(0.0) += frames;
    }
    let total: f64 = buckets.values().sum();
    let rows: Vec<AgreementRow> = buckets
        .into_iter()
        .map(|(tenth, frames)| {
            let score = tenth as f64 / 10.0;
            let agreement = score_agreement(score);
            AgreementRow {
                score,
                frames,
                percentage: if total > 0.0 { frames / total } else { 0.0 },
                agreement,
                weighted: frames * agreement,
            }
        })
        .collect();
    let average = |rows: &mut dyn Iterator<Item = &AgreementRow>| {
        let (w, n) = rows.fold((0.0, 0.0), |(w, n), r| (w + r.weighted, n + r.frames));
        if n > 0.0 {
            w / n
        } else {
            0.0
        }
    };
    let average_with_zero = average(&mut rows.iter());
    let average_without_zero = average(&mut rows.iter().filter(|r| r.score != 0.0));
    Ok(AgreementTable {
        rows,
        average_with_zero,
        average_without_zero,
    })
}

impl AgreementTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("score,frames,percentage,agreement,weighted\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.1},{},{:.6},{:.1},{:.6}",
                r.score, r.frames, r.percentage, r.agreement, r.weighted
            );
        }
        let _ = writeln!(out, "avg_with_zero,,,,{:.6}", self.average_with_zero);
        let _ = writeln!(out, "avg_without_zero,,,,{:.6}", self.average_without_zero);
        out
    }
}

/// Scores at or below this count as low semantic relevance.
pub const LOW_SCORE_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct WordScore {
    pub mean: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticStats {
    /// Frame counts for buckets `[0, 0.1), [0.1, 0.2), …, [0.9, 1.0]`.
    pub histogram: [usize; 10],
    pub total_frames: usize,
    /// Fraction of frames scoring at most [`LOW_SCORE_THRESHOLD`].
    pub low_score_fraction: f64,
    pub per_word: BTreeMap<String, WordScore>,
}

fn bucket(score: f64) -> usize {
    ((score * 10.0 + 1e-9).floor() as usize).min(9)
}

/// Histogram and per-word mean scores over aligned score tracks and framed words.
/// Pairs are reduced sequentially in the given order.
pub fn semantic_stats(tracks: &[ScoreTrack], framed_words: &[Vec<Token>]) -> Result<SemanticStats> {
    if tracks.len() != framed_words.len() {
        return Err(AnnotationError::LengthMismatch(tracks.len(), framed_words.len()));
    }
    let mut histogram = [0usize; 10];
    let mut total = 0usize;
    let mut low = 0usize;
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (track, words) in tracks.iter().zip(framed_words) {
        if track.len() != words.len() {
            return Err(AnnotationError::LengthMismatch(track.len(), words.len()));
        }
        for (&s, w) in track.scores().iter().zip(words) {
            histogram[bucket(s)] += 1;
            total += 1;
            if s <= LOW_SCORE_THRESHOLD + 1e-9 {
                low += 1;
            }
            if let Token::Word(word) = w {
                let entry = sums.entry(word.to_lowercase()).or_insert((0.0, 0));
                entry.0 += s;
                entry.1 += 1;
            }
        }
    }
    let per_word = sums
        .into_iter()
        .map(|(w, (sum, n))| {
            (
                w,
                WordScore {
                    mean: sum / n as f64,
                    frames: n,
                },
            )
        })
        .collect();
    Ok(SemanticStats {
        histogram,
        total_frames: total,
        low_score_fraction: if total > 0 { low as f64 / total as f64 } else { 0.0 },
        per_word,
    })
}

impl SemanticStats {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bucket_lo,bucket_hi,n_frames,fraction\n");
        for (b, &n) in self.histogram.iter().enumerate() {
            let frac = if self.total_frames > 0 {
                n as f64 / self.total_frames as f64
            } else {
                0.0
            };
            let _ = writeln!(out, "{:.1},{:.1},{n},{frac:.6}", b as f64 / 10.0, (b + 1) as f64 / 10.0);
        }
        out
    }

    pub fn per_word_csv(&self) -> String {
        let mut out = String::from("word,mean_score,n_frames\n");
        for (w, s) in &self.per_word {
            let _ = writeln!(out, "{w},{:.6},{}", s.mean, s.frames);
        }
        out
    }
}
