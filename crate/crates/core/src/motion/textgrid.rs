use std::fmt::{self, Write as _};

use super::{parse_err, MotionError, Result};

/// One word slot of an aligned transcript.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    /// Silence.
    Pad,
    Word(String),
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match self {
            Token::Pad => None,
            Token::Word(w) => Some(w),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Pad => f.write_str("<pad>"),
            Token::Word(w) => f.write_str(w),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordInterval {
    pub token: Token,
    pub start: f64,
    pub end: f64,
}

/// Word-level forced alignment: sorted, non-overlapping `[start, end)` intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignedTranscript {
    entries: Vec<WordInterval>,
}

impl AlignedTranscript {
    pub fn new(entries: Vec<WordInterval>) -> Result<AlignedTranscript> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.start.is_finite() && e.end.is_finite() && e.start < e.end) {
                return Err(MotionError::Invalid(format!(
                    "interval {} has start {} and end {}",
                    i + 1,
                    e.start,
                    e.end
                )));
            }
        }
        for (i, pair) in entries.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.start < prev.start {
                return Err(MotionError::UnsortedIntervals {
                    previous: i + 1,
                    index: i + 2,
                });
            }
            if next.start < prev.end {
                return Err(MotionError::OverlappingIntervals {
                    first: i + 1,
                    second: i + 2,
                });
            }
        }
        Ok(AlignedTranscript { entries })
    }

    pub fn entries(&self) -> &[WordInterval] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry whose half-open interval contains `time`.
    pub fn at(&self, time: f64) -> Option<&WordInterval> {
        let idx = self.entries.partition_point(|e| e.start <= time);
        let candidate = self.entries.get(idx.checked_sub(1)?)?;
        (time < candidate.end).then_some(candidate)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64),
    Text(String),
    Flag(String),
}

struct Lexed {
    value: Value,
    line: usize,
}

/// Reduces long- and short-form TextGrids to the same value stream by dropping
/// labels (`xmin =`, `item [1]:`, ...) and keeping numbers, strings and flags.
fn lex(text: &str) -> Result<Vec<Lexed>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            '"' => {
                let start_line = line;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                        }
                        None => return Err(parse_err(start_line, "unterminated string")),
                    }
                }
                out.push(Lexed {
                    value: Value::Text(s),
                    line: start_line,
                });
            }
            '<' => {
                chars.next();
                let mut s = String::new();
                for ch in chars.by_ref() {
                    if ch == '>' {
                        break;
                    }
                    s.push(ch);
                }
                out.push(Lexed {
                    value: Value::Flag(s),
                    line,
                });
            }
            '[' => {
                for ch in chars.by_ref() {
                    if ch == ']' {
                        break;
                    }
                }
            }
            '!' => {
                while chars.peek().is_some_and(|&ch| ch != '\n') {
                    chars.next();
                }
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || matches!(ch, '.' | '-' | '+') {
                        s.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let v: f64 = s
                    .parse()
                    .map_err(|_| parse_err(line, format!("invalid number `{s}`")))?;
                out.push(Lexed {
                    value: Value::Number(v),
                    line,
                });
            }
            c if c.is_alphabetic() => {
                // Labels such as `xmin`, `intervals:`, `size`.
                while chars
                    .peek()
                    .is_some_and(|&ch| ch.is_alphanumeric() || ch == '_' || ch == '?')
                {
                    chars.next();
                }
            }
            _ => {
                chars.next();
            }
        }
    }
    Ok(out)
}

struct Stream {
    items: Vec<Lexed>,
    pos: usize,
}

impl Stream {
    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or_else(|| self.items.last())
            .map_or(1, |l| l.line)
    }

    fn next(&mut self) -> Option<&Lexed> {
        let item = self.items.get(self.pos);
        self.pos += 1;
        item
    }

    fn number(&mut self, what: &str) -> Result<f64> {
        let line = self.line();
        match self.next() {
            Some(Lexed {
                value: Value::Number(v),
                ..
            }) => Ok(*v),
            Some(other) => Err(parse_err(other.line, format!("expected {what}, found {:?}", other.value))),
            None => Err(parse_err(line, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn text(&mut self, what: &str) -> Result<String> {
        let line = self.line();
        match self.next() {
            Some(Lexed {
                value: Value::Text(s),
                ..
            }) => Ok(s.clone()),
            Some(other) => Err(parse_err(other.line, format!("expected {what}, found {:?}", other.value))),
            None => Err(parse_err(line, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let line = self.line();
        let v = self.number(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(parse_err(line, format!("invalid {what} `{v}`")));
        }
        Ok(v as usize)
    }
}

struct Tier {
    name: String,
    intervals: Option<Vec<(f64, f64, String)>>,
    line: usize,
}

/// Parses a Praat TextGrid (long or short text form) and returns the word tier.
///
/// The tier named `words` (or `word`) is preferred, otherwise the first interval
/// tier. Empty interval labels become [`Token::Pad`].
pub fn parse_textgrid(text: &str) -> Result<AlignedTranscript> {
    let mut s = Stream {
        items: lex(text)?,
        pos: 0,
    };
    let file_type = s.text("file type")?;
    if !file_type.starts_with("ooTextFile") {
        return Err(parse_err(1, format!("unsupported file type `{file_type}`")));
    }
    let class = s.text("object class")?;
    if class != "TextGrid" {
        return Err(parse_err(2, format!("object class `{class}` is not a TextGrid")));
    }
    s.number("xmin")?;
    s.number("xmax")?;
    let tiers_flag = match s.next() {
        Some(Lexed {
            value: Value::Flag(f),
            ..
        }) => f.clone(),
        _ => return Err(parse_err(s.line(), "expected <exists> or <absent>")),
    };
    let mut tiers = Vec::new();
    if tiers_flag == "exists" {
        let n = s.count("tier count")?;
        for _ in 0..n {
            let line = s.line();
            let class = s.text("tier class")?;
            let name = s.text("tier name")?;
            s.number("tier xmin")?;
            s.number("tier xmax")?;
            let size = s.count("tier size")?;
            match class.as_str() {
                "IntervalTier" => {
                    let mut intervals = Vec::with_capacity(size);
                    for _ in 0..size {
                        let a = s.number("interval xmin")?;
                        let b = s.number("interval xmax")?;
                        let label = s.text("interval text")?;
                        intervals.push((a, b, label));
                    }
                    tiers.push(Tier {
                        name,
                        intervals: Some(intervals),
                        line,
                    });
                }
                "TextTier" => {
                    for _ in 0..size {
                        s.number("point time")?;
                        s.text("point mark")?;
                    }
                    tiers.push(Tier {
                        name,
                        intervals: None,
                        line,
                    });
                }
                other => return Err(parse_err(line, format!("unknown tier class `{other}`"))),
            }
        }
    }
    let is_words = |t: &&Tier| {
        let n = t.name.to_ascii_lowercase();
        t.intervals.is_some() && (n == "words" || n == "word")
    };
    let tier = tiers
        .iter()
        .find(is_words)
        .or_else(|| tiers.iter().find(|t| t.intervals.is_some()))
        .ok_or(MotionError::NoWordTier)?;
    log::debug!("using TextGrid tier `{}` (line {})", tier.name, tier.line);
    let entries = tier
        .intervals
        .as_ref()
        .expect("interval tier")
        .iter()
        .map(|(start, end, label)| {
            let label = label.trim();
            WordInterval {
                token: if label.is_empty() {
                    Token::Pad
                } else {
                    Token::Word(label.to_string())
                },
                start: *start,
                end: *end,
            }
        })
        .collect();
    AlignedTranscript::new(entries)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Writes a long-form TextGrid with one interval tier named `words`.
pub fn write_textgrid(transcript: &AlignedTranscript) -> String {
    let entries = transcript.entries();
    let xmin = entries.first().map_or(0.0, |e| e.start.min(0.0));
    let xmax = entries.last().map_or(0.0, |e| e.end);
    let mut out = String::new();
    let _ = writeln!(out, "File type = \"ooTextFile\"");
    let _ = writeln!(out, "Object class = \"TextGrid\"");
    let _ = writeln!(out);
    let _ = writeln!(out, "xmin = {xmin}");
    let _ = writeln!(out, "xmax = {xmax}");
    let _ = writeln!(out, "tiers? <exists>");
    let _ = writeln!(out, "size = 1");
    let _ = writeln!(out, "item []:");
    let _ = writeln!(out, "    item [1]:");
    let _ = writeln!(out, "        class = \"IntervalTier\"");
    let _ = writeln!(out, "        name = \"words\"");
    let _ = writeln!(out, "        xmin = {xmin}");
    let _ = writeln!(out, "        xmax = {xmax}");
    let _ = writeln!(out, "        intervals: size = {}", entries.len());
    for (i, e) in entries.iter().enumerate() {
        let label = e.token.word().unwrap_or("");
        let _ = writeln!(out, "        intervals [{}]:", i + 1);
        let _ = writeln!(out, "            xmin = {}", e.start);
        let _ = writeln!(out, "            xmax = {}", e.end);
        let _ = writeln!(out, "            text = {}", quote(label));
    }
    out
}

/// Assigns each of `frames` frames the token whose interval contains the frame
/// midpoint `(i + 0.5) / fps`; uncovered frames get [`Token::Pad`].
pub fn frame_words(transcript: &AlignedTranscript, fps: f64, frames: usize) -> Vec<Token> {
    (0..frames)
        .map(|i| {
            let mid = (i as f64 + 0.5) / fps;
            transcript
                .at(mid)
                .map_or(Token::Pad, |e| e.token.clone())
        })
        .collect()
}
