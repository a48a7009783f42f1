//! One module per subcommand plus the file loaders they share.

use std::path::Path;

use beat_core::annotation::ScoreTrack;
use beat_core::motion::{forward_kinematics, parse_bvh, MotionClip, PositionTrack, RotationMode};

use crate::error::{read_text, CliError, Result};

pub mod beats;
pub mod camn;
pub mod convert;
pub mod eval;
pub mod stats;

/// Lowercased file extension, empty when there is none.
pub(crate) fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

pub(crate) fn load_bvh(path: &Path) -> Result<MotionClip> {
    let text = read_text(path)?;
    parse_bvh(&text).map_err(|e| CliError::from(e).in_file(path))
}

pub(crate) fn load_positions(path: &Path) -> Result<PositionTrack> {
    let clip = load_bvh(path)?;
    forward_kinematics(&clip, RotationMode::FromChannels).map_err(|e| CliError::from(e).in_file(path))
}

/// Per-frame scores from a CSV with a `score` column (other columns ignored).
pub(crate) fn load_scores(path: &Path, fps: f64) -> Result<ScoreTrack> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::parse("empty score file").in_file(path))?;
    let col = header
        .split(',')
        .position(|h| h.trim() == "score")
        .ok_or_else(|| CliError::parse("line 1: no `score` column").in_file(path))?;
    let mut scores = Vec::new();
    for (i, line) in lines {
        let field = line
            .split(',')
            .nth(col)
            .ok_or_else(|| CliError::parse(format!("line {}: missing score", i + 1)).in_file(path))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| CliError::parse(format!("line {}: bad number `{}`", i + 1, field.trim())).in_file(path))?;
        scores.push(v);
    }
    ScoreTrack::new(fps, scores).map_err(|e| CliError::from(e).in_file(path))
}

pub(crate) fn scores_csv(track: &ScoreTrack) -> String {
    let mut out = String::from("frame,time,score\n");
    for (i, s) in track.scores().iter().enumerate() {
        out.push_str(&format!("{i},{:.6},{s:.6}\n", i as f64 / track.fps));
    }
    out
}

pub(crate) fn require_same_count(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(CliError::mismatch(format!("{what}: {a} vs {b} files")));
    }
    Ok(())
}
