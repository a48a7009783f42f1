use std::io::Write;
use std::path::PathBuf;

use beat_core::annotation::{
    frame_semantic_scores, parse_semantic_annotation, semantic_agreement_table, semantic_stats, SegmentFill,
};
use beat_core::motion::{frame_words, parse_textgrid};

use super::{require_same_count, scores_csv};
use crate::config::RunConfig;
use crate::error::{read_text, write_file, CliError, Result};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Semantic annotation files, paired with --textgrid in order.
    #[arg(long, num_args = 1..)]
    pub annotation: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub textgrid: Vec<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Frames inside a segment but outside its keywords take the segment score.
    #[arg(long)]
    pub inherit: bool,
    /// Score-bucket frame counts (`score,frames` CSV) to turn into an agreement table.
    #[arg(long, conflicts_with_all = ["annotation", "textgrid"])]
    pub agreement: Option<PathBuf>,
    /// Directory for histogram.csv, per_word.csv and per-clip score tracks.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn run(args: Args, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let out_dir = args.out_dir.clone().or_else(|| config.general.out_dir.clone());
    if let Some(path) = &args.agreement {
        let hist = parse_counts(&read_text(path)?).map_err(|e| e.in_file(path))?;
        let table = semantic_agreement_table(&hist)?;
        let csv = table.to_csv();
        write!(out, "{csv}")?;
        if let Some(dir) = &out_dir {
            write_file(&dir.join("agreement.csv"), &csv)?;
        }
        return Ok(());
    }
    require_same_count("--annotation/--textgrid", args.annotation.len(), args.textgrid.len())?;
    let fill = if args.inherit {
        SegmentFill::InheritSegment
    } else {
        SegmentFill::KeywordsOnly
    };
    let mut tracks = Vec::new();
    let mut words = Vec::new();
    let mut missing = 0usize;
    for (a, t) in args.annotation.iter().zip(&args.textgrid) {
        let segments = parse_semantic_annotation(&read_text(a)?).map_err(|e| CliError::from(e).in_file(a))?;
        let transcript = parse_textgrid(&read_text(t)?).map_err(|e| CliError::from(e).in_file(t))?;
        let end = transcript
            .entries()
            .iter()
            .map(|e| e.end)
            .chain(segments.iter().map(|s| s.end))
            .fold(0.0, f64::max);
        let frames = (end * args.fps).ceil() as usize;
        let framed = frame_semantic_scores(&segments, &transcript, args.fps, frames, fill);
        missing += framed.missing_keywords.len();
        if let Some(dir) = &out_dir {
            let stem = a.file_stem().and_then(|s| s.to_str()).unwrap_or("clip");
            write_file(&dir.join(format!("{stem}.scores.csv")), scores_csv(&framed.track))?;
        }
        words.push(frame_words(&transcript, args.fps, frames));
        tracks.push(framed.track);
    }
    let stats = semantic_stats(&tracks, &words)?;
    let hist = stats.histogram_csv();
    write!(out, "{hist}")?;
    writeln!(out, "clips {}", tracks.len())?;
    writeln!(out, "frames {}", stats.total_frames)?;
    writeln!(out, "missing_keywords {missing}")?;
    writeln!(out, "low_score_fraction {:.3}", stats.low_score_fraction)?;
    if let Some(dir) = &out_dir {
        write_file(&dir.join("histogram.csv"), hist)?;
        write_file(&dir.join("per_word.csv"), stats.per_word_csv())?;
    }
    Ok(())
}

/// `score,frames` rows; a header line is skipped when its first field is not numeric.
fn parse_counts(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: Option<Vec<f64>> = fields.iter().take(2).map(|f| f.parse().ok()).collect();
        match nums {
            Some(v) if v.len() == 2 => rows.push((v[0], v[1])),
            _ if i == 0 => continue,
            _ => return Err(CliError::parse(format!("line {}: expected `score,frames`", i + 1))),
        }
    }
    Ok(rows)
}
