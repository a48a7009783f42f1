use std::io::Write;
use std::path::{Path, PathBuf};

use beat_core::motion::{
    forward_kinematics, frame_words, parse_blendshapes, parse_textgrid, positions_to_csv, read_audio, write_blendshapes,
    write_bvh, write_wav, Resample, RotationMode,
};

use super::{extension, load_bvh, require_same_count};
use crate::config::RunConfig;
use crate::error::{read_bytes, read_text, write_file, CliError, Result};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Input files (.bvh, .json blendshapes, .wav, .TextGrid).
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Output files, one per input.
    #[arg(long = "out", required = true, num_args = 1..)]
    pub outputs: Vec<PathBuf>,
    /// Target frame rate for motion, blendshapes and framed words.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Write BVH joint positions as CSV instead of a BVH.
    #[arg(long)]
    pub fk: bool,
    /// Target audio sample rate; audio is also downmixed to mono.
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

pub fn run(args: Args, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    require_same_count("--in/--out", args.inputs.len(), args.outputs.len())?;
    let fps = args.fps.or(config.convert.fps);
    let rate = args.sample_rate.or(config.convert.sample_rate);
    for (src, dst) in args.inputs.iter().zip(&args.outputs) {
        let line = convert_one(src, dst, fps, rate, args.fk)?;
        writeln!(out, "{} -> {}: {line}", src.display(), dst.display())?;
    }
    Ok(())
}

fn convert_one(src: &Path, dst: &Path, fps: Option<f64>, rate: Option<u32>, fk: bool) -> Result<String> {
    let ctx = |e: beat_core::motion::MotionError| CliError::from(e).in_file(src);
    match extension(src).as_str() {
        "bvh" => {
            let mut clip = load_bvh(src)?;
            if let Some(f) = fps {
                clip = clip.resample(f).map_err(ctx)?;
            }
            if fk {
                let track = forward_kinematics(&clip, RotationMode::FromChannels).map_err(ctx)?;
                let names: Vec<String> = clip.skeleton().iter().map(|j| j.name.clone()).collect();
                write_file(dst, positions_to_csv(&track, &names))?;
                Ok(format!(
                    "{} frames at {} fps, {} joint positions",
                    track.num_frames(),
                    track.fps(),
                    track.num_joints()
                ))
            } else {
                write_file(dst, write_bvh(&clip))?;
                Ok(format!(
                    "{} frames at {} fps, {} channels",
                    clip.num_frames(),
                    clip.fps(),
                    clip.num_channels()
                ))
            }
        }
        "json" => {
            let parsed = parse_blendshapes(&read_text(src)?).map_err(ctx)?;
            if parsed.clamped > 0 {
                log::warn!("{}: clamped {} weights into [0, 1]", src.display(), parsed.clamped);
            }
            let mut track = parsed.track;
            if let Some(f) = fps {
                track = track.resample(f).map_err(ctx)?;
            }
            write_file(dst, write_blendshapes(&track))?;
            Ok(format!(
                "{} frames at {} fps, {} blendshapes, {} clamped",
                track.num_frames(),
                track.fps(),
                track.num_channels(),
                parsed.clamped
            ))
        }
        "wav" => {
            let audio = read_audio(&read_bytes(src)?).map_err(ctx)?;
            let audio = match rate {
                Some(r) => audio.downmix_resample(r).map_err(ctx)?,
                None => audio,
            };
            write_file(dst, write_wav(&audio))?;
            Ok(format!(
                "{} samples at {} Hz, {} channels",
                audio.len(),
                audio.sample_rate(),
                audio.num_channels()
            ))
        }
        "textgrid" => {
            let fps = fps.ok_or_else(|| CliError::other("framing words needs --fps"))?;
            let transcript = parse_textgrid(&read_text(src)?).map_err(ctx)?;
            let end = transcript.entries().last().map_or(0.0, |e| e.end);
            let frames = (end * fps).ceil() as usize;
            let words = frame_words(&transcript, fps, frames);
            let mut csv = String::from("frame,word\n");
            for (i, w) in words.iter().enumerate() {
                csv.push_str(&format!("{i},{w}\n"));
            }
            write_file(dst, csv)?;
            Ok(format!("{frames} frames at {fps} fps, {} words", transcript.entries().len()))
        }
        other => Err(CliError::other(format!("{}: unsupported input type `{other}`", src.display()))),
    }
}
