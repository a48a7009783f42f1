use std::io::Write;
use std::path::PathBuf;

use beat_core::beatsig::{detect_audio_beats, group_motion_beats, EnvelopeParams};
use beat_core::motion::{forward_kinematics, read_audio, JointGroup, JointPartition, RotationMode};

use super::load_bvh;
use crate::config::RunConfig;
use crate::error::{read_bytes, write_file, CliError, Result};

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["audio", "bvh"])))]
pub struct Args {
    /// Audio onsets from a WAV file.
    #[arg(long)]
    pub audio: Option<PathBuf>,
    /// Velocity minima from a BVH clip.
    #[arg(long)]
    pub bvh: Option<PathBuf>,
    /// body, hands or all.
    #[arg(long)]
    pub joints: Option<String>,
    /// RMS window in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    /// RMS hop in seconds.
    #[arg(long)]
    pub hop: Option<f64>,
    #[arg(long)]
    pub onset_threshold: Option<f64>,
    /// Beat CSV (`t_seconds`); printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: Args, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let beats = if let Some(path) = &args.audio {
        let audio = read_audio(&read_bytes(path)?)
            .map_err(|e| CliError::from(e).in_file(path))?
            .downmix();
        let params = EnvelopeParams {
            window_s: args.window.unwrap_or(config.beats.window),
            hop_s: args.hop.unwrap_or(config.beats.hop),
        };
        let threshold = args.onset_threshold.unwrap_or(config.beats.onset_threshold);
        detect_audio_beats(audio.channel(0), audio.sample_rate(), params, threshold)
            .map_err(|e| CliError::from(e).in_file(path))?
    } else {
        let path = args.bvh.as_ref().expect("clap enforces one source");
        let group: JointGroup = args
            .joints
            .as_deref()
            .unwrap_or(&config.beats.joints)
            .parse()
            .map_err(CliError::other)?;
        let clip = load_bvh(path)?;
        let partition = JointPartition::from_skeleton(clip.skeleton());
        let positions =
            forward_kinematics(&clip, RotationMode::FromChannels).map_err(|e| CliError::from(e).in_file(path))?;
        group_motion_beats(&positions, &partition, group).map_err(|e| CliError::from(e).in_file(path))?
    };
    let csv = beats.to_csv();
    match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            writeln!(out, "{} beats -> {}", beats.len(), path.display())?;
        }
        None => write!(out, "{csv}")?,
    }
    Ok(())
}
